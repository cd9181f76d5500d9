//! Long-format CSV: `#`-prefixed provenance lines, then
//! `axis_name,axis_value,t,concurrence` with 12 significant digits.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::{SurfaceResult, SweepAxis};
use crate::error::{Error, Result};

pub const HEADER: &str = "axis_name,axis_value,t,concurrence";

const PROVENANCE_PREFIX: &str = "# provenance: ";

/// Formats `x` with 12 significant digits.
pub fn format_value(x: f64) -> String {
    format!("{x:.11e}")
}

/// `x` as it reads back from the CSV.
pub fn round_trip(x: f64) -> f64 {
    format_value(x).parse().expect("formatted float parses")
}

pub fn write_csv_to<W: Write>(result: &SurfaceResult, out: &mut W) -> std::io::Result<()> {
    for (k, v) in &result.provenance {
        writeln!(out, "{PROVENANCE_PREFIX}{k}={v}")?;
    }
    writeln!(out, "{HEADER}")?;
    let axis = result.axis.name();
    for (value, row) in result.axis_values.iter().zip(&result.concurrence) {
        let value = format_value(*value);
        for (t, c) in result.times.iter().zip(row) {
            writeln!(out, "{axis},{value},{},{}", format_value(*t), format_value(*c))?;
        }
    }
    Ok(())
}

pub fn write_csv(result: &SurfaceResult, path: &Path) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    write_csv_to(result, &mut out)
        .and_then(|_| out.flush())
        .map_err(|e| Error::io(path, e))
}

/// A surface loaded back from CSV.
#[derive(Clone, Debug, PartialEq)]
pub struct CsvSurface {
    pub axis: SweepAxis,
    pub axis_values: Vec<f64>,
    pub times: Vec<f64>,
    pub concurrence: Vec<Vec<f64>>,
    pub provenance: Vec<(String, String)>,
}

pub fn read_csv(path: &Path) -> Result<CsvSurface> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_csv(&text, path)
}

/// Parses CSV text; `path` only labels errors.
pub fn parse_csv(text: &str, path: &Path) -> Result<CsvSurface> {
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut provenance = Vec::new();
    let mut seen_header = false;
    let mut axis = None;
    let mut axis_values: Vec<f64> = Vec::new();
    let mut concurrence: Vec<Vec<f64>> = Vec::new();
    let mut times: Vec<f64> = Vec::new();
    let mut last_value: Option<&str> = None;

    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        if let Some(rest) = line.strip_prefix('#') {
            if let Some(entry) = line.strip_prefix(PROVENANCE_PREFIX) {
                let (k, v) = entry
                    .split_once('=')
                    .ok_or_else(|| parse_err(lineno, format!("malformed provenance line '{rest}'")))?;
                provenance.push((k.to_string(), v.to_string()));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        if !seen_header {
            if line.trim() != HEADER {
                return Err(parse_err(lineno, format!("expected header '{HEADER}'")));
            }
            seen_header = true;
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let [name, value, t, c] = fields[..] else {
            return Err(parse_err(lineno, format!("expected 4 fields, got {}", fields.len())));
        };
        let name: SweepAxis = name.parse().map_err(|e: Error| parse_err(lineno, e.to_string()))?;
        if *axis.get_or_insert(name) != name {
            return Err(parse_err(lineno, "mixed axis names".into()));
        }
        let number = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| parse_err(lineno, format!("'{s}' is not a number")))
        };
        let (t, c) = (number(t)?, number(c)?);
        if last_value != Some(value) {
            axis_values.push(number(value)?);
            concurrence.push(Vec::new());
            last_value = Some(value);
        }
        let first_row = concurrence.len() == 1;
        let row = concurrence.last_mut().expect("row pushed above");
        if first_row {
            times.push(t);
        } else if times.get(row.len()) != Some(&t) {
            return Err(parse_err(
                lineno,
                format!("time {t} does not match the first row's grid"),
            ));
        }
        row.push(c);
    }
    let axis = axis.ok_or_else(|| parse_err(text.lines().count(), "no data rows".into()))?;
    if concurrence.iter().any(|r| r.len() != times.len()) {
        return Err(parse_err(text.lines().count(), "rows have different lengths".into()));
    }
    Ok(CsvSurface {
        axis,
        axis_values,
        times,
        concurrence,
        provenance,
    })
}
