//! Flat `key = value` configuration, using the same keys as the CLI flags.
//!
//! ```text
//! # fig1a with a longer window
//! axis = nbar
//! min = 0
//! max = 5
//! count = 11
//! gamma = 0.4
//! tmax = 40
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use super::{Grid, SweepSpec};
use crate::error::{Error, Result};

/// Keys understood by [`apply_setting`].
pub const KEYS: [&str; 15] = [
    "g", "gamma", "nbar", "kappa", "initial", "tmax", "steps", "cutoff", "mode", "out", "axis", "min", "max", "count",
    "step",
];

/// One `key = value` line.
#[derive(Clone, Debug, PartialEq)]
pub struct Setting {
    pub key: String,
    pub value: String,
    pub line: usize,
}

/// Splits config text into settings; `#` starts a comment.
pub fn parse_config(text: &str, path: &Path) -> Result<Vec<Setting>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message: format!("expected key = value, got '{line}'"),
        })?;
        let key = key.trim();
        if !KEYS.contains(&key) {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message: format!("unknown key '{key}'"),
            });
        }
        out.push(Setting {
            key: key.to_string(),
            value: value.trim().to_string(),
            line: i + 1,
        });
    }
    Ok(out)
}

pub fn load_config(path: &Path) -> Result<Vec<Setting>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text, path)
}

/// Applies config settings in order, labelling bad values with their line.
pub fn apply_config(spec: &mut SweepSpec, settings: &[Setting], path: &Path) -> Result<()> {
    for s in settings {
        apply_setting(spec, &s.key, &s.value).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: s.line,
            message: e.to_string(),
        })?;
    }
    Ok(())
}

/// Sets one field of `spec` from its textual form.
pub fn apply_setting(spec: &mut SweepSpec, key: &str, value: &str) -> Result<()> {
    fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
        value
            .trim()
            .parse()
            .map_err(|_| Error::Usage(format!("invalid value '{value}' for {key}")))
    }
    match key {
        "g" => spec.g = num(key, value)?,
        "gamma" => spec.gamma = num(key, value)?,
        "nbar" => spec.nbar = num(key, value)?,
        "kappa" => spec.kappa = num(key, value)?,
        "initial" => spec.initial = value.parse()?,
        "tmax" => spec.t_max = num(key, value)?,
        "steps" => spec.steps = num(key, value)?,
        "cutoff" => spec.cutoff = value.parse()?,
        "mode" => spec.mode = value.parse()?,
        "out" => spec.output = Some(PathBuf::from(value.trim())),
        "axis" => spec.axis = value.parse()?,
        "min" => spec.grid.min = num(key, value)?,
        "max" => spec.grid.max = num(key, value)?,
        "count" => spec.grid.count = num(key, value)?,
        "step" => spec.step = Some(num(key, value)?),
        other => return Err(Error::Usage(format!("unknown setting '{other}'"))),
    }
    Ok(())
}

/// Turns a spec into a single-point run at its own `nbar` or `gamma`.
pub fn single_point(spec: &mut SweepSpec) {
    let value = match spec.axis {
        super::SweepAxis::Nbar => spec.nbar,
        super::SweepAxis::Gamma => spec.gamma,
    };
    spec.grid = Grid::point(value);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{Cutoff, Mode, SweepAxis};
    use crate::model::AtomStateLabel;

    #[test]
    fn parses_and_applies() {
        let text = "# comment\naxis = gamma\nmin=0\nmax = 1 # trailing\ncount = 5\n\ninitial = eg\ncutoff = 30\nmode = open\nkappa = 0.2\n";
        let settings = parse_config(text, Path::new("c.cfg")).unwrap();
        assert_eq!(settings.len(), 8);
        let mut spec = SweepSpec::default();
        apply_config(&mut spec, &settings, Path::new("c.cfg")).unwrap();
        assert_eq!(spec.axis, SweepAxis::Gamma);
        assert_eq!(spec.grid, Grid::new(0.0, 1.0, 5));
        assert_eq!(spec.initial, AtomStateLabel::EG);
        assert_eq!(spec.cutoff, Cutoff::Fixed(30));
        assert_eq!((spec.mode, spec.kappa), (Mode::Open, 0.2));
    }

    #[test]
    fn errors_carry_line_numbers() {
        match parse_config("g = 1\nbogus = 3\n", Path::new("c.cfg")) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        assert!(parse_config("just words\n", Path::new("c.cfg")).is_err());

        let settings = parse_config("g = 1\ngamma = lots\n", Path::new("c.cfg")).unwrap();
        match apply_config(&mut SweepSpec::default(), &settings, Path::new("c.cfg")) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn later_settings_win() {
        let mut spec = SweepSpec::default();
        apply_setting(&mut spec, "gamma", "0.1").unwrap();
        apply_setting(&mut spec, "gamma", "0.9").unwrap();
        assert_eq!(spec.gamma, 0.9);
    }
}
