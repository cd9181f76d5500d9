//! Parameter sweeps, figure presets, CSV output and the acceptance checks.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use rayon::prelude::*;

use crate::dynamics::{default_step, evolve_closed_blocked, evolve_open_with_step, uniform_times, Trajectory};
use crate::error::{Error, Result};
use crate::model::{auto_cutoff, hamiltonian, initial_state, thermal_state, AtomStateLabel, ModelParams};

pub mod acceptance;
pub mod config;
pub mod csv;

pub use config::{apply_setting, load_config, parse_config};
pub use csv::{read_csv, write_csv, write_csv_to, CsvSurface};

/// Max-over-time concurrence below which entanglement counts as gone.
pub const DEFAULT_THRESHOLD: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepAxis {
    Nbar,
    Gamma,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Nbar => "nbar",
            SweepAxis::Gamma => "gamma",
        }
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "nbar" => Ok(SweepAxis::Nbar),
            "gamma" => Ok(SweepAxis::Gamma),
            other => Err(Error::Usage(format!(
                "unknown sweep axis '{other}', expected nbar or gamma"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Closed,
    Open,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Closed => "closed",
            Mode::Open => "open",
        })
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "closed" => Ok(Mode::Closed),
            "open" => Ok(Mode::Open),
            other => Err(Error::Usage(format!("unknown mode '{other}', expected closed or open"))),
        }
    }
}

/// Fock cutoff policy.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Cutoff {
    /// Smallest cutoff meeting the thermal tail limit, per row.
    Auto,
    Fixed(usize),
}

impl fmt::Display for Cutoff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cutoff::Auto => f.write_str("auto"),
            Cutoff::Fixed(n) => write!(f, "{n}"),
        }
    }
}

impl FromStr for Cutoff {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "auto" => Ok(Cutoff::Auto),
            other => other
                .parse()
                .map(Cutoff::Fixed)
                .map_err(|_| Error::Usage(format!("cutoff must be 'auto' or a positive integer, got '{other}'"))),
        }
    }
}

/// Evenly spaced axis values; a single point sits at `min`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl Grid {
    pub fn new(min: f64, max: f64, count: usize) -> Self {
        Grid { min, max, count }
    }

    pub fn point(value: f64) -> Self {
        Grid::new(value, value, 1)
    }

    pub fn values(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.min];
        }
        let span = self.max - self.min;
        let last = (self.count - 1) as f64;
        (0..self.count).map(|i| self.min + span * i as f64 / last).collect()
    }
}

/// One axis sweep with everything else held fixed.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub grid: Grid,
    pub g: f64,
    pub gamma: f64,
    pub nbar: f64,
    pub kappa: f64,
    pub initial: AtomStateLabel,
    pub mode: Mode,
    pub cutoff: Cutoff,
    pub t_max: f64,
    pub steps: usize,
    /// RK4 step for open runs; `None` picks [`default_step`] per row.
    pub step: Option<f64>,
    pub output: Option<PathBuf>,
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec {
            axis: SweepAxis::Nbar,
            grid: Grid::point(0.0),
            g: 1.0,
            gamma: 0.4,
            nbar: 0.0,
            kappa: 0.0,
            initial: AtomStateLabel::EE,
            mode: Mode::Closed,
            cutoff: Cutoff::Auto,
            t_max: 25.0,
            steps: 500,
            step: None,
            output: None,
        }
    }
}

impl SweepSpec {
    /// Checks the spec and applies the mode rules: closed runs drop `kappa`
    /// to zero, open runs need `kappa > 0`.
    pub fn validated(&self) -> Result<SweepSpec> {
        let mut spec = self.clone();
        let Grid { min, max, count } = spec.grid;
        if count == 0 {
            return Err(Error::InvalidParameter("sweep grid needs at least one point".into()));
        }
        if !(min.is_finite() && max.is_finite()) || min > max {
            return Err(Error::InvalidParameter(format!(
                "sweep grid needs min <= max, got [{min}, {max}]"
            )));
        }
        if !(spec.t_max.is_finite() && spec.t_max > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "tmax must be positive, got {}",
                spec.t_max
            )));
        }
        if spec.steps == 0 {
            return Err(Error::InvalidParameter("steps must be at least 1".into()));
        }
        if let Cutoff::Fixed(n) = spec.cutoff {
            if n < 2 {
                return Err(Error::InvalidParameter(format!(
                    "Fock cutoff must be at least 2, got {n}"
                )));
            }
        }
        if let Some(h) = spec.step {
            if !(h.is_finite() && h > 0.0) {
                return Err(Error::InvalidParameter(format!("step must be positive, got {h}")));
            }
        }
        match spec.mode {
            Mode::Closed => spec.kappa = 0.0,
            Mode::Open if spec.kappa.is_nan() || spec.kappa <= 0.0 => {
                return Err(Error::InvalidParameter(format!(
                    "open mode requires kappa > 0, got {}",
                    spec.kappa
                )))
            }
            Mode::Open => {}
        }
        for value in spec.grid.values() {
            spec.params_at(value, 2)?;
        }
        Ok(spec)
    }

    pub fn times(&self) -> Vec<f64> {
        uniform_times(self.t_max, self.steps)
    }

    /// Model parameters for the row at `value` with the given cutoff.
    pub fn params_at(&self, value: f64, cutoff: usize) -> Result<ModelParams> {
        let (gamma, nbar) = match self.axis {
            SweepAxis::Nbar => (self.gamma, value),
            SweepAxis::Gamma => (value, self.nbar),
        };
        ModelParams::new(self.g, gamma, nbar, self.kappa, cutoff)
    }

    pub fn cutoff_at(&self, value: f64) -> usize {
        let nbar = match self.axis {
            SweepAxis::Nbar => value,
            SweepAxis::Gamma => self.nbar,
        };
        match self.cutoff {
            Cutoff::Auto => auto_cutoff(nbar, &self.initial),
            Cutoff::Fixed(n) => n,
        }
    }

    /// Key/value description of every setting, as written into CSV headers.
    pub fn provenance(&self) -> Vec<(String, String)> {
        let mut out = vec![
            ("version".to_string(), env!("CARGO_PKG_VERSION").to_string()),
            ("axis".to_string(), self.axis.to_string()),
            ("min".to_string(), self.grid.min.to_string()),
            ("max".to_string(), self.grid.max.to_string()),
            ("count".to_string(), self.grid.count.to_string()),
            ("g".to_string(), self.g.to_string()),
        ];
        match self.axis {
            SweepAxis::Nbar => out.push(("gamma".to_string(), self.gamma.to_string())),
            SweepAxis::Gamma => out.push(("nbar".to_string(), self.nbar.to_string())),
        }
        out.extend([
            ("kappa".to_string(), self.kappa.to_string()),
            ("initial".to_string(), self.initial.to_string()),
            ("mode".to_string(), self.mode.to_string()),
            ("cutoff".to_string(), self.cutoff.to_string()),
            ("tmax".to_string(), self.t_max.to_string()),
            ("steps".to_string(), self.steps.to_string()),
        ]);
        out
    }
}

/// Per-row bookkeeping of a sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct RowDiagnostics {
    pub axis_value: f64,
    pub cutoff: usize,
    /// RK4 step actually used; `None` for closed rows.
    pub step: Option<f64>,
    pub worst_trace_error: f64,
    pub worst_min_eigenvalue: f64,
    pub worst_excitation_drift: Option<f64>,
    pub repaired_states: usize,
}

/// One evolution at a single axis value.
#[derive(Clone, Debug)]
pub struct PointRun {
    pub params: ModelParams,
    pub trajectory: Trajectory,
    pub diagnostics: RowDiagnostics,
}

/// Evolves the row of `spec` at `value` without wrapping errors.
pub fn evolve_point(spec: &SweepSpec, value: f64) -> Result<PointRun> {
    let cutoff = spec.cutoff_at(value);
    let params = spec.params_at(value, cutoff)?;
    let rho0 = initial_state(&spec.initial, &thermal_state(params.nbar, cutoff)?)?;
    let times = spec.times();
    let (trajectory, step) = match spec.mode {
        Mode::Closed => (evolve_closed_blocked(&rho0, &hamiltonian(&params)?, &times)?, None),
        Mode::Open => {
            let h = spec.step.unwrap_or_else(|| default_step(&params));
            (evolve_open_with_step(&rho0, &params, &times, h)?, Some(h))
        }
    };
    let diagnostics = RowDiagnostics {
        axis_value: value,
        cutoff,
        step,
        worst_trace_error: trajectory.worst_trace_error(),
        worst_min_eigenvalue: trajectory.worst_min_eigenvalue(),
        worst_excitation_drift: trajectory.worst_excitation_drift(),
        repaired_states: trajectory.diagnostics.iter().filter(|d| d.repaired).count(),
    };
    Ok(PointRun {
        params,
        trajectory,
        diagnostics,
    })
}

/// Concurrence over `(axis value, t)` plus what produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct SurfaceResult {
    pub axis: SweepAxis,
    pub axis_values: Vec<f64>,
    pub times: Vec<f64>,
    /// `concurrence[row][time]`
    pub concurrence: Vec<Vec<f64>>,
    pub rows: Vec<RowDiagnostics>,
    pub provenance: Vec<(String, String)>,
}

impl SurfaceResult {
    pub fn row_max(&self) -> Vec<f64> {
        self.concurrence
            .iter()
            .map(|r| r.iter().copied().fold(0.0, f64::max))
            .collect()
    }

    pub fn row(&self, value: f64) -> Option<&[f64]> {
        self.axis_values
            .iter()
            .position(|&v| (v - value).abs() < 1e-12)
            .map(|i| self.concurrence[i].as_slice())
    }
}

/// Runs every row of `spec` in parallel and merges them in grid order.
pub fn run_sweep(spec: &SweepSpec) -> Result<SurfaceResult> {
    sweep_with(spec, true)
}

/// [`run_sweep`] on the calling thread only.
pub fn run_sweep_serial(spec: &SweepSpec) -> Result<SurfaceResult> {
    sweep_with(spec, false)
}

fn sweep_with(spec: &SweepSpec, parallel: bool) -> Result<SurfaceResult> {
    let spec = spec.validated()?;
    let values = spec.grid.values();
    let run = |&v: &f64| {
        evolve_point(&spec, v).map_err(|e| Error::SweepRow {
            axis: spec.axis.name(),
            value: v,
            source: Box::new(e),
        })
    };
    let results: Vec<Result<PointRun>> = if parallel {
        values.par_iter().map(run).collect()
    } else {
        values.iter().map(run).collect()
    };
    let runs = results.into_iter().collect::<Result<Vec<_>>>()?;

    let mut provenance = spec.provenance();
    for (i, r) in runs.iter().enumerate() {
        let d = &r.diagnostics;
        let step = d.step.map_or("none".to_string(), |h| format!("{h:e}"));
        provenance.push((
            format!("row{i}"),
            format!("{}={} cutoff={} step={step}", spec.axis, d.axis_value, d.cutoff),
        ));
    }
    Ok(SurfaceResult {
        axis: spec.axis,
        axis_values: values,
        times: spec.times(),
        concurrence: runs.iter().map(|r| r.trajectory.concurrences.clone()).collect(),
        rows: runs.into_iter().map(|r| r.diagnostics).collect(),
        provenance,
    })
}

/// Named sweeps reproducing the standard concurrence surfaces.
pub fn figure_preset(name: &str) -> Result<SweepSpec> {
    let base = SweepSpec::default();
    let spec = match name {
        "fig1a" => SweepSpec {
            axis: SweepAxis::Nbar,
            grid: Grid::new(0.0, 5.0, 11),
            gamma: 0.4,
            ..base
        },
        "fig1b" => SweepSpec {
            gamma: 0.8,
            ..figure_preset("fig1a")?
        },
        "fig2" => SweepSpec {
            axis: SweepAxis::Gamma,
            grid: Grid::new(0.0, 1.0, 21),
            nbar: 1.0,
            ..base
        },
        "fig3" => SweepSpec {
            initial: AtomStateLabel::EG,
            ..figure_preset("fig2")?
        },
        "fig4" => SweepSpec {
            axis: SweepAxis::Nbar,
            grid: Grid::new(0.0, 6.0, 13),
            gamma: 0.4,
            kappa: 0.4,
            mode: Mode::Open,
            ..base
        },
        other => {
            return Err(Error::Usage(format!(
                "unknown figure '{other}', expected one of {}",
                FIGURES.join(", ")
            )))
        }
    };
    Ok(spec)
}

/// Names accepted by [`figure_preset`].
pub const FIGURES: [&str; 5] = ["fig1a", "fig1b", "fig2", "fig3", "fig4"];

/// Result of [`critical_nbar`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CriticalNbar {
    /// First grid `n̄` whose peak concurrence is below the threshold, or
    /// `+∞` when every row stays above it.
    pub value: f64,
    /// The peak concurrence does not decrease monotonically along the grid.
    pub non_monotone: bool,
}

/// Smallest swept `n̄` at which the peak concurrence over time drops below
/// `threshold`.
pub fn critical_nbar(result: &SurfaceResult, threshold: f64) -> Result<CriticalNbar> {
    if result.axis != SweepAxis::Nbar {
        return Err(Error::InvalidParameter(format!(
            "critical photon number needs an nbar sweep, got a {} sweep",
            result.axis
        )));
    }
    let peaks = result.row_max();
    let value = result
        .axis_values
        .iter()
        .zip(&peaks)
        .find(|(_, &p)| p < threshold)
        .map_or(f64::INFINITY, |(&v, _)| v);
    let non_monotone = peaks.windows(2).any(|w| w[1] > w[0]);
    Ok(CriticalNbar { value, non_monotone })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::evolve_closed;

    #[test]
    fn presets() {
        assert_eq!(figure_preset("fig1a").unwrap().gamma, 0.4);
        assert_eq!(figure_preset("fig1b").unwrap().gamma, 0.8);
        assert_eq!(figure_preset("fig4").unwrap().kappa, 0.4);
        assert_eq!(figure_preset("fig3").unwrap().initial, AtomStateLabel::EG);
        let fig2 = figure_preset("fig2").unwrap();
        assert_eq!((fig2.axis, fig2.nbar, fig2.grid.count), (SweepAxis::Gamma, 1.0, 21));
        for name in FIGURES {
            let spec = figure_preset(name).unwrap();
            assert_eq!((spec.g, spec.t_max, spec.times().len()), (1.0, 25.0, 501));
            spec.validated().unwrap();
        }
        assert!(matches!(figure_preset("fig5"), Err(Error::Usage(_))));
    }

    #[test]
    fn grid_values() {
        assert_eq!(Grid::new(0.0, 5.0, 11).values()[3], 1.5);
        assert_eq!(Grid::point(2.0).values(), vec![2.0]);
        assert_eq!(Grid::new(0.0, 1.0, 21).values()[20], 1.0);
    }

    #[test]
    fn spec_validation() {
        let ok = SweepSpec::default();
        assert!(ok.validated().is_ok());
        let closed = SweepSpec {
            kappa: 0.3,
            ..ok.clone()
        };
        assert_eq!(closed.validated().unwrap().kappa, 0.0);
        let open = SweepSpec {
            mode: Mode::Open,
            ..ok.clone()
        };
        assert!(matches!(open.validated(), Err(Error::InvalidParameter(_))));
        let reversed = SweepSpec {
            grid: Grid::new(2.0, 1.0, 3),
            ..ok.clone()
        };
        assert!(reversed.validated().is_err());
        let empty = SweepSpec {
            grid: Grid::new(0.0, 1.0, 0),
            ..ok.clone()
        };
        assert!(empty.validated().is_err());
        let no_time = SweepSpec {
            t_max: 0.0,
            ..ok.clone()
        };
        assert!(no_time.validated().is_err());
        let bad_gamma = SweepSpec {
            axis: SweepAxis::Gamma,
            grid: Grid::new(0.0, 1.5, 4),
            ..ok
        };
        assert!(bad_gamma.validated().is_err());
    }

    #[test]
    fn single_point_sweep_is_one_closed_trajectory() {
        let spec = SweepSpec {
            grid: Grid::point(0.5),
            t_max: 4.0,
            steps: 40,
            ..SweepSpec::default()
        };
        let surface = run_sweep(&spec).unwrap();
        assert_eq!(surface.concurrence.len(), 1);

        let cutoff = spec.cutoff_at(0.5);
        let params = spec.params_at(0.5, cutoff).unwrap();
        let rho0 = initial_state(&spec.initial, &thermal_state(0.5, cutoff).unwrap()).unwrap();
        let direct = evolve_closed(&rho0, &hamiltonian(&params).unwrap(), &spec.times()).unwrap();
        for (a, b) in surface.concurrence[0].iter().zip(&direct.concurrences) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn row_errors_name_the_axis_value() {
        let spec = SweepSpec {
            grid: Grid::new(0.0, 5.0, 2),
            cutoff: Cutoff::Fixed(10),
            t_max: 1.0,
            steps: 2,
            ..SweepSpec::default()
        };
        match run_sweep(&spec) {
            Err(Error::SweepRow { axis, value, source }) => {
                assert_eq!((axis, value), ("nbar", 5.0));
                assert!(matches!(*source, Error::CutoffTooSmall { .. }));
            }
            other => panic!("expected a row error, got {other:?}"),
        }
    }

    fn surface(values: Vec<f64>, peaks: &[f64]) -> SurfaceResult {
        SurfaceResult {
            axis: SweepAxis::Nbar,
            times: vec![0.0, 1.0],
            concurrence: peaks.iter().map(|&p| vec![0.0, p]).collect(),
            axis_values: values,
            rows: Vec::new(),
            provenance: Vec::new(),
        }
    }

    #[test]
    fn critical_nbar_cases() {
        let zero = surface(vec![0.0, 0.5, 1.0], &[0.0, 0.0, 0.0]);
        assert_eq!(critical_nbar(&zero, DEFAULT_THRESHOLD).unwrap().value, 0.0);

        let falling = surface(vec![0.0, 0.5, 1.0], &[0.5, 0.1, 1e-4]);
        let c = critical_nbar(&falling, DEFAULT_THRESHOLD).unwrap();
        assert_eq!((c.value, c.non_monotone), (1.0, false));

        let never = surface(vec![0.0, 0.5], &[0.5, 0.2]);
        assert_eq!(critical_nbar(&never, DEFAULT_THRESHOLD).unwrap().value, f64::INFINITY);

        let bumpy = surface(vec![0.0, 0.5, 1.0], &[0.5, 0.6, 1e-4]);
        assert!(critical_nbar(&bumpy, DEFAULT_THRESHOLD).unwrap().non_monotone);

        let gamma = SurfaceResult {
            axis: SweepAxis::Gamma,
            ..never
        };
        assert!(critical_nbar(&gamma, DEFAULT_THRESHOLD).is_err());
    }
}
