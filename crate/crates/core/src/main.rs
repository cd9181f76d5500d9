use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use tavis::harness::config::{apply_config, single_point};
use tavis::harness::{
    acceptance, apply_setting, critical_nbar, figure_preset, load_config, run_sweep, write_csv, write_csv_to,
    SurfaceResult, SweepAxis, SweepSpec, DEFAULT_THRESHOLD,
};
use tavis::{Error, Result};

/// Two atoms in a thermal cavity: concurrence surfaces and acceptance checks.
#[derive(Parser)]
#[command(name = "tavis", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve one parameter point and write its concurrence curve.
    Evolve(Common),
    /// Sweep nbar or gamma and write the concurrence surface.
    Sweep {
        #[arg(long)]
        axis: Option<String>,
        #[arg(long)]
        min: Option<String>,
        #[arg(long)]
        max: Option<String>,
        #[arg(long)]
        count: Option<String>,
        /// Peak concurrence below which entanglement counts as gone.
        #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
        threshold: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Run a named preset (fig1a, fig1b, fig2, fig3, fig4).
    Figure {
        name: String,
        #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
        threshold: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Run the acceptance criteria; exits nonzero if any fails.
    Check {
        /// Run only these criteria (1-10).
        #[arg(long = "criterion", value_parser = clap::value_parser!(u8).range(1..=10))]
        criteria: Vec<u8>,
    },
}

#[derive(Args)]
struct Common {
    /// key = value file applied before the flags.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    g: Option<String>,
    #[arg(long)]
    gamma: Option<String>,
    #[arg(long)]
    nbar: Option<String>,
    #[arg(long)]
    kappa: Option<String>,
    /// ee, eg, ge or gg.
    #[arg(long)]
    initial: Option<String>,
    #[arg(long)]
    tmax: Option<String>,
    /// Number of output intervals on [0, tmax].
    #[arg(long)]
    steps: Option<String>,
    /// auto or a Fock-space size.
    #[arg(long)]
    cutoff: Option<String>,
    /// closed or open.
    #[arg(long)]
    mode: Option<String>,
    /// RK4 step for open runs.
    #[arg(long)]
    step: Option<String>,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn apply(&self, spec: &mut SweepSpec) -> Result<()> {
        if let Some(path) = &self.config {
            apply_config(spec, &load_config(path)?, path)?;
        }
        let flags = [
            ("g", &self.g),
            ("gamma", &self.gamma),
            ("nbar", &self.nbar),
            ("kappa", &self.kappa),
            ("initial", &self.initial),
            ("tmax", &self.tmax),
            ("steps", &self.steps),
            ("cutoff", &self.cutoff),
            ("mode", &self.mode),
            ("step", &self.step),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                apply_setting(spec, key, v)?;
            }
        }
        if let Some(out) = &self.out {
            spec.output = Some(out.clone());
        }
        Ok(())
    }
}

fn emit(spec: &SweepSpec, result: &SurfaceResult) -> Result<()> {
    match &spec.output {
        Some(path) => {
            write_csv(result, path)?;
            eprintln!(
                "wrote {} rows x {} times to {}",
                result.axis_values.len(),
                result.times.len(),
                path.display()
            );
            Ok(())
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            write_csv_to(result, &mut lock)
                .and_then(|_| lock.flush())
                .map_err(|e| Error::io("<stdout>", e))
        }
    }
}

fn report_critical(result: &SurfaceResult, threshold: f64) -> Result<()> {
    if result.axis == SweepAxis::Nbar && result.axis_values.len() > 1 {
        let c = critical_nbar(result, threshold)?;
        let note = if c.non_monotone {
            " (peak concurrence is not monotone in nbar)"
        } else {
            ""
        };
        eprintln!("critical nbar at threshold {threshold:e}: {}{note}", c.value);
    }
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Evolve(common) => {
            let mut spec = SweepSpec::default();
            common.apply(&mut spec)?;
            single_point(&mut spec);
            emit(&spec, &run_sweep(&spec)?)?;
        }
        Command::Sweep {
            axis,
            min,
            max,
            count,
            threshold,
            common,
        } => {
            let mut spec = SweepSpec::default();
            common.apply(&mut spec)?;
            for (key, value) in [("axis", &axis), ("min", &min), ("max", &max), ("count", &count)] {
                if let Some(v) = value {
                    apply_setting(&mut spec, key, v)?;
                }
            }
            let result = run_sweep(&spec)?;
            emit(&spec, &result)?;
            report_critical(&result, threshold)?;
        }
        Command::Figure {
            name,
            threshold,
            common,
        } => {
            let mut spec = figure_preset(&name)?;
            common.apply(&mut spec)?;
            let result = run_sweep(&spec)?;
            emit(&spec, &result)?;
            report_critical(&result, threshold)?;
        }
        Command::Check { criteria } => {
            let ids = if criteria.is_empty() {
                (1..=10).collect()
            } else {
                criteria
            };
            let mut all = true;
            for id in ids {
                let outcome = acceptance::run(id);
                println!("{outcome}");
                all &= outcome.passed;
            }
            return Ok(all);
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
