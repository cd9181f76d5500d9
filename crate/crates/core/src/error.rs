use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix is not Hermitian (max |A - A^dagger| = {asymmetry:e})")]
    NotHermitian { asymmetry: f64 },

    #[error("Hermitian eigensolver did not converge after {sweeps} sweeps")]
    NoConvergence { sweeps: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("Fock cutoff {cutoff} too small for nbar = {nbar}: discarded thermal mass {tail:e} exceeds {limit:e}; use a cutoff of at least {required}")]
    CutoffTooSmall {
        nbar: f64,
        cutoff: usize,
        tail: f64,
        limit: f64,
        required: usize,
    },

    #[error("step size {step} exceeds the stability bound {bound:e}; use a step of at most {bound:e}")]
    StepTooLarge { step: f64, bound: f64 },

    /// A conserved or bounded quantity left its allowed band during a run.
    #[error("physics invariant violated at t = {time}: {what}")]
    Invariant { time: f64, what: String },

    #[error("sweep row {axis} = {value} failed: {source}")]
    SweepRow {
        axis: &'static str,
        value: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("usage: {0}")]
    Usage(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
}

impl Error {
    /// Process exit code: 1 physics-invariant violation, 2 usage error, 3 I/O error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_)
            | Error::InvalidParameter(_)
            | Error::CutoffTooSmall { .. }
            | Error::StepTooLarge { .. } => 2,
            Error::Io { .. } | Error::Parse { .. } => 3,
            Error::SweepRow { source, .. } => source.exit_code(),
            _ => 1,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
