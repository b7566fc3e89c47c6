use std::path::PathBuf;

use thiserror::Error;

use crate::grid::SimState;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// One or more configuration invariants failed. Every failure is listed.
    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Validation(Vec<String>),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("{0}")]
    InvalidArgument(String),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("non-finite value in {field} at cell {index}")]
    NonFinite { field: &'static str, index: usize },

    #[error("{field} violates nonnegativity: minimum {min:e} below -{tol:e}")]
    Negative { field: &'static str, min: f64, tol: f64 },

    #[error("velocity is not divergence-free: max |div u| = {max_div:e}")]
    NotDivergenceFree { max_div: f64 },

    #[error("explicit viscous step unstable: dt = {dt:e} exceeds limit {limit:e}")]
    CflViolation { dt: f64, limit: f64 },

    #[error("Poisson right-hand side incompatible with Neumann data: mean {mean:e}")]
    Incompatible { mean: f64 },

    #[error("Poisson solver did not converge in {iterations} iterations (residual {residual:e}, target {target:e})")]
    NotConverged {
        iterations: usize,
        residual: f64,
        target: f64,
    },

    /// Time step collapsed or density exploded; carries the last accepted state.
    #[error("blow-up at t = {t}: dt = {dt:e}, max n = {n_max:e}")]
    BlowUp {
        t: f64,
        dt: f64,
        n_max: f64,
        state: Box<SimState>,
    },

    /// A step postcondition failed; carries the state the step started from.
    #[error("step postcondition violated at t = {t}: {what}")]
    Postcondition {
        t: f64,
        what: String,
        state: Box<SimState>,
    },

    #[error("snapshot error: {0}")]
    Snapshot(String),

    #[error("unsupported snapshot version {found} (expected {expected})")]
    UnsupportedVersion { found: u32, expected: u32 },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Validation(_) | Error::Parse { .. } | Error::InvalidArgument(_) => 2,
            Error::BlowUp { .. } | Error::Postcondition { .. } => 3,
            Error::Io { .. }
            | Error::Snapshot(_)
            | Error::UnsupportedVersion { .. } => 4,
            _ => 1,
        }
    }
}
