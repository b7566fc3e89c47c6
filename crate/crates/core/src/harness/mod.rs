//! Configuration, persistence and convergence studies.

pub mod config;
pub mod initial;
pub mod snapshot;
pub mod study;

pub use config::{ConfigFile, SimConfig};
pub use snapshot::{read_snapshot, write_snapshot};
pub use study::{epsilon_study, refinement_study, ConvergenceTable};
