//! Experiment harness for `pricing-lab`: configuration, grid execution,
//! CSV output and the bundled verification suites.

pub mod config;
pub mod error;
pub mod format;
pub mod report;
pub mod run;
pub mod verify;

pub use config::{ConfigFile, ExperimentConfig};
pub use error::CliError;
