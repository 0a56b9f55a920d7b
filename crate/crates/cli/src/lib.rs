//! Command-line front end: configuration, experiment orchestration and CSV output.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use commands::run;
pub use config::{Overrides, RunConfig, RunSection};
pub use error::{CliError, CliResult};
