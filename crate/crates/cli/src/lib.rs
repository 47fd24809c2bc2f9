//! Command-line front end for the delayed-averaging simulator.
//!
//! Every subcommand is a plain function over a resolved configuration, so
//! the binary only parses arguments and maps errors to exit codes.

pub mod app;
pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use app::{run, Cli};
pub use config::{ExperimentConfig, Resolved, OUT_DIR_ENV};
pub use error::{CliError, CliResult};
