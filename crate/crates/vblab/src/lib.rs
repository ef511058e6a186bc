//! Command-line harness around `vblab-core`: dataset simulation, fits,
//! diagnostics, normality checks and sweeps with JSON/CSV reports.

pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod io;
pub mod json;
pub mod report;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::Parser;

pub use cli::{Cli, Command};
pub use config::ExperimentConfig;
pub use error::{CliError, Result};

/// Executes a parsed command line and returns the files written.
pub fn run(cli: &Cli) -> Result<Vec<PathBuf>> {
    match &cli.command {
        Command::Simulate(common) => commands::simulate(&ExperimentConfig::resolve(common)?),
        Command::Fit { common, data } => {
            commands::fit(&ExperimentConfig::resolve(common)?, data, common.timing)
        }
        Command::Diagnose { common, data, mc } => {
            commands::diagnose(&ExperimentConfig::resolve(common)?, data, mc, common.timing)
        }
        Command::Normality { common, grid } => {
            commands::normality(&ExperimentConfig::resolve(common)?, grid, common.timing)
        }
        Command::Sweep(common) => commands::sweep(
            &ExperimentConfig::resolve(common)?,
            common.jobs,
            common.timing,
        ),
    }
}

/// Parses and runs `args` (including the program name). Clap usage errors
/// map to the configuration class.
pub fn run_args<I, T>(args: I) -> Result<Vec<PathBuf>>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli =
        Cli::try_parse_from(args).map_err(|e| CliError::config("arguments", e.to_string()))?;
    run(&cli)
}
