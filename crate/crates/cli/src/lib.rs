//! The `setpar` command-line tool as a library: argument types, configuration
//! files, data ingestion and the subcommands.

pub mod args;
pub mod commands;
pub mod config;
pub mod data;
pub mod error;
pub mod manifest;
pub mod output;

use crate::args::{Cli, Command};
use crate::error::CliResult;

pub fn run(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Simulate(a) => commands::simulate_cmd(a),
        Command::Fit(a) => commands::fit_cmd(a),
        Command::Diagnose(a) => commands::diagnose_cmd(a),
        Command::Forecast(a) => commands::forecast_cmd(a),
        Command::Mc(a) => commands::mc_cmd(a),
    }
}
