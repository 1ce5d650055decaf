//! Command-line front end: scenario configs in, CSV tables, SVG plots and a
//! run manifest out.

pub mod args;
pub mod commands;
pub mod config;
pub mod error;
pub mod plot;

use std::ffi::OsString;

use clap::Parser;

use crate::args::{Cli, Command};
pub use crate::error::{CliError, CliResult};

/// Parse the command line without exiting the process.
pub fn parse_args<I, T>(args: I) -> Result<Cli, clap::Error>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    Cli::try_parse_from(args)
}

pub fn execute(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Dist(a) => commands::run_dist(a),
        Command::Roc(a) => commands::run_roc(a),
        Command::Sweep(a) => commands::run_sweep(a),
        Command::Validate(a) => commands::run_validate(a),
        Command::Gx2(a) => commands::run_gx2(a, &mut std::io::stdout().lock()),
    }
}

/// Run with the given arguments and return the process exit code: 0 on
/// success, 1 for invalid input, 2 for numerical failure.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match parse_args(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.code
        }
    }
}
