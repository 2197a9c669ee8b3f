//! `dissicert` command-line interface.
//!
//! Subcommands:
//!   certify   data CSV + prior + supply rate -> JSON report, exit code by verdict
//!   analyze   Hankel rank profile and complexity estimate of a data CSV
//!   simulate  trajectory CSV from a system file or a seeded random system
//!   verify    model-based dissipativity check of a system file
//!
//! Exit codes: 0 certified/success, 2 not informative, 3 not certified,
//! 4 undecided, 1 usage or I/O error.

mod config;
mod run;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use crate::config::Cli;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().filter_or("DISSICERT_LOG", "warn")).init();

    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };

    match run::run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
