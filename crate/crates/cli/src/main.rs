// SPDX-License-Identifier: MIT OR Apache-2.0

//! `lrsm`: simulate, detect and bound change-points in count time series.
//!
//! Exit status: 0 success, 2 input error, 3 infeasible parameters,
//! 4 numerical failure.

mod args;
mod commands;
mod config;
mod error;
mod io;
mod report;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};
use config::{merge, ConfigFile};
use error::CliError;

fn run(cli: Cli) -> Result<(), CliError> {
    let file = match &cli.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    if let Some(threads) = cli.threads.or(file.threads) {
        if threads == 0 {
            return Err(CliError::Infeasible("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Input(e.to_string()))?;
    }
    match cli.command {
        Command::Simulate(a) => commands::simulate(merge(a, file.simulate)?),
        Command::Detect(a) => commands::detect(merge(a, file.detect)?),
        Command::Ci(a) => commands::ci(merge(a, file.ci)?),
        Command::Bench(a) => commands::bench(merge(a, file.bench)?),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
