#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod args;
mod commands;
mod config;
mod format;

use std::fs;
use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use rankcontest::ContestError;

use args::{Cli, Command};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Contest(#[from] ContestError),
    #[error("Usage: {0}")]
    Usage(String),
    #[error("Io: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Contest(ContestError::NoFeasibleScheme) => 3,
            CliError::Contest(_) | CliError::Usage(_) => 2,
            CliError::Io(_) => 1,
        }
    }
}

fn run(cli: &Cli) -> Result<u8, CliError> {
    let (output, common) = match &cli.command {
        Command::Equilibrium(a) => (commands::equilibrium(a)?, &a.common),
        Command::Metrics(a) => (commands::metrics(a)?, &a.common),
        Command::Optimize(a) => (commands::optimize(a)?, &a.common),
        Command::Sweep(a) => (commands::sweep(a)?, &a.common),
        Command::Simulate(a) => (commands::simulate(a)?, &a.common),
    };
    match &common.out {
        Some(path) => fs::write(path, &output.csv)?,
        None => std::io::stdout().lock().write_all(output.csv.as_bytes())?,
    }
    let strict = matches!(&cli.command, Command::Simulate(a) if a.strict);
    if strict && output.strict_failures > 0 {
        eprintln!(
            "error: {} estimates outside 4 standard errors",
            output.strict_failures
        );
        return Ok(4);
    }
    Ok(0)
}

fn main() -> ExitCode {
    let argv = match config::expand(std::env::args_os().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code());
        }
    };
    let cli = Cli::parse_from(argv);
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
