//! `qpurify` command-line tool.
//!
//! Exit codes: 0 success, 2 usage or parameter error, 3 I/O or file format
//! error, 4 numerical validation failure.

mod args;
mod commands;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};

/// Failure of a subcommand.
#[derive(Debug)]
pub enum Failure {
    Core(qpurify::Error),
    /// The computation finished but a validation check did not pass.
    Validation(String),
}

impl From<qpurify::Error> for Failure {
    fn from(e: qpurify::Error) -> Self {
        Failure::Core(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Core(e.into())
    }
}

impl Failure {
    fn exit_code(&self) -> u8 {
        use qpurify::Error::*;
        match self {
            Failure::Core(Config(_)) | Failure::Core(OutOfHorizon { .. }) => 2,
            Failure::Core(Io(_)) | Failure::Core(Parse { .. }) => 3,
            Failure::Core(_) | Failure::Validation(_) => 4,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Core(e) => write!(f, "{e}"),
            Failure::Validation(msg) => write!(f, "validation failed: {msg}"),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .expect("global thread pool is configured once");
    }
    let result = match &cli.command {
        Command::Solve(a) => commands::solve(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Validate(a) => commands::validate(a),
        Command::ErrorAnalysis(a) => commands::error_analysis(a),
        Command::Compare(a) => commands::compare(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
