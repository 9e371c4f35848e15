mod args;
mod commands;
mod manifest;
mod render;

use std::process::ExitCode;

use clap::Parser;
use trihelix::ErrorCategory;

use crate::args::{Cli, Command};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] trihelix::Error),
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Core(e) => match e.category() {
                ErrorCategory::Validation => 1,
                ErrorCategory::Io => 2,
                ErrorCategory::Degenerate => 3,
            },
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match &cli.command {
        Command::Compute(a) => commands::compute(a),
        Command::Decompose(a) => commands::decompose_cmd(a),
        Command::Panel(a) => commands::panel(a),
        Command::Synth(a) => commands::synth(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("trihelix: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
