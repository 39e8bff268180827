//! `hetgen` command-line driver.
//!
//! Exit status: 0 success, 1 usage error, 2 data or validation error,
//! 3 numerical failure.

mod args;
mod artifact;
mod commands;

use std::fmt;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use args::{Cli, Command};

/// A flag combination the parser accepts but the command rejects.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<UsageError>() {
            return 1;
        }
        if let Some(e) = cause.downcast_ref::<hetgen::Error>() {
            return if e.is_numerical() { 3 } else { 2 };
        }
    }
    2
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::MakeSynthetic(a) => commands::make_synthetic_cmd(&a),
        Command::Split(a) => commands::split_cmd(&a),
        Command::Pools(a) => commands::pools_cmd(&a),
        Command::TrainPhase1(a) => commands::train_phase1_cmd(&a),
        Command::SampleSkeletons(a) => commands::sample_skeletons_cmd(&a),
        Command::TrainPhase2(a) => commands::train_phase2_cmd(&a),
        Command::Generate(a) => commands::generate_cmd(&a),
        Command::Evaluate(a) => commands::evaluate_cmd(&a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
