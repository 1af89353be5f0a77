//! `tsgps`: synthesize or load expression cohorts, screen discriminative gene
//! pairs, train the teacher, distill students, and evaluate or score
//! checkpoints. Exit status is 0 on success, 2 for configuration errors, 3
//! for data errors and 4 for runtime failures.

mod args;
mod commands;
mod config;

use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = args::Cli::parse();
    let result = cli.resolve().and_then(|cfg| commands::run(&cli.command, &cfg));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(args::exit_code(&e))
        }
    }
}
