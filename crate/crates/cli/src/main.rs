//! `trialgen`: generalize a randomized trial's effect to a target
//! population and report how omitted effect modifiers could move it.
//!
//! Exit codes: 0 on success, 2 for invalid input or flags, 3 when the
//! numerical machinery fails on valid input.

mod args;
mod commands;
mod error;
mod io;

use std::process::ExitCode;

use clap::Parser;

use crate::args::{Cli, Command};
use crate::error::CliError;

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("cannot start thread pool: {e}")))?;
    }
    match cli.command {
        Command::Analyze(a) => commands::analyze::run(&a),
        Command::Simulate(a) => commands::simulate::run(&a),
        Command::Benchmark(a) => commands::benchmark::run(&a),
        Command::Contour(a) => commands::contour::run(&a),
        Command::Generate(a) => commands::generate::run(&a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.kind());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
