//! `fairjudge` — trust scoring on bipartite rating networks.
//!
//! Subcommands cover the whole pipeline: behavioral prior computation
//! (`priors`), single-run scoring (`score`), grid-averaged scoring
//! (`ensemble`), supervised feature export (`features`), ranking metrics
//! and reports (`eval`), synthetic network generation with optional
//! planted fraud (`gen`), and the scaling benchmark (`bench`).
//!
//! Data goes to files or standard output; progress and diagnostics go to
//! standard error. Exit codes: 0 success, 1 usage error, 2 data error,
//! 3 solver non-convergence.

mod commands;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use commands::{Cli, CliError};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprint!("{e}");
            return ExitCode::from(1);
        }
    };
    match commands::dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(match err {
                CliError::Usage(_) => 1,
                CliError::Data(_) => 2,
                CliError::NonConvergence(_) => 3,
            })
        }
    }
}
