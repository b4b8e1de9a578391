use std::process::ExitCode;

use clap::Parser;

mod commands;

use commands::{Cli, CliError};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::VerifyFailed(n)) => {
            eprintln!("verify: {n} check(s) failed");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
