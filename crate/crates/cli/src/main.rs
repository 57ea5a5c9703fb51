mod args;
mod commands;

use std::process::ExitCode;

use amtl_core::error::Error;
use clap::Parser;

use args::{Cli, Command};

/// 2 for bad input or configuration, 3 for numerical failure, 1 otherwise.
fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(e) if e.is_numerical() => 3,
        Some(Error::Io { .. }) | None => 1,
        Some(_) => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Gen(a) => commands::gen(a),
        Command::Run(a) => commands::run_cmd(a),
        Command::Compare(a) => commands::compare(a),
        Command::Bench(a) => commands::bench(a),
        Command::Selftest => commands::selftest(),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
