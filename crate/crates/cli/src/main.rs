//! `selbound`: score-matrix statistics, worst-case enumeration, accuracy
//! sweeps, minimal-accuracy bounds, label-map scoring and the synthetic
//! selection-loop demo.
//!
//! Exit codes: 0 success, 1 usage or input error, 2 no grid point meets the
//! bound criterion, 3 matrix too large for exhaustive enumeration.

mod commands;
mod manifest;

use std::process::ExitCode;

use clap::Parser;

use commands::Command;

#[derive(Debug, Parser)]
#[command(name = "selbound", version, about = "Selection-accuracy analysis for algorithm portfolios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

const EXIT_USAGE: u8 = 1;
const EXIT_GUARD: u8 = 3;

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<selbound::Error>() {
        Some(selbound::Error::EnumerationGuard { .. }) => EXIT_GUARD,
        _ => EXIT_USAGE,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::dispatch(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
