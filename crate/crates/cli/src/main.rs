// SPDX-License-Identifier: Apache-2.0

//! `nsr`: run the solvers, sweeps, oracle comparisons, NV ensembles and plots.
//!
//! Exit codes: 0 ok, 2 config error, 3 integration failure, 4 invariant abort.

mod args;
mod commands;
mod config;

use std::process::ExitCode;

use clap::Parser;
use nuclear_sr::Error;

pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Invariant { .. } => 4,
        Error::Integration(_) | Error::ClosureGap(_) | Error::UndefinedRatio => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = match args::Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
