//! `crawl`: generate gadget datasets, train and evaluate walk-CNN models,
//! run ablations, compare feature distributions and audit gradients.

mod args;
mod commands;
mod config;
mod manifest;

use std::process::ExitCode;

use clap::Parser;
use crawl_core::Error;

/// Exit status for an error: 2 numerical fault, 3 resource limit, 1 for
/// everything else (bad input, configuration, I/O).
fn exit_code(e: &anyhow::Error) -> u8 {
    match e.chain().find_map(|c| c.downcast_ref::<Error>()) {
        Some(Error::Numerical { .. }) => 2,
        Some(Error::Resource(_)) => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = match args::Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
