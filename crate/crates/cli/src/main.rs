//! `fridge` command-line interface.
//!
//! Exit status: 0 on success, 2 for invalid input or configuration,
//! 3 when a solver fails.

mod args;
mod commands;

use std::process::ExitCode;

use clap::Parser;
use fridge::FridgeError;

use crate::args::Cli;

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<FridgeError>() {
        Some(e) if !e.is_validation() => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Some(threads) = cli.common.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            log::warn!("could not size the thread pool: {e}");
        }
    }
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            log::error!("{err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
