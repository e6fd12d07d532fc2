//! `efnet`: dataset building, training, ensemble fitting, evaluation and
//! reporting for the desk-scale pneumonia classifier pipeline.

mod args;
mod commands;
mod config;
mod output;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};

/// Exit status for a run that stopped on a non-finite loss or parameter.
const EXIT_DIVERGED: u8 = 3;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let argv = match config::expand_args(std::env::args_os().collect()) {
        Ok(argv) => argv,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::FAILURE;
        }
    };
    let cli = Cli::parse_from(argv);
    let result = match &cli.command {
        Command::DatasetBuild(a) => commands::dataset::run(&cli, a),
        Command::Train(a) => commands::train::run(&cli, a),
        Command::Ensemble(a) => commands::ensemble::run(&cli, a),
        Command::Eval(a) => commands::eval::run(&cli, a),
        Command::Report(a) => commands::report::run(&cli, a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if diverged(&e) {
                ExitCode::from(EXIT_DIVERGED)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}

fn diverged(e: &anyhow::Error) -> bool {
    e.chain().any(|c| {
        matches!(
            c.downcast_ref::<efnet_core::Error>(),
            Some(efnet_core::Error::Diverged { .. } | efnet_core::Error::NonFinite { .. })
        )
    })
}
