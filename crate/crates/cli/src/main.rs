//! `margin-sparse`: select features, cross-validate, generate synthetic data
//! and check the preservation bounds from the command line. Every command
//! writes JSON tagged with the schema `margin-sparse/1`.

mod args;
mod commands;
mod error;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use args::{Cli, Command};
use error::CliError;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            let err = CliError::usage(e.kind().to_string());
            eprintln!("{}", err.to_json());
            return err.exit_code();
        }
    };
    let result = match &cli.command {
        Command::Select(a) => commands::cmd_select(a),
        Command::Cv(a) => commands::cmd_cv(a),
        Command::Synth(a) => commands::cmd_synth(a),
        Command::Verify(a) => commands::cmd_verify(a),
        Command::FeatureFreq(a) => commands::cmd_feature_freq(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{}", err.to_json());
            err.exit_code()
        }
    }
}
