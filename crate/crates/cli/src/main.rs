mod args;
mod commands;
mod config;
mod io;

use std::process::ExitCode;

use clap::{CommandFactory, Parser};

use args::{Cli, Command};

fn main() -> ExitCode {
    let cli_def = Cli::command();
    let defines = |command: &str, key: &str| {
        cli_def.find_subcommand(command).is_some_and(|c| c.get_arguments().any(|a| a.get_long() == Some(key)))
    };
    let argv = match config::expand_args(std::env::args_os().collect(), defines) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    };
    let cli = Cli::try_parse_from(argv).unwrap_or_else(|e| e.exit());
    let result = match &cli.command {
        Command::Simulate(a) => commands::simulate(a),
        Command::Fit(a) => commands::fit(a),
        Command::Diagnose(a) => commands::diagnose(a),
        Command::Score(a) => commands::score(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {} failed: {e}", cli.command.name());
            ExitCode::FAILURE
        }
    }
}
