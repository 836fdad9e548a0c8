mod args;
mod commands;
mod error;
mod report;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Convert(a) => commands::convert(a),
        Command::Condense(a) => commands::condense_cmd(a),
        Command::Evaluate(a) => commands::evaluate_cmd(a),
        Command::Bench(a) => commands::bench(a),
        Command::VerifyProps(a) => commands::verify_props(a),
        Command::Report(a) => commands::report(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::debug!("{e:?}");
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
