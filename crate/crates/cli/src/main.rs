use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use mmcomm_cli::commands;
use mmcomm_cli::config::{Cli, RunConfig};
use mmcomm_cli::error::{exit, CliError, CliResult};

fn execute(cli: &Cli) -> CliResult<Option<CliError>> {
    let cfg = RunConfig::resolve(cli)?;
    let outcome = commands::run(&cfg)?;
    match &cfg.out {
        Some(path) => std::fs::write(path, &outcome.text)?,
        None => std::io::stdout().write_all(outcome.text.as_bytes())?,
    }
    Ok(outcome.failure)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match execute(&cli) {
        Ok(None) => exit::OK,
        Ok(Some(failure)) | Err(failure) => {
            eprintln!("error: {failure}");
            failure.exit_code()
        }
    };
    ExitCode::from(code as u8)
}
