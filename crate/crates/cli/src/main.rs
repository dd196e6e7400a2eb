use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;
use cvm_cli::error::EXIT_FLAGS;
use cvm_cli::Cli;
use tracing_subscriber::EnvFilter;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(EXIT_FLAGS),
            };
        }
    };
    tracing_subscriber::fmt()
        .with_env_filter(
            EnvFilter::try_from_env("CVM_LOG").unwrap_or_else(|_| EnvFilter::new("warn,cvm_cli=info,cvm_survey=info")),
        )
        .with_writer(std::io::stderr)
        .init();
    match cvm_cli::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
