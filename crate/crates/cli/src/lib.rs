//! Library side of the `cvm` binary, kept separate so tests can drive the
//! commands without spawning a process.

pub mod args;
pub mod commands;
pub mod error;
pub mod report;

use std::io::Write;

pub use args::{Cli, Command};
pub use error::{CliError, Result};
pub use report::ReportBundle;

fn emit(text: &str) -> Result<()> {
    let mut out = std::io::stdout().lock();
    out.write_all(text.as_bytes())
        .and_then(|_| out.flush())
        .map_err(|source| CliError::Output {
            path: "stdout".into(),
            source,
        })
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Estimate(a) => {
            let report = commands::estimate(&a)?;
            if let Some(path) = &a.out {
                commands::write_file(path, report.to_json().as_bytes())?;
            }
            emit(&report::render_table(&report))
        }
        Command::AggregateValue(a) => {
            let v = commands::aggregate(&a)?;
            if a.json {
                emit(&format!("{}\n", serde_json::to_string_pretty(&v).expect("serializes")))
            } else {
                emit(&commands::render_aggregate(&v))
            }
        }
        Command::Simulate(a) => {
            let csv = commands::simulate(&a)?;
            match &a.out {
                Some(path) => {
                    commands::write_file(path, csv.as_bytes())?;
                    eprintln!("wrote {} respondents to {}", a.n, path.display());
                    Ok(())
                }
                None => emit(&csv),
            }
        }
        Command::DesignBids(a) => emit(&commands::design(&a)?),
        Command::Serve(a) => commands::serve(&a),
    }
}
