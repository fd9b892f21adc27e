mod args;
mod commands;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use args::Cli;

/// Exit codes: 0 success, 1 validation or usage error, 2 failed verification.
pub enum Outcome {
    Ok,
    VerificationFailed(String),
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            let rendered = e.to_string();
            let first = rendered.lines().next().unwrap_or("invalid arguments");
            eprintln!(
                "error: usage: {}",
                one_line(first.trim_start_matches("error: "))
            );
            return ExitCode::from(1);
        }
    };
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon_pool(threads) {
            eprintln!("error: usage: {}", one_line(&e));
            return ExitCode::from(1);
        }
    }
    match commands::run(cli) {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::VerificationFailed(msg)) => {
            eprintln!("verification failed: {}", one_line(&msg));
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!(
                "error: {}: {}",
                commands::error_kind(&e),
                one_line(&e.to_string())
            );
            ExitCode::from(1)
        }
    }
}

fn rayon_pool(threads: usize) -> Result<(), String> {
    if threads == 0 {
        return Err("--threads must be positive".into());
    }
    maskcov::experiments::set_global_threads(threads).map_err(|e| e.to_string())
}
