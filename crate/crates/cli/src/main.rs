mod args;
mod commands;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use crate::args::Cli;
use crate::commands::Failure;

fn one_line(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();

    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let message = e.to_string();
            let body = message.split("\n\nUsage").next().unwrap_or("");
            eprintln!("error: kind=usage message={}", one_line(body.trim_start_matches("error: ")));
            return ExitCode::from(1);
        }
    };

    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            let (kind, message, code) = match &failure {
                Failure::Usage(msg) => ("usage", msg.clone(), 1),
                Failure::Data(err) => {
                    let code = if matches!(err, wslabel::Error::NotConverged(_)) { 3 } else { 2 };
                    (err.kind(), err.to_string(), code)
                }
            };
            eprintln!("error: kind={kind} message={}", one_line(&message));
            ExitCode::from(code)
        }
    }
}
