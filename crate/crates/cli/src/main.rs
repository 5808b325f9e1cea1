//! `lvsk`: leverage scores, orderings, benchmarks and figure data from the
//! command line.
//!
//! Exit codes: 0 on success, 1 on a runtime or numeric failure, 2 on a
//! usage error.

mod args;
mod commands;
mod config;

use std::ffi::OsString;
use std::process::ExitCode;

use clap::{CommandFactory, FromArgMatches};

use args::Cli;
use commands::Failure;

const USAGE_EXIT: u8 = 2;

fn parse(argv: Vec<OsString>) -> Result<Cli, clap::Error> {
    let root = Cli::command();
    let matches = root.clone().try_get_matches_from(&argv)?;
    let Some(path) = config::config_path(&matches) else {
        return Cli::from_arg_matches(&matches);
    };
    let merged = config::merge(&root, &matches, &argv, &path)
        .map_err(|msg| Cli::command().error(clap::error::ErrorKind::ValueValidation, msg))?;
    let matches = Cli::command().try_get_matches_from(merged)?;
    Cli::from_arg_matches(&matches)
}

fn setup(cli: &Cli) -> Result<(), Failure> {
    if let Some(text) = &cli.mem_cap {
        let bytes = lvsk::limits::parse_bytes(text)
            .ok_or_else(|| Failure::Usage(format!("--mem-cap {text:?} is not a byte count")))?;
        lvsk::limits::set_mem_cap(bytes);
    }
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(Failure::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Failure::Runtime(e.to_string()))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match parse(std::env::args_os().collect()) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match setup(&cli).and_then(|_| commands::run(&cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}\n\nFor more information, try '--help'.");
            ExitCode::from(USAGE_EXIT)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
