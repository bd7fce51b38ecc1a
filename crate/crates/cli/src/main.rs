use std::process::ExitCode;

use clap::Parser;
use l1euler_cli::dispatch::{dispatch, EXIT_USAGE};
use l1euler_cli::Cli;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match cli.command.resolve() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_USAGE as u8);
        }
    };
    if let Some(n) = cfg.threads.count() {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: threads: {e}");
            return ExitCode::from(EXIT_USAGE as u8);
        }
    }
    ExitCode::from(dispatch(&cfg) as u8)
}
