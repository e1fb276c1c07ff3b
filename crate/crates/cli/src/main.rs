use std::process::ExitCode;

use clap::Parser;
use flowshop_cli::{run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("lbfs: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
