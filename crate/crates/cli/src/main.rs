use std::process::ExitCode;

use clap::Parser;
use tilted_cli::cli::{run, Args};

fn main() -> ExitCode {
    ExitCode::from(run(&Args::parse()))
}
