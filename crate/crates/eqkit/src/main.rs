use clap::Parser;
use eqkit::cli::{execute, Cli};
use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(execute(Cli::parse()))
}
