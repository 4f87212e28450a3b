use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    match uai::cli::run(uai::cli::Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
