use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = pwcrt_cli::Cli::parse();
    match pwcrt_cli::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
