use std::process::ExitCode;

use clap::Parser;
use vblab::Cli;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match vblab::run(&cli) {
        Ok(paths) => {
            for p in paths {
                println!("wrote {}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
