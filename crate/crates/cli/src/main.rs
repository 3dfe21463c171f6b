use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use gw_gauss_cli::{execute, Args};

fn main() -> ExitCode {
    let args = Args::parse();
    match execute(&args) {
        Ok((text, code)) => {
            if !text.is_empty() {
                let mut stdout = std::io::stdout().lock();
                if stdout
                    .write_all(text.as_bytes())
                    .and_then(|_| stdout.flush())
                    .is_err()
                {
                    return ExitCode::from(2);
                }
            }
            ExitCode::from(code)
        }
        Err(e) => {
            eprintln!("gw-gauss: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
