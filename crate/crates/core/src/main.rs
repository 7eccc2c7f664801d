use std::io::Write;
use std::process::ExitCode;

use modvar::cli::{run, Outcome};

fn main() -> ExitCode {
    match run(std::env::args().collect()) {
        Ok(Outcome::Text(text)) => {
            // with --output the file already holds the result
            if !std::env::args().any(|a| a == "--output" || a.starts_with("--output=")) {
                let _ = std::io::stdout().write_all(text.as_bytes());
            }
            ExitCode::SUCCESS
        }
        Ok(Outcome::Info(text)) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.line());
            ExitCode::from(2)
        }
    }
}
