use std::process::ExitCode;

use binsos::cli::{main_with, Cli};
use clap::Parser;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { binsos::Exit::Usage.code() } else { 0 });
        }
    };
    ExitCode::from(main_with(cli).code())
}
