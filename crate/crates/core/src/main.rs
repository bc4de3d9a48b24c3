use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use microlocal::cli::{run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = run(&cli);
    let written = match (&cli.out, outcome.code) {
        // errors always go to stderr
        (_, 2) => {
            eprintln!("{}", outcome.output.trim_end());
            Ok(())
        }
        (Some(path), _) => std::fs::write(path, &outcome.output),
        (None, _) => std::io::stdout().write_all(outcome.output.as_bytes()),
    };
    if let Err(e) = written {
        eprintln!("error: cannot write output: {e}");
        return ExitCode::from(2);
    }
    ExitCode::from(outcome.code as u8)
}
