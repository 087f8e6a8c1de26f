use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use sodbench::{run, Cli, USAGE_EXIT};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { USAGE_EXIT } else { 0 });
        }
    };
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let code = match run(&cli, &mut out) {
        Ok(outcome) => outcome.code(),
        Err(e) => {
            eprintln!("sodbench: {e}");
            USAGE_EXIT
        }
    };
    let _ = out.flush();
    ExitCode::from(code)
}
