use std::process::ExitCode;

use clap::Parser;
use ldslab_cli::error::CliError;
use ldslab_cli::{configure_threads, run, Cli};

fn fail(err: &CliError) -> ExitCode {
    eprintln!("error: {err}");
    eprintln!("{}", err.machine_line());
    ExitCode::from(err.kind.code() as u8)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            eprintln!("{}", CliError::usage("").machine_line());
            return ExitCode::from(2);
        }
    };
    if let Err(e) = configure_threads(std::env::var("LDSLAB_THREADS").ok().as_deref()) {
        return fail(&e);
    }
    match run(cli.command) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => fail(&e),
    }
}
