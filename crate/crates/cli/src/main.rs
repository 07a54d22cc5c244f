use std::io;
use std::process::ExitCode;

use clap::Parser;
use lune_cli::config::Args;

fn main() -> ExitCode {
    let args = Args::parse();
    match args.resolve().and_then(|cfg| lune_cli::run::run(&cfg)) {
        Ok(()) => ExitCode::SUCCESS,
        // reader went away, e.g. `lune ... | head`
        Err(e)
            if e.downcast_ref::<io::Error>()
                .is_some_and(|e| e.kind() == io::ErrorKind::BrokenPipe) =>
        {
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
