use std::process::ExitCode;

use clap::Parser;
use strassen_lab::cli::{run, Cli};
use strassen_lab::Error;

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = std::env::var("STRASSEN_LAB_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
    {
        // Only fails if a pool already exists, which cannot happen this early.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads.max(1))
            .build_global();
    }
    match run(cli) {
        Ok(out) => {
            for w in &out.warnings {
                eprintln!("warning: {w}");
            }
            match out.path {
                Some(p) => {
                    if let Err(e) = std::fs::write(&p, out.text) {
                        eprintln!("error: {}: {e}", p.display());
                        return ExitCode::from(2);
                    }
                }
                None => print!("{}", out.text),
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::SizeGuard(_) => 3,
                _ => 2,
            })
        }
    }
}
