//! `ubmat`: batch toolkit for uniform-block matrix work.
//!
//! Subcommands: `ops` (coordinate algebra), `estimate` (coordinates from
//! data), `test1` / `testm` (mean tests), `simulate` (Monte Carlo studies),
//! `bench` (coordinate vs dense timings).
//!
//! Exit codes: 0 completed; 2 rejected the null at the given level (only
//! with `--exit-on-reject`); 3 any error.

mod commands;
mod output;

use std::process::ExitCode;

use clap::Parser;

use commands::{Cli, Outcome};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Clap would exit with 2, which the contract reserves for
            // rejected nulls; print its message and use the error code.
            let _ = e.print();
            return ExitCode::from(3);
        }
    };
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(3);
        }
    }
    match commands::run(cli) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::RejectedNull) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
    }
}
