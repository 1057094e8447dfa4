//! `critscale`: geometric entanglement sweeps for free chains.
//!
//! Exit codes: 0 success, 1 output not writable, 2 configuration error,
//! 3 non-convergence, 4 fit failure, 5 oracle mismatch.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{RunArgs, RunConfig, DEFAULT_GRID};

#[derive(Parser)]
#[command(name = "critscale", version, about = "Geometric entanglement of critical free chains split into equal blocks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one (model, N, ell) point and print a JSON document
    Compute {
        #[command(flatten)]
        run: RunArgs,
        /// Include wall-clock time (makes output run-dependent)
        #[arg(long)]
        timing: bool,
    },
    /// Sweep block sizes and write a CSV table
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// Also write a gnuplot script for the delta-density curve
        #[arg(long = "plot-script")]
        plot_script: Option<PathBuf>,
    },
    /// Fit kappa_nu(ell) = kappa* + A(nu) ell^-rho to a sweep CSV
    Fit {
        csv: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare two-block solver results with bipartite oracles
    OracleCheck {
        #[command(flatten)]
        run: RunArgs,
    },
}

fn run(cli: Cli) -> Result<i32, commands::Failure> {
    match cli.command {
        Command::Compute { run, timing } => commands::compute(&RunConfig::resolve(&run, None)?, timing),
        Command::Sweep { run, plot_script } => {
            commands::sweep(&RunConfig::resolve(&run, Some(DEFAULT_GRID))?, plot_script.as_deref())
        }
        Command::Fit { csv, out } => commands::fit(&csv, out.as_ref()),
        Command::OracleCheck { run } => commands::oracle_check(&RunConfig::resolve(&run, None)?),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { commands::EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(failure) => {
            eprintln!("{}", failure.message);
            ExitCode::from(failure.code as u8)
        }
    }
}
