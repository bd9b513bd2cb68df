//! `divfact`: approximate a positive-definite covariance by a factor model
//! `H H^T + D` under the Gaussian I-divergence.
//!
//! Exit codes: 0 success (fit converged or stopped at an exact model),
//! 1 input error, 2 iteration budget exhausted, 3 numerical breakdown.

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use divfact_cli::{commands, DivergenceArgs, FitArgs, SynthArgs};

#[derive(Parser)]
#[command(
    name = "divfact",
    version,
    about = "Low-rank-plus-diagonal covariance approximation under Gaussian I-divergence"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit H H^T + D to a covariance (or raw observation) file.
    Fit(FitArgs),
    /// Generate a planted synthetic instance.
    Synth(SynthArgs),
    /// Print the I-divergence between two covariance files.
    Divergence(DivergenceArgs),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            let rendered = e.render().to_string();
            let first_line = rendered.lines().next().unwrap_or("invalid arguments");
            eprintln!("{first_line}");
            return ExitCode::from(1);
        }
    };

    let outcome = match &cli.command {
        Command::Fit(args) => commands::cmd_fit(args),
        Command::Synth(args) => commands::cmd_synth(args),
        Command::Divergence(args) => commands::cmd_divergence(&args.a, &args.b),
    };
    match outcome {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {}", err.message);
            ExitCode::from(1)
        }
    }
}
