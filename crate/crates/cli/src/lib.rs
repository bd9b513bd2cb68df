//! File formats, run manifests and subcommand implementations behind the
//! `divfact` binary. Kept as a library so the integration suites can drive
//! the same readers and writers the binary uses.

pub mod commands;
pub mod jsonfile;
pub mod matfile;

use std::path::PathBuf;

use clap::{Args, ValueEnum};

/// Input or usage problem; maps to exit code 1 with a one-line diagnostic.
#[derive(Debug)]
pub struct CliError {
    pub message: String,
}

impl CliError {
    pub fn input(message: String) -> Self {
        CliError { message }
    }
}

#[derive(Copy, Clone, Debug, ValueEnum)]
pub enum VariantArg {
    Alg1,
    Alg2,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
pub enum InitArg {
    Pca,
    Random,
    File,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
pub enum OnOff {
    On,
    Off,
}

#[derive(Args)]
pub struct FitArgs {
    /// Covariance CSV (or raw m x n observations with --data).
    #[arg(long)]
    pub input: PathBuf,
    /// Number of factors (1 <= k < n).
    #[arg(long)]
    pub k: usize,
    #[arg(long, value_enum, default_value_t = VariantArg::Alg1)]
    pub variant: VariantArg,
    #[arg(long, value_enum, default_value_t = InitArg::Pca)]
    pub init: InitArg,
    /// Model JSON for --init file.
    #[arg(long)]
    pub init_file: Option<PathBuf>,
    /// Seed for --init random (also echoed into the manifest).
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 10_000)]
    pub max_iter: usize,
    /// Objective-decrement stopping tolerance.
    #[arg(long, default_value_t = 1e-12)]
    pub tol_decrement: f64,
    /// Fixed-point residual stopping tolerance.
    #[arg(long, default_value_t = 1e-9)]
    pub tol_fixed_point: f64,
    /// Noise floor, relative to the largest diagonal entry of the input.
    #[arg(long, default_value_t = 1e-10)]
    pub diag_floor: f64,
    /// Write the full iteration trace to this path.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Per-iterate bound checks (defaults to DIVFACT_VALIDATE, else on).
    #[arg(long, value_enum)]
    pub validate: Option<OnOff>,
    /// Treat the input as raw observations and fit its sample covariance.
    #[arg(long)]
    pub data: bool,
    /// With --data: add ridge regularization if the sample covariance is
    /// rank deficient.
    #[arg(long)]
    pub ridge: bool,
    /// Result JSON path; stdout when omitted.
    #[arg(long, short = 'o')]
    pub output: Option<PathBuf>,
}

impl FitArgs {
    pub fn resolve_validate(&self) -> Result<bool, CliError> {
        if let Some(flag) = self.validate {
            return Ok(matches!(flag, OnOff::On));
        }
        match std::env::var("DIVFACT_VALIDATE") {
            Ok(text) => match text.trim().to_ascii_lowercase().as_str() {
                "on" | "1" | "true" => Ok(true),
                "off" | "0" | "false" => Ok(false),
                other => Err(CliError::input(format!(
                    "DIVFACT_VALIDATE must be on or off, got '{other}'"
                ))),
            },
            Err(_) => Ok(true),
        }
    }
}

#[derive(Args)]
pub struct SynthArgs {
    /// Observed dimension.
    #[arg(long)]
    pub n: usize,
    /// Number of factors (1 <= k < n).
    #[arg(long)]
    pub k: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1.0)]
    pub loading_scale: f64,
    #[arg(long, default_value_t = 1.0)]
    pub noise_scale: f64,
    /// Symmetric perturbation magnitude; 0 keeps the instance exact.
    #[arg(long, default_value_t = 0.0)]
    pub perturbation: f64,
    /// Output prefix: writes `<prefix>.cov.csv`, `<prefix>.model.json`,
    /// `<prefix>.manifest.json`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct DivergenceArgs {
    /// First covariance file (the divergence's first argument).
    pub a: PathBuf,
    /// Second covariance file.
    pub b: PathBuf,
}
