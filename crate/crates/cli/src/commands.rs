//! The three subcommands: fit a covariance file, synthesize a planted
//! instance, and evaluate the divergence between two covariance files.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use divfact_core::{
    fit, i_divergence, plant_model, sample_covariance, CovarianceMatrix, FitConfig, Init,
    SyntheticSpec, Termination, Variant,
};
use serde_json::json;

use crate::jsonfile::{
    self, fmt_sig15, model_doc, model_from_doc, now_unix, read_json, result_doc, Manifest,
    ModelDoc,
};
use crate::matfile;
use crate::{CliError, FitArgs, InitArg, SynthArgs, VariantArg};

fn fingerprint_hex(cov: &CovarianceMatrix) -> String {
    format!("{:016x}", cov.fingerprint())
}

pub fn cmd_fit(args: &FitArgs) -> Result<ExitCode, CliError> {
    let started = now_unix();
    let s0 = if args.data {
        let table = matfile::read_table(&args.input)?;
        sample_covariance(&table, args.ridge)
            .map_err(|e| CliError::input(format!("{}: {e}", args.input.display())))?
    } else {
        matfile::read_covariance(&args.input)?
    };

    let init = match args.init {
        InitArg::Pca => Init::PrincipalComponents,
        InitArg::Random => Init::RandomSeeded(args.seed.unwrap_or(0)),
        InitArg::File => {
            let path = args.init_file.as_ref().ok_or_else(|| {
                CliError::input("--init file requires --init-file <path>".to_string())
            })?;
            let doc: ModelDoc = read_json(path)?;
            Init::Explicit(model_from_doc(&doc, &path.display().to_string())?)
        }
    };

    let mut cfg = FitConfig::new(args.k);
    cfg.variant = match args.variant {
        VariantArg::Alg1 => Variant::Alg1,
        VariantArg::Alg2 => Variant::Alg2,
    };
    cfg.init = init;
    cfg.max_iter = args.max_iter;
    cfg.tol_divergence_decrement = args.tol_decrement;
    cfg.tol_fixed_point = args.tol_fixed_point;
    cfg.diag_floor = args.diag_floor;
    cfg.validate = args.resolve_validate()?;

    let result = fit(&s0, cfg).map_err(|e| CliError::input(format!("fit: {e}")))?;

    let (termination, _) = jsonfile::termination_label(&result.trace.termination);
    let manifest = Manifest {
        command: "fit".to_string(),
        inputs: vec![args.input.display().to_string()],
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        seed: args.seed,
        config: json!({
            "k": args.k,
            "variant": format!("{:?}", args.variant).to_lowercase(),
            "init": format!("{:?}", args.init).to_lowercase(),
            "init_file": args.init_file.as_ref().map(|p| p.display().to_string()),
            "max_iter": args.max_iter,
            "tol_decrement": args.tol_decrement,
            "tol_fixed_point": args.tol_fixed_point,
            "diag_floor": args.diag_floor,
            "validate": result.config.validate,
            "data": args.data,
            "ridge": args.ridge,
        }),
        input_fingerprint: fingerprint_hex(&s0),
        started_unix: started,
        finished_unix: now_unix(),
        termination: Some(termination.to_string()),
    };

    let doc = result_doc(&result, manifest.clone(), false);
    match &args.output {
        Some(path) => jsonfile::write_json(path, &doc)?,
        None => print!("{}", jsonfile::render_json(&doc)),
    }
    if let Some(trace_path) = &args.trace {
        let trace_doc = result_doc(&result, manifest, true);
        jsonfile::write_json(trace_path, &trace_doc)?;
    }

    Ok(match result.trace.termination {
        Termination::Converged | Termination::ExactModelStop => ExitCode::SUCCESS,
        Termination::MaxIter => ExitCode::from(2),
        Termination::NumericalBreakdown(_) => ExitCode::from(3),
    })
}

pub fn cmd_synth(args: &SynthArgs) -> Result<ExitCode, CliError> {
    let started = now_unix();
    let spec = SyntheticSpec {
        n: args.n,
        k: args.k,
        loading_scale: args.loading_scale,
        noise_scale: args.noise_scale,
        perturbation: args.perturbation,
        seed: args.seed,
    };
    let (truth, s0) = plant_model(&spec).map_err(|e| CliError::input(format!("synth: {e}")))?;

    let cov_path = prefixed(&args.out, "cov.csv");
    let model_path = prefixed(&args.out, "model.json");
    let manifest_path = prefixed(&args.out, "manifest.json");

    let manifest = Manifest {
        command: "synth".to_string(),
        inputs: Vec::new(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        seed: Some(args.seed),
        config: json!({
            "n": args.n,
            "k": args.k,
            "loading_scale": args.loading_scale,
            "noise_scale": args.noise_scale,
            "perturbation": args.perturbation,
            "outputs": [
                cov_path.display().to_string(),
                model_path.display().to_string(),
            ],
        }),
        input_fingerprint: fingerprint_hex(&s0),
        started_unix: started,
        finished_unix: now_unix(),
        termination: None,
    };

    matfile::write_matrix(&cov_path, s0.mat())?;
    jsonfile::write_json(&model_path, &model_doc(&truth, Some(manifest.clone())))?;
    jsonfile::write_json(&manifest_path, &manifest)?;
    Ok(ExitCode::SUCCESS)
}

pub fn cmd_divergence(a: &Path, b: &Path) -> Result<ExitCode, CliError> {
    let s1 = matfile::read_covariance(a)?;
    let s2 = matfile::read_covariance(b)?;
    let value = i_divergence(&s1, &s2).map_err(|e| CliError::input(format!("{e}")))?;
    println!("{}", fmt_sig15(value));
    Ok(ExitCode::SUCCESS)
}

fn prefixed(prefix: &Path, suffix: &str) -> PathBuf {
    let mut name = prefix.file_name().map(|s| s.to_os_string()).unwrap_or_default();
    if !name.is_empty() {
        name.push(".");
    }
    name.push(suffix);
    prefix.with_file_name(name)
}
