//! JSON documents: fit results (optionally with the iteration trace), model
//! files, and the run manifest every output embeds or ships alongside.

use std::fs;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use divfact_core::{FactorModel, FitResult, IterRecord, Mat, Termination};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Run metadata embedded in (or accompanying) every output file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub inputs: Vec<String>,
    pub tool_version: String,
    pub seed: Option<u64>,
    pub config: serde_json::Value,
    /// FNV-1a hash (hex) of the covariance the run operated on.
    pub input_fingerprint: String,
    pub started_unix: u64,
    pub finished_unix: u64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub termination: Option<String>,
}

/// Wall-clock seconds, overridable through `SOURCE_DATE_EPOCH` for
/// byte-reproducible runs.
pub fn now_unix() -> u64 {
    if let Ok(text) = std::env::var("SOURCE_DATE_EPOCH") {
        if let Ok(v) = text.trim().parse() {
            return v;
        }
    }
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TraceRecordDoc {
    pub iter: usize,
    pub objective: f64,
    pub decrement: f64,
    pub fixed_point_res_h: f64,
    pub fixed_point_res_d: f64,
    pub min_d: f64,
    pub psd_slack: Option<f64>,
    pub d_bound_violation: bool,
    pub psd_violation: bool,
    pub floor_hits: u32,
}

impl From<&IterRecord> for TraceRecordDoc {
    fn from(r: &IterRecord) -> Self {
        TraceRecordDoc {
            iter: r.iter,
            objective: r.objective,
            decrement: r.decrement,
            fixed_point_res_h: r.fixed_point_res_h,
            fixed_point_res_d: r.fixed_point_res_d,
            min_d: r.min_d,
            psd_slack: r.psd_slack,
            d_bound_violation: r.d_bound_violation,
            psd_violation: r.psd_violation,
            floor_hits: r.floor_hits,
        }
    }
}

/// The single result document a fit run emits. The trace array is included
/// in the file written through `--trace` and omitted from the main result.
#[derive(Debug, Serialize, Deserialize)]
pub struct ResultDoc {
    #[serde(rename = "H")]
    pub h: Vec<Vec<f64>>,
    #[serde(rename = "D")]
    pub d: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub termination: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub breakdown_reason: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub warnings: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub trace: Option<Vec<TraceRecordDoc>>,
    pub manifest: Manifest,
}

/// Ground-truth model file written by `synth` and read by `fit --init file`.
#[derive(Debug, Serialize, Deserialize)]
pub struct ModelDoc {
    #[serde(rename = "H")]
    pub h: Vec<Vec<f64>>,
    #[serde(rename = "D")]
    pub d: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub manifest: Option<Manifest>,
}

pub fn termination_label(t: &Termination) -> (&'static str, Option<String>) {
    match t {
        Termination::Converged => ("Converged", None),
        Termination::MaxIter => ("MaxIter", None),
        Termination::ExactModelStop => ("ExactModelStop", None),
        Termination::NumericalBreakdown(reason) => ("NumericalBreakdown", Some(reason.clone())),
    }
}

pub fn rows_of(m: &Mat) -> Vec<Vec<f64>> {
    (0..m.rows()).map(|i| m.row(i).to_vec()).collect()
}

pub fn result_doc(result: &FitResult, manifest: Manifest, with_trace: bool) -> ResultDoc {
    let (termination, breakdown_reason) = termination_label(&result.trace.termination);
    ResultDoc {
        h: rows_of(result.model.h()),
        d: result.model.d().to_vec(),
        objective: result.objective,
        iterations: result.iterations(),
        termination: termination.to_string(),
        breakdown_reason,
        warnings: if with_trace && !result.trace.warnings.is_empty() {
            Some(result.trace.warnings.clone())
        } else {
            None
        },
        trace: with_trace.then(|| result.trace.records.iter().map(Into::into).collect()),
        manifest,
    }
}

pub fn model_doc(model: &FactorModel, manifest: Option<Manifest>) -> ModelDoc {
    ModelDoc {
        h: rows_of(model.h()),
        d: model.d().to_vec(),
        manifest,
    }
}

pub fn model_from_doc(doc: &ModelDoc, name: &str) -> Result<FactorModel, CliError> {
    let rows = doc.h.len();
    if rows == 0 {
        return Err(CliError::input(format!("{name}: model has an empty loading matrix")));
    }
    let cols = doc.h[0].len();
    if doc.h.iter().any(|r| r.len() != cols) {
        return Err(CliError::input(format!("{name}: ragged loading matrix rows")));
    }
    let flat: Vec<f64> = doc.h.iter().flatten().copied().collect();
    let h = Mat::from_rows(rows, cols, &flat);
    FactorModel::new(h, doc.d.clone())
        .map_err(|e| CliError::input(format!("{name}: invalid model ({e})")))
}

pub fn write_json<T: Serialize>(path: &Path, doc: &T) -> Result<(), CliError> {
    let text = render_json(doc);
    fs::write(path, text)
        .map_err(|e| CliError::input(format!("cannot write {}: {e}", path.display())))
}

pub fn render_json<T: Serialize>(doc: &T) -> String {
    let mut text = serde_json::to_string_pretty(doc).expect("documents serialize infallibly");
    text.push('\n');
    text
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::input(format!("{}: invalid JSON ({e})", path.display())))
}

/// Format with 15 significant digits, plain decimal in the ordinary range.
pub fn fmt_sig15(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    let mag = v.abs().log10().floor() as i32;
    if (-5..=15).contains(&mag) {
        let decimals = (14 - mag).max(0) as usize;
        format!("{v:.decimals$}")
    } else {
        format!("{v:.14e}")
    }
}
