//! CSV matrix files: one row per line, comma-separated decimal floats with
//! 17 significant digits, and an optional `# dim=<n>` header. The format
//! round-trips `f64` values exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use divfact_core::{CovarianceMatrix, Mat, SymMatrix};

use crate::CliError;

/// Asymmetry above this (relative to the largest entry) only triggers a
/// warning; above [`REJECT_ASYMMETRY_REL`] the file is rejected.
const WARN_ASYMMETRY_REL: f64 = 1e-12;
const REJECT_ASYMMETRY_REL: f64 = 1e-6;

pub fn format_matrix(m: &Mat) -> String {
    let mut out = String::new();
    if m.is_square() {
        let _ = writeln!(out, "# dim={}", m.rows());
    }
    for i in 0..m.rows() {
        let row: Vec<String> = (0..m.cols()).map(|j| format!("{:.16e}", m[(i, j)])).collect();
        let _ = writeln!(out, "{}", row.join(","));
    }
    out
}

pub fn write_matrix(path: &Path, m: &Mat) -> Result<(), CliError> {
    fs::write(path, format_matrix(m))
        .map_err(|e| CliError::input(format!("cannot write {}: {e}", path.display())))
}

/// Parse a rectangular numeric table. Lines starting with `#` are headers or
/// comments; a `# dim=<n>` header is checked against the parsed shape.
pub fn read_table(path: &Path) -> Result<Mat, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))?;
    parse_table(&text, &path.display().to_string())
}

fn parse_table(text: &str, name: &str) -> Result<Mat, CliError> {
    let mut declared_dim: Option<usize> = None;
    let mut rows: Vec<Vec<f64>> = Vec::new();

    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            let rest = rest.trim();
            if let Some(dim_text) = rest.strip_prefix("dim=") {
                let dim: usize = dim_text.trim().parse().map_err(|_| {
                    CliError::input(format!("{name}:{}: invalid dimension header '{line}'", lineno + 1))
                })?;
                declared_dim = Some(dim);
            }
            continue;
        }
        let mut row = Vec::new();
        for (col, field) in line.split(',').enumerate() {
            let value: f64 = field.trim().parse().map_err(|_| {
                CliError::input(format!(
                    "{name}:{}: column {}: invalid number '{}'",
                    lineno + 1,
                    col + 1,
                    field.trim()
                ))
            })?;
            row.push(value);
        }
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(CliError::input(format!(
                    "{name}:{}: row has {} entries, expected {}",
                    lineno + 1,
                    row.len(),
                    first.len()
                )));
            }
        }
        rows.push(row);
    }

    if rows.is_empty() {
        return Err(CliError::input(format!("{name}: no matrix rows found")));
    }
    let cols = rows[0].len();
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    let m = Mat::from_rows(rows.len(), cols, &flat);
    if let Some(dim) = declared_dim {
        if m.rows() != dim || m.cols() != dim {
            return Err(CliError::input(format!(
                "{name}: header declares dim={dim} but the table is {}x{}",
                m.rows(),
                m.cols()
            )));
        }
    }
    Ok(m)
}

/// Parse a symmetric positive-definite covariance, applying the symmetry
/// policy: small asymmetry is averaged away (with a warning past the noise
/// band), material asymmetry is rejected.
pub fn read_covariance(path: &Path) -> Result<CovarianceMatrix, CliError> {
    let m = read_table(path)?;
    let name = path.display();
    if !m.is_square() {
        return Err(CliError::input(format!(
            "{name}: covariance must be square, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    let scale = m.max_abs();
    let sym = SymMatrix::new(m).expect("square by construction");
    if sym.asymmetry() > REJECT_ASYMMETRY_REL * scale {
        return Err(CliError::input(format!(
            "{name}: matrix is materially asymmetric (max |a_ij - a_ji| = {:.3e})",
            sym.asymmetry()
        )));
    }
    if sym.asymmetry() > WARN_ASYMMETRY_REL * scale {
        eprintln!(
            "warning: {name}: symmetrized input with asymmetry {:.3e}",
            sym.asymmetry()
        );
    }
    CovarianceMatrix::new(sym)
        .map_err(|e| CliError::input(format!("{name}: not positive definite ({e})")))
}
