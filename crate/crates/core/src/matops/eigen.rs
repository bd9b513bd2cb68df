//! Cyclic Jacobi eigendecomposition for symmetric matrices.
//!
//! Rotation order is fixed, eigenvalues are returned ascending, and each
//! eigenvector is sign-normalized so that its largest-magnitude component is
//! positive. For a fixed input the output is therefore fully deterministic.

use alloc::vec::Vec;

use super::mat::Mat;
use super::SymMatrix;
use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 64;

/// Eigenvalues (ascending) and matching orthonormal eigenvector columns.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub values: Vec<f64>,
    pub vectors: Mat,
}

pub fn eigen_sym(a: &SymMatrix) -> Result<SymEigen> {
    let n = a.dim();
    let mut m = a.mat().clone();
    let mut v = Mat::identity(n);

    // Convergence scale: total off-diagonal mass relative to the input norm.
    let norm = m.max_abs().max(f64::MIN_POSITIVE);
    let done_tol = 1e-15 * norm;

    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                off = off.max(m[(p, q)].abs());
            }
        }
        if off <= done_tol {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq.abs() <= done_tol * 1e-2 {
                    continue;
                }
                let tau = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = if tau >= 0.0 {
                    1.0 / (tau + libm::sqrt(1.0 + tau * tau))
                } else {
                    -1.0 / (-tau + libm::sqrt(1.0 + tau * tau))
                };
                let c = 1.0 / libm::sqrt(1.0 + t * t);
                let s = t * c;

                for i in 0..n {
                    let mip = m[(i, p)];
                    let miq = m[(i, q)];
                    m[(i, p)] = c * mip - s * miq;
                    m[(i, q)] = s * mip + c * miq;
                }
                for i in 0..n {
                    let mpi = m[(p, i)];
                    let mqi = m[(q, i)];
                    m[(p, i)] = c * mpi - s * mqi;
                    m[(q, i)] = s * mpi + c * mqi;
                }
                for i in 0..n {
                    let vip = v[(i, p)];
                    let viq = v[(i, q)];
                    v[(i, p)] = c * vip - s * viq;
                    v[(i, q)] = s * vip + c * viq;
                }
            }
        }
    }
    if !converged {
        return Err(Error::Internal(alloc::string::String::from(
            "Jacobi eigendecomposition did not converge",
        )));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        m[(i, i)]
            .partial_cmp(&m[(j, j)])
            .expect("eigenvalues are finite")
    });

    let values: Vec<f64> = order.iter().map(|&i| m[(i, i)]).collect();
    let mut vectors = Mat::zeros(n, n);
    for (col, &src) in order.iter().enumerate() {
        // Sign convention: largest-|entry| component positive.
        let mut lead = 0;
        for i in 1..n {
            if v[(i, src)].abs() > v[(lead, src)].abs() {
                lead = i;
            }
        }
        let flip = if v[(lead, src)] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n {
            vectors[(i, col)] = flip * v[(i, src)];
        }
    }

    Ok(SymEigen { values, vectors })
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(a: &SymMatrix) -> Result<f64> {
    Ok(eigen_sym(a)?.values[0])
}
