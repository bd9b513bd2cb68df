//! LU factorization with partial pivoting, for general square matrices
//! (mixing factors, indefinite blocks) where Cholesky does not apply.

use alloc::vec::Vec;

use super::mat::Mat;
use crate::error::{Error, Result};

/// Pivot magnitudes below `1e-13` times the largest entry count as singular.
const SINGULAR_REL_TOL: f64 = 1e-13;

#[derive(Debug, Clone)]
pub struct Lu {
    lu: Mat,
    perm: Vec<usize>,
}

impl Lu {
    pub fn factor(a: &Mat) -> Result<Self> {
        assert!(a.is_square(), "LU factorization requires a square matrix");
        let n = a.rows();
        let threshold = SINGULAR_REL_TOL * a.max_abs();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();

        for j in 0..n {
            let mut p = j;
            let mut best = lu[(j, j)].abs();
            for i in (j + 1)..n {
                let v = lu[(i, j)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if !(best > threshold) || !best.is_finite() {
                return Err(Error::singular("pivot collapse during LU factorization"));
            }
            if p != j {
                for c in 0..n {
                    let a = lu[(j, c)];
                    lu[(j, c)] = lu[(p, c)];
                    lu[(p, c)] = a;
                }
                perm.swap(j, p);
            }
            let pivot = lu[(j, j)];
            for i in (j + 1)..n {
                let factor = lu[(i, j)] / pivot;
                lu[(i, j)] = factor;
                for c in (j + 1)..n {
                    let delta = factor * lu[(j, c)];
                    lu[(i, c)] -= delta;
                }
            }
        }
        Ok(Lu { lu, perm })
    }

    pub fn dim(&self) -> usize {
        self.lu.rows()
    }

    pub fn solve_vec(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim();
        assert_eq!(b.len(), n);
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for k in 0..i {
                x[i] -= self.lu[(i, k)] * x[k];
            }
        }
        for i in (0..n).rev() {
            for k in (i + 1)..n {
                x[i] -= self.lu[(i, k)] * x[k];
            }
            x[i] /= self.lu[(i, i)];
        }
        x
    }

    pub fn solve_mat(&self, b: &Mat) -> Mat {
        let n = self.dim();
        assert_eq!(b.rows(), n);
        let mut out = Mat::zeros(n, b.cols());
        let mut col = alloc::vec![0.0; n];
        for j in 0..b.cols() {
            for i in 0..n {
                col[i] = b[(i, j)];
            }
            let x = self.solve_vec(&col);
            for i in 0..n {
                out[(i, j)] = x[i];
            }
        }
        out
    }

    pub fn inverse(&self) -> Mat {
        self.solve_mat(&Mat::identity(self.dim()))
    }
}
