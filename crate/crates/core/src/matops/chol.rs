//! Cholesky factorization of symmetric positive-definite matrices.

use alloc::vec;
use alloc::vec::Vec;

use super::mat::Mat;
use super::SymMatrix;
use crate::error::{Error, Result};

/// Relative pivot threshold: a pivot below `1e-13` times the largest
/// diagonal entry counts as a definiteness failure.
pub const PIVOT_REL_TOL: f64 = 1e-13;

/// Factorization `P = L L^T` with `L` lower triangular.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: Mat,
}

impl Cholesky {
    /// Factor a symmetric matrix, failing with the index of the first pivot
    /// at or below the relative threshold.
    pub fn factor(a: &SymMatrix) -> Result<Self> {
        let n = a.dim();
        let threshold = PIVOT_REL_TOL * a.max_diag();
        let src = a.mat();
        let mut l = Mat::zeros(n, n);

        for j in 0..n {
            let mut pivot = src[(j, j)];
            for k in 0..j {
                pivot -= l[(j, k)] * l[(j, k)];
            }
            if !(pivot > threshold) || !pivot.is_finite() {
                return Err(Error::NotPositiveDefinite { pivot_index: j });
            }
            let diag = libm::sqrt(pivot);
            l[(j, j)] = diag;
            for i in (j + 1)..n {
                let mut sum = src[(i, j)];
                for k in 0..j {
                    sum -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = sum / diag;
            }
        }
        Ok(Cholesky { l })
    }

    pub fn dim(&self) -> usize {
        self.l.rows()
    }

    /// Lower-triangular factor.
    pub fn lower(&self) -> &Mat {
        &self.l
    }

    /// `log det P = 2 sum_i log L_ii`.
    pub fn logdet(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.dim() {
            s += libm::log(self.l[(i, i)]);
        }
        2.0 * s
    }

    /// Solve `P x = b`.
    pub fn solve_vec(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim();
        assert_eq!(b.len(), n, "rhs length mismatch");
        let mut x = b.to_vec();
        // L y = b
        for i in 0..n {
            for k in 0..i {
                x[i] -= self.l[(i, k)] * x[k];
            }
            x[i] /= self.l[(i, i)];
        }
        // L^T x = y
        for i in (0..n).rev() {
            for k in (i + 1)..n {
                x[i] -= self.l[(k, i)] * x[k];
            }
            x[i] /= self.l[(i, i)];
        }
        x
    }

    /// Solve `P X = B` column by column.
    pub fn solve_mat(&self, b: &Mat) -> Mat {
        let n = self.dim();
        assert_eq!(b.rows(), n, "rhs row count mismatch");
        let mut out = Mat::zeros(n, b.cols());
        let mut col = vec![0.0; n];
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

    /// Dense inverse `P^{-1}`, symmetrized.
    pub fn inverse(&self) -> SymMatrix {
        let inv = self.solve_mat(&Mat::identity(self.dim()));
        SymMatrix::new(inv).expect("inverse of a square matrix is square")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sym(entries: &[f64], n: usize) -> SymMatrix {
        SymMatrix::new(Mat::from_rows(n, n, entries)).unwrap()
    }

    #[test]
    fn factor_reconstructs() {
        let a = sym(&[25.0, 15.0, -5.0, 15.0, 18.0, 0.0, -5.0, 0.0, 11.0], 3);
        let c = Cholesky::factor(&a).unwrap();
        let back = c.lower().matmul(&c.lower().transpose());
        assert!(back.max_abs_diff(a.mat()) < 1e-12);
    }

    #[test]
    fn rejects_indefinite_with_pivot_index() {
        let a = sym(&[1.0, 2.0, 2.0, 1.0], 2);
        match Cholesky::factor(&a) {
            Err(Error::NotPositiveDefinite { pivot_index }) => assert_eq!(pivot_index, 1),
            other => panic!("expected definiteness error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_tiny_pivot_relative_to_diagonal() {
        // Second pivot is ~1e-16 of the largest diagonal entry.
        let a = sym(&[1e4, 0.0, 0.0, 1e-12], 2);
        assert!(Cholesky::factor(&a).is_err());
    }

    #[test]
    fn solve_matches_direct() {
        let a = sym(&[4.0, 2.0, 2.0, 3.0], 2);
        let c = Cholesky::factor(&a).unwrap();
        let x = c.solve_vec(&[8.0, 7.0]);
        // A x = b
        assert!((4.0 * x[0] + 2.0 * x[1] - 8.0).abs() < 1e-12);
        assert!((2.0 * x[0] + 3.0 * x[1] - 7.0).abs() < 1e-12);
    }

    #[test]
    fn logdet_of_known_determinant() {
        let a = sym(&[4.0, 2.0, 2.0, 3.0], 2);
        let c = Cholesky::factor(&a).unwrap();
        assert!((c.logdet() - libm::log(8.0)).abs() < 1e-12);
    }
}
