//! I-divergence between zero-mean Gaussian laws, expressed on their
//! covariance matrices:
//!
//! ```text
//! D(S1 || S2) = 1/2 log(|S2|/|S1|) + 1/2 tr(S2^-1 S1) - n/2
//! ```
//!
//! This is the objective the whole crate minimizes. Values are in nats; the
//! factor 1/2 and the natural log are fixed.

use alloc::format;

use crate::error::{Error, Result};
use crate::lifted::FactorModel;
use crate::matops::{woodbury_inv, Cholesky, Mat, SymMatrix};

/// Negative values within this tolerance of zero are treated as floating
/// point noise and clamped to exactly zero; anything more negative raises an
/// internal-consistency error, since the divergence is provably nonnegative.
pub const NONNEGATIVITY_CLAMP: f64 = 1e-12;

/// Symmetric positive-definite covariance with its Cholesky factor cached.
///
/// Construction is the definiteness check: it fails if any pivot falls at or
/// below the relative threshold of [`crate::matops::PIVOT_REL_TOL`].
#[derive(Debug, Clone)]
pub struct CovarianceMatrix {
    sym: SymMatrix,
    chol: Cholesky,
}

impl CovarianceMatrix {
    pub fn new(sym: SymMatrix) -> Result<Self> {
        let chol = Cholesky::factor(&sym)?;
        Ok(CovarianceMatrix { sym, chol })
    }

    pub fn from_mat(m: Mat) -> Result<Self> {
        CovarianceMatrix::new(SymMatrix::new(m)?)
    }

    pub fn dim(&self) -> usize {
        self.sym.dim()
    }

    pub fn sym(&self) -> &SymMatrix {
        &self.sym
    }

    pub fn mat(&self) -> &Mat {
        self.sym.mat()
    }

    pub fn logdet(&self) -> f64 {
        self.chol.logdet()
    }

    /// Solve `Sigma X = B` against the cached factor.
    pub fn solve_mat(&self, b: &Mat) -> Mat {
        self.chol.solve_mat(b)
    }

    pub fn max_abs(&self) -> f64 {
        self.sym.max_abs()
    }

    pub fn max_diag(&self) -> f64 {
        self.sym.max_diag()
    }

    /// FNV-1a hash of the dimension and the little-endian entry bytes.
    /// Identifies the input in result files and manifests.
    pub fn fingerprint(&self) -> u64 {
        const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
        const PRIME: u64 = 0x0000_0100_0000_01b3;
        let mut h = OFFSET;
        let mut eat = |byte: u8| {
            h ^= byte as u64;
            h = h.wrapping_mul(PRIME);
        };
        for byte in (self.dim() as u64).to_le_bytes() {
            eat(byte);
        }
        for v in self.mat().data() {
            for byte in v.to_le_bytes() {
                eat(byte);
            }
        }
        h
    }
}

fn clamp_nonnegative(v: f64) -> Result<f64> {
    if v >= 0.0 {
        Ok(v)
    } else if v >= -NONNEGATIVITY_CLAMP {
        Ok(0.0)
    } else {
        Err(Error::Internal(format!(
            "divergence evaluated to {v:e}, below the nonnegativity clamp"
        )))
    }
}

/// I-divergence `D(s1 || s2)` between two covariances of equal dimension.
pub fn i_divergence(s1: &CovarianceMatrix, s2: &CovarianceMatrix) -> Result<f64> {
    let n = s1.dim();
    if s2.dim() != n {
        return Err(Error::dim(format!(
            "divergence arguments have dimensions {n} and {}",
            s2.dim()
        )));
    }
    let tr = s2.solve_mat(s1.mat()).trace();
    let v = 0.5 * (s2.logdet() - s1.logdet()) + 0.5 * tr - 0.5 * n as f64;
    clamp_nonnegative(v)
}

/// `D(s0 || H H^T + D)` without forming the dense model covariance: the
/// inverse goes through the Woodbury identity and the determinant through
/// `|H H^T + D| = |D| * |I + H^T D^-1 H|`, so the cost is driven by the
/// factor count rather than the ambient dimension.
pub fn objective(s0: &CovarianceMatrix, model: &FactorModel) -> Result<f64> {
    let n = s0.dim();
    if model.n() != n {
        return Err(Error::dim(format!(
            "model has {} rows but the target covariance has dimension {n}",
            model.n()
        )));
    }
    let k = model.k();
    let h = model.h();
    let d = model.d();

    // log |H H^T + D| = sum log d_i + log |I + H^T D^-1 H|
    let dinv_h = Mat::from_fn(n, k, |i, j| h[(i, j)] / d[i]);
    let small = SymMatrix::new(Mat::identity(k).add(&h.transpose().matmul(&dinv_h)))?;
    let small_chol = Cholesky::factor(&small)
        .map_err(|_| Error::Internal(format!("capacitance matrix of size {k} lost definiteness")))?;
    let mut logdet_model = small_chol.logdet();
    for &v in d {
        logdet_model += libm::log(v);
    }

    // tr((H H^T + D)^-1 S0) via the Woodbury inverse with A = -I.
    let minus_i = SymMatrix::new(Mat::identity(k).scale(-1.0))?;
    let model_inv = woodbury_inv(d, h, &minus_i, &h.transpose())?;
    let mut tr = 0.0;
    for i in 0..n {
        for j in 0..n {
            tr += model_inv[(i, j)] * s0.mat()[(j, i)];
        }
    }

    let v = 0.5 * (logdet_model - s0.logdet()) + 0.5 * tr - 0.5 * n as f64;
    clamp_nonnegative(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;
    use crate::testutil::{random_model_parts, random_spd};
    use alloc::vec::Vec;

    fn cov1(v: f64) -> CovarianceMatrix {
        CovarianceMatrix::from_mat(Mat::from_rows(1, 1, &[v])).unwrap()
    }

    #[test]
    fn zero_for_identical_arguments() {
        let mut rng = SplitMix64::new(1);
        for n in 1..=8 {
            let s = CovarianceMatrix::new(random_spd(n, &mut rng)).unwrap();
            let v = i_divergence(&s, &s).unwrap();
            assert!(v <= 1e-13, "n={n}: {v}");
        }
    }

    #[test]
    fn scalar_hand_evaluations() {
        // D([2] || [1]) = (1 - log 2)/2, D([1] || [2]) = (log 2)/2 - 1/4.
        let a = cov1(2.0);
        let b = cov1(1.0);
        let fwd = i_divergence(&a, &b).unwrap();
        let rev = i_divergence(&b, &a).unwrap();
        assert!((fwd - 0.5 * (1.0 - libm::log(2.0))).abs() < 1e-15);
        assert!((rev - (0.5 * libm::log(2.0) - 0.25)).abs() < 1e-15);
        // Asymmetry witness.
        assert!((fwd - rev).abs() > 0.05);
    }

    #[test]
    fn rejects_dimension_mismatch() {
        let a = cov1(1.0);
        let b = CovarianceMatrix::new(SymMatrix::identity(2)).unwrap();
        assert!(i_divergence(&a, &b).is_err());
    }

    #[test]
    fn nonnegative_on_random_pairs() {
        let mut rng = SplitMix64::new(9);
        for _ in 0..50 {
            let a = CovarianceMatrix::new(random_spd(5, &mut rng)).unwrap();
            let b = CovarianceMatrix::new(random_spd(5, &mut rng)).unwrap();
            let v = i_divergence(&a, &b).unwrap();
            assert!(v >= 0.0);
        }
    }

    #[test]
    fn congruence_invariance() {
        let mut rng = SplitMix64::new(13);
        for _ in 0..20 {
            let s1 = random_spd(4, &mut rng);
            let s2 = random_spd(4, &mut rng);
            let t = Mat::from_fn(4, 4, |i, j| {
                0.2 * rng.symmetric() + if i == j { 1.5 } else { 0.0 }
            });
            let d0 = i_divergence(
                &CovarianceMatrix::new(s1.clone()).unwrap(),
                &CovarianceMatrix::new(s2.clone()).unwrap(),
            )
            .unwrap();
            let ts1 = t.matmul(s1.mat()).matmul(&t.transpose());
            let ts2 = t.matmul(s2.mat()).matmul(&t.transpose());
            let d1 = i_divergence(
                &CovarianceMatrix::from_mat(ts1).unwrap(),
                &CovarianceMatrix::from_mat(ts2).unwrap(),
            )
            .unwrap();
            assert!((d0 - d1).abs() < 1e-10, "congruence broke: {d0} vs {d1}");
        }
    }

    #[test]
    fn objective_zero_on_exact_model() {
        let mut rng = SplitMix64::new(21);
        let (h, d, _) = random_model_parts(5, 2, &mut rng);
        let mut s0 = h.matmul(&h.transpose());
        s0.add_diag(&d);
        let s0 = CovarianceMatrix::from_mat(s0).unwrap();
        let model = FactorModel::new(h, d).unwrap();
        assert!(objective(&s0, &model).unwrap() < 1e-13);
    }

    #[test]
    fn objective_zero_loadings_is_diagonal_baseline() {
        let mut rng = SplitMix64::new(22);
        let s0 = CovarianceMatrix::new(random_spd(4, &mut rng)).unwrap();
        let diag: Vec<f64> = s0.mat().diag();
        let model = FactorModel::new(Mat::zeros(4, 1), diag.clone()).unwrap();
        let direct = i_divergence(
            &s0,
            &CovarianceMatrix::new(SymMatrix::from_diag(&diag)).unwrap(),
        )
        .unwrap();
        let via_model = objective(&s0, &model).unwrap();
        assert!((direct - via_model).abs() < 1e-13);
    }

    #[test]
    fn objective_matches_dense_formula() {
        let mut rng = SplitMix64::new(23);
        for _ in 0..10 {
            let s0 = CovarianceMatrix::new(random_spd(4, &mut rng)).unwrap();
            let (h, d, _) = random_model_parts(4, 1, &mut rng);
            let model = FactorModel::new(h.clone(), d.clone()).unwrap();
            let mut dense = h.matmul(&h.transpose());
            dense.add_diag(&d);
            let dense = CovarianceMatrix::from_mat(dense).unwrap();
            let direct = i_divergence(&s0, &dense).unwrap();
            let routed = objective(&s0, &model).unwrap();
            assert!((direct - routed).abs() < 1e-12, "{direct} vs {routed}");
        }
    }

    #[test]
    fn clamp_rejects_material_negatives() {
        assert_eq!(clamp_nonnegative(-5e-13).unwrap(), 0.0);
        assert!(clamp_nonnegative(-5e-12).is_err());
        assert_eq!(clamp_nonnegative(3.0).unwrap(), 3.0);
    }

    #[test]
    fn fingerprint_distinguishes_inputs() {
        let a = CovarianceMatrix::new(SymMatrix::identity(3)).unwrap();
        let b = CovarianceMatrix::new(SymMatrix::from_diag(&[1.0, 1.0, 2.0])).unwrap();
        assert_ne!(a.fingerprint(), b.fingerprint());
        assert_eq!(a.fingerprint(), a.fingerprint());
    }
}
