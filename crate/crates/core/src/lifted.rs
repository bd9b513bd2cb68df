//! The lifted covariance space and its two closed-form partial
//! minimizations.
//!
//! A factor model `(H, D, Q)` with `H` of size `n x k`, diagonal `D > 0` and
//! invertible `k x k` mixing factor `Q` lifts to the `(n+k) x (n+k)` block
//! covariance
//!
//! ```text
//! [ H H^T + D    H Q   ]
//! [ (H Q)^T      Q^T Q ]
//! ```
//!
//! Minimizing the Gaussian I-divergence over each argument in turn has a
//! closed-form solution, and each solution obeys an exact Pythagorean
//! decomposition of the divergence. Those two minimizations are the building
//! blocks of the alternating solver in [`crate::altmin`].

use alloc::format;
use alloc::vec::Vec;

use crate::divergence::{i_divergence, CovarianceMatrix};
use crate::error::{Error, Result};
use crate::matops::{solve_right_upper, sqrt_factor, Cholesky, Lu, Mat, SymMatrix};

/// Relative residual below which a model counts as an exact fit witness.
pub const EXACT_FA_REL_TOL: f64 = 1e-10;

/// Loading matrix `H`, diagonal noise variances `D` and an optional mixing
/// factor `Q`. Without `Q` the model stands for its whole equivalence class
/// under right-multiplication of `H` by unitary factors; `Q` is only needed
/// for lifting.
#[derive(Debug, Clone)]
pub struct FactorModel {
    h: Mat,
    d: Vec<f64>,
    q: Option<Mat>,
}

impl FactorModel {
    pub fn new(h: Mat, d: Vec<f64>) -> Result<Self> {
        if d.len() != h.rows() {
            return Err(Error::dim(format!(
                "noise diagonal has length {} but the loading matrix has {} rows",
                d.len(),
                h.rows()
            )));
        }
        if h.cols() == 0 {
            return Err(Error::dim("loading matrix needs at least one column"));
        }
        for (i, &v) in d.iter().enumerate() {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::NonPositiveDiagonal { index: i });
            }
        }
        Ok(FactorModel { h, d, q: None })
    }

    pub fn with_mixing(h: Mat, d: Vec<f64>, q: Mat) -> Result<Self> {
        let mut model = FactorModel::new(h, d)?;
        if q.rows() != model.k() || q.cols() != model.k() {
            return Err(Error::dim(format!(
                "mixing factor must be {k}x{k}, got {}x{}",
                q.rows(),
                q.cols(),
                k = model.k()
            )));
        }
        Lu::factor(&q).map_err(|_| Error::singular("mixing factor Q"))?;
        model.q = Some(q);
        Ok(model)
    }

    pub fn n(&self) -> usize {
        self.h.rows()
    }

    pub fn k(&self) -> usize {
        self.h.cols()
    }

    pub fn h(&self) -> &Mat {
        &self.h
    }

    pub fn d(&self) -> &[f64] {
        &self.d
    }

    pub fn q(&self) -> Option<&Mat> {
        self.q.as_ref()
    }

    /// Drop the mixing factor, keeping the class representative `(H, D)`.
    pub fn without_mixing(mut self) -> Self {
        self.q = None;
        self
    }

    /// Dense model covariance `H H^T + D`.
    pub fn cov_mat(&self) -> Mat {
        let mut m = self.h.matmul(&self.h.transpose());
        m.add_diag(&self.d);
        m
    }
}

/// Positive-definite `(n+k) x (n+k)` block covariance over an `n + k` split.
#[derive(Debug, Clone)]
pub struct LiftedCovariance {
    n: usize,
    k: usize,
    whole: CovarianceMatrix,
}

impl LiftedCovariance {
    /// Assemble from blocks and validate: the whole matrix must be positive
    /// definite and so must both Schur complements.
    pub fn from_blocks(s11: &SymMatrix, s12: &Mat, s22: &SymMatrix) -> Result<Self> {
        let n = s11.dim();
        let k = s22.dim();
        if s12.rows() != n || s12.cols() != k {
            return Err(Error::dim(format!(
                "off-diagonal block must be {n}x{k}, got {}x{}",
                s12.rows(),
                s12.cols()
            )));
        }
        if k >= n {
            return Err(Error::dim(format!(
                "hidden dimension {k} must be smaller than the observed dimension {n}"
            )));
        }
        let mut whole = Mat::zeros(n + k, n + k);
        for i in 0..n {
            for j in 0..n {
                whole[(i, j)] = s11[(i, j)];
            }
            for j in 0..k {
                whole[(i, n + j)] = s12[(i, j)];
                whole[(n + j, i)] = s12[(i, j)];
            }
        }
        for i in 0..k {
            for j in 0..k {
                whole[(n + i, n + j)] = s22[(i, j)];
            }
        }
        let whole = CovarianceMatrix::new(SymMatrix::new(whole)?)?;

        // Schur complements; both must inherit positive definiteness.
        let s11_chol = Cholesky::factor(s11)?;
        let x = s11_chol.solve_mat(s12);
        let schur_lower = SymMatrix::new(s22.mat().sub(&s12.transpose().matmul(&x)))?;
        Cholesky::factor(&schur_lower).map_err(|_| {
            Error::Internal("lower Schur complement of a lifted covariance lost definiteness".into())
        })?;
        let s22_chol = Cholesky::factor(s22)?;
        let y = s22_chol.solve_mat(&s12.transpose());
        let schur_upper = SymMatrix::new(s11.mat().sub(&s12.matmul(&y)))?;
        Cholesky::factor(&schur_upper).map_err(|_| {
            Error::Internal("upper Schur complement of a lifted covariance lost definiteness".into())
        })?;

        Ok(LiftedCovariance { n, k, whole })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn whole(&self) -> &CovarianceMatrix {
        &self.whole
    }

    /// Upper-left `n x n` block.
    pub fn s11(&self) -> SymMatrix {
        let m = Mat::from_fn(self.n, self.n, |i, j| self.whole.mat()[(i, j)]);
        SymMatrix::new(m).expect("principal block of a symmetric matrix is symmetric")
    }

    /// Upper-right `n x k` block.
    pub fn s12(&self) -> Mat {
        Mat::from_fn(self.n, self.k, |i, j| self.whole.mat()[(i, self.n + j)])
    }

    /// Lower-right `k x k` block.
    pub fn s22(&self) -> SymMatrix {
        let m = Mat::from_fn(self.k, self.k, |i, j| {
            self.whole.mat()[(self.n + i, self.n + j)]
        });
        SymMatrix::new(m).expect("principal block of a symmetric matrix is symmetric")
    }
}

/// Lift a factor model with mixing factor into its block covariance.
pub fn assemble_lifted(model: &FactorModel) -> Result<LiftedCovariance> {
    let q = model.q().ok_or(Error::MissingMixing)?;
    let s11 = SymMatrix::new(model.cov_mat())?;
    let s12 = model.h().matmul(q);
    let s22 = SymMatrix::new(q.transpose().matmul(q))?;
    LiftedCovariance::from_blocks(&s11, &s12, &s22)
}

/// Minimize `D(S' || sigma)` over block covariances `S'` whose upper-left
/// block is pinned to `s0`. The minimizer has blocks
///
/// ```text
/// S*11 = S0
/// S*12 = S0 S11^-1 S12
/// S*22 = S22 - S21 S11^-1 (S11 - S0) S11^-1 S12
/// ```
///
/// and the upper-left block of the output is `s0` copied verbatim.
pub fn first_partial_min(
    s0: &CovarianceMatrix,
    sigma: &LiftedCovariance,
) -> Result<LiftedCovariance> {
    if s0.dim() != sigma.n() {
        return Err(Error::dim(format!(
            "target covariance has dimension {} but the lifted block is {}",
            s0.dim(),
            sigma.n()
        )));
    }
    let s11 = sigma.s11();
    let s12 = sigma.s12();
    let s22 = sigma.s22();

    let s11_chol = Cholesky::factor(&s11)?;
    let x = s11_chol.solve_mat(&s12); // S11^-1 S12
    let s12_star = s0.mat().matmul(&x);
    // S22 - S21 X + X^T S0 X
    let s22_star = SymMatrix::new(
        s22.mat()
            .sub(&s12.transpose().matmul(&x))
            .add(&x.transpose().matmul(&s0.mat().matmul(&x))),
    )?;
    LiftedCovariance::from_blocks(s0.sym(), &s12_star, &s22_star)
}

/// Minimize `D(sigma || .)` over lifted factor models. Returns the optimal
/// model
///
/// ```text
/// Q* = sqrt(S22),  H* = S12 Q*^-1,  D* = diag(S11 - S12 S22^-1 S21)
/// ```
///
/// together with its lift, whose off-diagonal and lower-right blocks are the
/// input's, copied verbatim.
pub fn second_partial_min(sigma: &LiftedCovariance) -> Result<(FactorModel, LiftedCovariance)> {
    let s11 = sigma.s11();
    let s12 = sigma.s12();
    let s22 = sigma.s22();

    let q_star = sqrt_factor(&s22)?;
    let h_star = solve_right_upper(&s12, &q_star); // S12 Q*^-1
    let common = h_star.matmul(&h_star.transpose()); // S12 S22^-1 S21

    let n = sigma.n();
    let mut d_star = Vec::with_capacity(n);
    for i in 0..n {
        let v = s11[(i, i)] - common[(i, i)];
        if !(v > 0.0) {
            return Err(Error::Internal(format!(
                "optimal noise variance {i} is not positive; input covariance is not definite enough"
            )));
        }
        d_star.push(v);
    }

    // Upper-left block of the lift: common off the diagonal, the input's
    // diagonal on it (the two agree analytically).
    let mut ul = common.clone();
    for i in 0..n {
        ul[(i, i)] = s11[(i, i)];
    }
    let lifted = LiftedCovariance::from_blocks(&SymMatrix::new(ul)?, &s12, &s22)?;
    let model = FactorModel::with_mixing(h_star, d_star, q_star)?;
    Ok((model, lifted))
}

/// Residual of the Pythagorean law for the first partial minimization:
/// `|D(S'||sigma) - D(S'||S*) - D(S*||sigma)|`. Valid triples (where
/// `sprime` shares the pinned upper-left block that produced `sstar`) keep
/// this below 1e-9.
pub fn pythagoras_first(
    sprime: &LiftedCovariance,
    sstar: &LiftedCovariance,
    sigma: &LiftedCovariance,
) -> Result<f64> {
    check_equal_shape(sprime, sstar)?;
    check_equal_shape(sstar, sigma)?;
    let total = i_divergence(sprime.whole(), sigma.whole())?;
    let leg1 = i_divergence(sprime.whole(), sstar.whole())?;
    let leg2 = i_divergence(sstar.whole(), sigma.whole())?;
    Ok((total - leg1 - leg2).abs())
}

/// Residual of the Pythagorean law for the second partial minimization:
/// `|D(sigma||cand) - D(sigma||S1*) - D(S1*||cand)|` for a candidate factor
/// model with mixing factor present.
pub fn pythagoras_second(
    sigma: &LiftedCovariance,
    sstar1: &LiftedCovariance,
    candidate: &FactorModel,
) -> Result<f64> {
    check_equal_shape(sigma, sstar1)?;
    let cand = assemble_lifted(candidate)?;
    check_equal_shape(sigma, &cand)?;
    let total = i_divergence(sigma.whole(), cand.whole())?;
    let leg1 = i_divergence(sigma.whole(), sstar1.whole())?;
    let leg2 = i_divergence(sstar1.whole(), cand.whole())?;
    Ok((total - leg1 - leg2).abs())
}

fn check_equal_shape(a: &LiftedCovariance, b: &LiftedCovariance) -> Result<()> {
    if a.n() != b.n() || a.k() != b.k() {
        return Err(Error::dim(format!(
            "lifted covariances of shapes {}+{} and {}+{}",
            a.n(),
            a.k(),
            b.n(),
            b.k()
        )));
    }
    Ok(())
}

/// Witness check: does `model` reproduce `s0` exactly (up to a relative
/// max-abs residual of [`EXACT_FA_REL_TOL`])? This certifies membership of
/// the exact-fit set; it does not decide whether such a model exists.
pub fn exact_fa_diagnostic(s0: &CovarianceMatrix, model: &FactorModel) -> Result<bool> {
    if model.n() != s0.dim() {
        return Err(Error::dim(format!(
            "model has {} rows but the covariance has dimension {}",
            model.n(),
            s0.dim()
        )));
    }
    let resid = s0.mat().max_abs_diff(&model.cov_mat());
    Ok(resid < EXACT_FA_REL_TOL * s0.max_abs())
}
