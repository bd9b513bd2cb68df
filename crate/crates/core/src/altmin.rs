//! Alternating minimization of `D(S0 || H H^T + D)`.
//!
//! Each iteration is the composition of the two closed-form partial
//! minimizations of [`crate::lifted`], collapsed to updates in the model
//! parameters. Two equivalent variants are provided: one updates `(H, D)`
//! directly through a square root of the `k x k` update factor `R`, the
//! other propagates `(K, P, D)` and defers the square root to a single final
//! extraction. Both drive the objective monotonically downward.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::divergence::{objective, CovarianceMatrix};
use crate::error::{Error, Result};
use crate::lifted::FactorModel;
use crate::matops::{
    eigen_sym, min_eigenvalue, solve_right_upper, sqrt_factor, Cholesky, Mat, SymMatrix,
};
use crate::rng::SplitMix64;

/// Relative residual of `S0 - (H H^T + D)` below which the iteration stops
/// as an exact fit.
pub const EXACT_STOP_REL_TOL: f64 = 1e-12;

/// Absolute slack allowed on the per-iterate diagonal bound `D_ii <= S0_ii`.
pub const DIAG_BOUND_SLACK: f64 = 1e-12;

/// Slack on the per-iterate semidefinite bound `H H^T <= S0`.
pub const PSD_BOUND_SLACK: f64 = 1e-9;

/// Residual certification required before a decrement stall may terminate
/// as converged. A vanishing decrement alone does not certify stationarity:
/// the fixed-point residuals scale like the square root of the remaining
/// objective gap, so they can still be orders of magnitude above the
/// fixed-point tolerance when the objective stops moving in floating point.
pub const STALL_RESIDUAL_TOL: f64 = 1e-8;

/// Which update scheme the solver iterates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// Direct `(H, D)` updates with a square root per iteration.
    Alg1,
    /// Square-root-free `(K, P, D)` updates with one final extraction.
    Alg2,
}

/// How the starting model is produced.
#[derive(Debug, Clone)]
pub enum Init {
    /// Top-`k` eigenvectors of `S0`, each scaled by `sqrt(eigenvalue / 2)`.
    PrincipalComponents,
    /// Seeded random loadings (full rank enforced, retried with fresh draws).
    RandomSeeded(u64),
    /// A caller-provided model, validated and passed through.
    Explicit(FactorModel),
}

/// Solver configuration.
#[derive(Debug, Clone)]
pub struct FitConfig {
    /// Number of factors; must satisfy `1 <= k < n`.
    pub k: usize,
    pub variant: Variant,
    pub init: Init,
    pub max_iter: usize,
    /// Stop when the objective decrease falls below this.
    pub tol_divergence_decrement: f64,
    /// Stop when both fixed-point residuals fall below this.
    pub tol_fixed_point: f64,
    /// Noise-variance floor, relative to the largest diagonal entry of `S0`.
    pub diag_floor: f64,
    /// Run the per-iterate bound checks (diagonal and semidefinite bounds,
    /// rank monitoring). Costs an eigendecomposition per iteration.
    pub validate: bool,
}

impl FitConfig {
    pub fn new(k: usize) -> Self {
        FitConfig {
            k,
            variant: Variant::Alg1,
            init: Init::PrincipalComponents,
            max_iter: 10_000,
            tol_divergence_decrement: 1e-12,
            tol_fixed_point: 1e-9,
            diag_floor: 1e-10,
            validate: true,
        }
    }

    fn validate_against(&self, n: usize) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidConfig("k must be at least 1".into()));
        }
        if self.k >= n {
            return Err(Error::InvalidConfig(format!(
                "k must be < n (got k={}, n={n})",
                self.k
            )));
        }
        if !(self.tol_divergence_decrement > 0.0)
            || !(self.tol_fixed_point > 0.0)
            || !(self.diag_floor > 0.0)
        {
            return Err(Error::InvalidConfig(
                "tolerances and the diagonal floor must be positive".into(),
            ));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidConfig("max_iter must be at least 1".into()));
        }
        if let Init::Explicit(m) = &self.init {
            if m.k() != self.k {
                return Err(Error::InvalidConfig(format!(
                    "explicit initial model has {} factors but k={}",
                    m.k(),
                    self.k
                )));
            }
        }
        Ok(())
    }
}

/// Why the iteration ended.
#[derive(Debug, Clone, PartialEq)]
pub enum Termination {
    /// A stopping tolerance was met.
    Converged,
    /// The iteration budget ran out first.
    MaxIter,
    /// The current model already reproduces `S0` to working precision.
    ExactModelStop,
    /// An update lost numerical validity; the reason is recorded and the
    /// trace holds everything up to the failure.
    NumericalBreakdown(String),
}

/// One row of the iteration trace.
#[derive(Debug, Clone)]
pub struct IterRecord {
    pub iter: usize,
    pub objective: f64,
    /// Objective decrease realized by this iteration (zero for the record
    /// of the initial model).
    pub decrement: f64,
    pub fixed_point_res_h: f64,
    pub fixed_point_res_d: f64,
    pub min_d: f64,
    /// Smallest eigenvalue of `S0 - H H^T`; `None` when validation is off.
    pub psd_slack: Option<f64>,
    /// Bound-violation flags; meaningful from iteration 1 on (the initial
    /// model is unconstrained).
    pub d_bound_violation: bool,
    pub psd_violation: bool,
    /// Noise-variance entries caught by the floor in this iteration.
    pub floor_hits: u32,
}

/// Full per-iteration record of a solver run.
#[derive(Debug, Clone)]
pub struct FitTrace {
    pub records: Vec<IterRecord>,
    pub termination: Termination,
    pub warnings: Vec<String>,
}

/// Solver output: the fitted model (mixing factor absent), the final
/// objective, the trace, the configuration echo and a fingerprint of the
/// input covariance.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub model: FactorModel,
    pub objective: f64,
    pub trace: FitTrace,
    pub config: FitConfig,
    pub input_fingerprint: u64,
}

impl FitResult {
    pub fn iterations(&self) -> usize {
        self.trace.records.last().map_or(0, |r| r.iter)
    }
}

fn floored_residual_diag(s0: &CovarianceMatrix, h: &Mat, floor_abs: f64) -> (Vec<f64>, u32) {
    let hh = h.matmul(&h.transpose());
    let mut hits = 0;
    let d = (0..s0.dim())
        .map(|i| {
            let v = s0.mat()[(i, i)] - hh[(i, i)];
            if v < floor_abs {
                hits += 1;
                floor_abs
            } else {
                v
            }
        })
        .collect();
    (d, hits)
}

/// Smallest and largest singular values of `H`, via the Gram matrix.
fn singular_extent(h: &Mat) -> Result<(f64, f64)> {
    let gram = SymMatrix::new(h.transpose().matmul(h))?;
    let eig = eigen_sym(&gram)?;
    let lo = eig.values[0].max(0.0);
    let hi = eig.values[eig.values.len() - 1].max(0.0);
    Ok((libm::sqrt(lo), libm::sqrt(hi)))
}

fn full_rank(h: &Mat) -> Result<bool> {
    let (lo, hi) = singular_extent(h)?;
    Ok(hi > 0.0 && lo > 1e-10 * hi)
}

/// Produce the starting model for a fit.
pub fn init_model(s0: &CovarianceMatrix, cfg: &FitConfig) -> Result<FactorModel> {
    cfg.validate_against(s0.dim())?;
    let n = s0.dim();
    let k = cfg.k;
    let floor_abs = cfg.diag_floor * s0.max_diag();

    match &cfg.init {
        Init::PrincipalComponents => {
            let eig = eigen_sym(s0.sym())?;
            let h = Mat::from_fn(n, k, |i, j| {
                let src = n - 1 - j; // eigenvalues ascending; take the top k
                eig.vectors[(i, src)] * libm::sqrt(0.5 * eig.values[src])
            });
            finish_init(s0, h, floor_abs, 0x09d1_ce5e_ed42)
        }
        Init::RandomSeeded(seed) => {
            let mut rng = SplitMix64::new(*seed);
            // Row-wise scaling keeps (H0 H0^T)_ii below half the matching
            // diagonal entry of S0, so the residual diagonal starts healthy.
            let h = Mat::from_fn(n, k, |i, _| {
                rng.symmetric() * libm::sqrt(0.5 * s0.mat()[(i, i)] / k as f64)
            });
            finish_init(s0, h, floor_abs, seed ^ 0x09d1_ce5e_ed42)
        }
        Init::Explicit(m) => {
            if m.n() != n {
                return Err(Error::dim(format!(
                    "explicit initial model has {} rows but the covariance has dimension {n}",
                    m.n()
                )));
            }
            if !full_rank(m.h())? {
                return Err(Error::InvalidConfig(
                    "explicit initial loading matrix is rank-deficient".into(),
                ));
            }
            Ok(m.clone().without_mixing())
        }
    }
}

/// Floor the diagonal, enforce full rank (retrying with seeded jitter), and
/// package the model.
fn finish_init(
    s0: &CovarianceMatrix,
    mut h: Mat,
    floor_abs: f64,
    jitter_seed: u64,
) -> Result<FactorModel> {
    let mut rng = SplitMix64::new(jitter_seed);
    for _ in 0..3 {
        if full_rank(&h)? {
            let (d, _) = floored_residual_diag(s0, &h, floor_abs);
            return FactorModel::new(h, d);
        }
        let jitter = 1e-3 * libm::sqrt(s0.max_diag());
        h = Mat::from_fn(h.rows(), h.cols(), |i, j| {
            h[(i, j)] + jitter * rng.symmetric()
        });
    }
    Err(Error::Breakdown(
        "initialization failed to produce a full-rank loading matrix".into(),
    ))
}

/// One `(H, D)` update. Computes the `k x k` factor
///
/// ```text
/// R = I - H^T M^-1 (M - S0) M^-1 H,    M = H H^T + D
/// ```
///
/// then `H+ = S0 M^-1 H R^{-1/2}` and `D+ = diag(S0 - H+ H+^T)`, with
/// `M^-1 H` routed through the Woodbury identity `D^-1 H (I + H^T D^-1 H)^-1`
/// and the square root fixed to the upper-triangular Cholesky convention.
pub fn alg1_step(s0: &CovarianceMatrix, model: &FactorModel) -> Result<FactorModel> {
    let floor_abs = 1e-10 * s0.max_diag();
    Ok(step_alg1(s0, model, floor_abs)?.0)
}

fn step_alg1(
    s0: &CovarianceMatrix,
    model: &FactorModel,
    floor_abs: f64,
) -> Result<(FactorModel, u32)> {
    let n = s0.dim();
    if model.n() != n {
        return Err(Error::dim(format!(
            "model has {} rows but the covariance has dimension {n}",
            model.n()
        )));
    }
    let k = model.k();
    let h = model.h();
    let d = model.d();

    // W = M^-1 H = D^-1 H (I + H^T D^-1 H)^-1
    let g = Mat::from_fn(n, k, |i, j| h[(i, j)] / d[i]);
    let small = SymMatrix::new(Mat::identity(k).add(&h.transpose().matmul(&g)))?;
    let small_chol = Cholesky::factor(&small)
        .map_err(|e| Error::Breakdown(format!("capacitance matrix lost definiteness: {e}")))?;
    let w = small_chol.solve_mat(&g.transpose()).transpose();

    // R = I - H^T W + W^T S0 W, symmetrized before factorization.
    let s0w = s0.mat().matmul(&w);
    let r = Mat::identity(k)
        .sub(&h.transpose().matmul(&w))
        .add(&w.transpose().matmul(&s0w));
    let r_sym = SymMatrix::new(r)?;
    let root = sqrt_factor(&r_sym)
        .map_err(|e| Error::Breakdown(format!("update factor R is not positive definite: {e}")))?;

    let h_new = solve_right_upper(&s0w, &root);
    if !h_new.is_finite() {
        return Err(Error::Breakdown("loading update produced non-finite entries".into()));
    }
    let (d_new, hits) = floored_residual_diag(s0, &h_new, floor_abs);
    Ok((FactorModel::new(h_new, d_new)?, hits))
}

/// One `(K, P, D)` update:
///
/// ```text
/// K+ = S0 M^-1 K,
/// P+ = P - K^T M^-1 (M - S0) M^-1 K,      M = K P^-1 K^T + D
/// D+ = diag(S0 - K+ P+^-1 K+^T)
/// ```
///
/// with `M^-1 K` routed through `D^-1 K (P + K^T D^-1 K)^-1 P`.
pub fn alg2_step(
    s0: &CovarianceMatrix,
    k_mat: &Mat,
    p: &SymMatrix,
    d: &[f64],
) -> Result<(Mat, SymMatrix, Vec<f64>)> {
    let floor_abs = 1e-10 * s0.max_diag();
    let (k2, p2, d2, _) = step_alg2(s0, k_mat, p, d, floor_abs)?;
    Ok((k2, p2, d2))
}

fn step_alg2(
    s0: &CovarianceMatrix,
    k_mat: &Mat,
    p: &SymMatrix,
    d: &[f64],
    floor_abs: f64,
) -> Result<(Mat, SymMatrix, Vec<f64>, u32)> {
    let n = s0.dim();
    let k = k_mat.cols();
    if k_mat.rows() != n || d.len() != n || p.dim() != k {
        return Err(Error::dim(format!(
            "update state shapes K {}x{}, P {}, D {} incompatible with dimension {n}",
            k_mat.rows(),
            k_mat.cols(),
            p.dim(),
            d.len()
        )));
    }
    for (i, &v) in d.iter().enumerate() {
        if !(v > 0.0) {
            return Err(Error::NonPositiveDiagonal { index: i });
        }
    }

    // Wk = M^-1 K = D^-1 K (P + K^T D^-1 K)^-1 P
    let g = Mat::from_fn(n, k, |i, j| k_mat[(i, j)] / d[i]);
    let small = SymMatrix::new(p.mat().add(&k_mat.transpose().matmul(&g)))?;
    let small_chol = Cholesky::factor(&small)
        .map_err(|e| Error::Breakdown(format!("capacitance matrix lost definiteness: {e}")))?;
    let wk = g.matmul(&small_chol.solve_mat(p.mat()));

    let k_new = s0.mat().matmul(&wk);
    let p_new = SymMatrix::new(
        p.mat()
            .sub(&k_mat.transpose().matmul(&wk))
            .add(&wk.transpose().matmul(&k_new)),
    )?;
    let p_new_chol = Cholesky::factor(&p_new).map_err(|e| {
        Error::Breakdown(format!(
            "mixing covariance P lost definiteness after the update: {e}"
        ))
    })?;

    // D+ = diag(S0 - K+ P+^-1 K+^T), floored.
    let x = p_new_chol.solve_mat(&k_new.transpose());
    let mut hits = 0;
    let mut d_new = Vec::with_capacity(n);
    for i in 0..n {
        let mut low_rank = 0.0;
        for j in 0..k {
            low_rank += k_new[(i, j)] * x[(j, i)];
        }
        let v = s0.mat()[(i, i)] - low_rank;
        if v < floor_abs {
            hits += 1;
            d_new.push(floor_abs);
        } else {
            d_new.push(v);
        }
    }
    if !k_new.is_finite() {
        return Err(Error::Breakdown("factor update produced non-finite entries".into()));
    }
    Ok((k_new, p_new, d_new, hits))
}

/// Recover the loading matrix from `(K, P)`: `H = K Q^-1` with
/// `Q = sqrt(P)` in the upper-triangular convention.
pub fn extract_loading(k_mat: &Mat, p: &SymMatrix) -> Result<Mat> {
    let q = sqrt_factor(p)?;
    Ok(solve_right_upper(k_mat, &q))
}

/// Normalized max-abs residuals of the two stationarity relations
///
/// ```text
/// H = (S0 - H H^T) D^-1 H        and        D = diag(S0 - H H^T)
/// ```
///
/// satisfied by limit points of either variant.
pub fn fixed_point_residual(s0: &CovarianceMatrix, model: &FactorModel) -> Result<(f64, f64)> {
    let n = s0.dim();
    if model.n() != n {
        return Err(Error::dim(format!(
            "model has {} rows but the covariance has dimension {n}",
            model.n()
        )));
    }
    let h = model.h();
    let d = model.d();
    let hh = h.matmul(&h.transpose());
    let resid = s0.mat().sub(&hh);

    let g = Mat::from_fn(n, model.k(), |i, j| h[(i, j)] / d[i]);
    let res_h = h.max_abs_diff(&resid.matmul(&g)) / h.max_abs().max(1.0);

    let mut num = 0.0f64;
    let mut den = 0.0f64;
    for i in 0..n {
        num = num.max((d[i] - resid[(i, i)]).abs());
        den = den.max(d[i].abs());
    }
    Ok((res_h, num / den.max(1.0)))
}

/// Max-abs central-difference gradient of the objective in the model
/// parameters `(H, diag D)`, with `D` perturbations kept positive. `h_step`
/// scales with each parameter's magnitude (floored at 1).
pub fn stationarity_check(
    s0: &CovarianceMatrix,
    model: &FactorModel,
    h_step: f64,
) -> Result<f64> {
    if !(h_step > 0.0) {
        return Err(Error::InvalidConfig("finite-difference step must be positive".into()));
    }
    let n = model.n();
    let k = model.k();
    let h0 = model.h().clone();
    let d0 = model.d().to_vec();
    let eval = |h: Mat, d: Vec<f64>| -> Result<f64> { objective(s0, &FactorModel::new(h, d)?) };

    let mut max_grad = 0.0f64;
    for i in 0..n {
        for j in 0..k {
            let x = h0[(i, j)];
            let step = h_step * x.abs().max(1.0);
            let mut hp = h0.clone();
            hp[(i, j)] = x + step;
            let mut hm = h0.clone();
            hm[(i, j)] = x - step;
            let grad = (eval(hp, d0.clone())? - eval(hm, d0.clone())?) / (2.0 * step);
            max_grad = max_grad.max(grad.abs());
        }
    }
    for i in 0..n {
        let x = d0[i];
        let mut step = h_step * x.abs().max(1.0);
        if x - step <= 0.0 {
            step = 0.5 * x;
        }
        let mut dp = d0.clone();
        dp[i] = x + step;
        let mut dm = d0.clone();
        dm[i] = x - step;
        let grad = (eval(h0.clone(), dp)? - eval(h0.clone(), dm)?) / (2.0 * step);
        max_grad = max_grad.max(grad.abs());
    }
    Ok(max_grad)
}

enum LoopState {
    Direct,
    Lifted { k: Mat, p: SymMatrix, d: Vec<f64> },
}

/// Run the configured variant to a stopping tolerance, the iteration cap or
/// an exact fit, recording a trace row per iteration. Numerical breakdown is
/// reported through [`Termination::NumericalBreakdown`] with the trace
/// prefix intact; hard input errors are returned as `Err`.
pub fn fit(s0: &CovarianceMatrix, cfg: FitConfig) -> Result<FitResult> {
    cfg.validate_against(s0.dim())?;
    let floor_abs = cfg.diag_floor * s0.max_diag();
    let exact_tol = EXACT_STOP_REL_TOL * s0.max_abs();

    let mut model = init_model(s0, &cfg)?;
    let mut state = match cfg.variant {
        Variant::Alg1 => LoopState::Direct,
        Variant::Alg2 => LoopState::Lifted {
            k: model.h().clone(),
            p: SymMatrix::identity(cfg.k),
            d: model.d().to_vec(),
        },
    };

    let mut records: Vec<IterRecord> = Vec::new();
    let mut warnings: Vec<String> = Vec::new();
    let mut rank_warned = false;

    let mut obj_prev = objective(s0, &model)?;
    records.push(build_record(s0, &model, &cfg, 0, obj_prev, 0.0, 0, false)?);

    let mut termination = Termination::MaxIter;
    for t in 1..=cfg.max_iter {
        if s0.mat().max_abs_diff(&model.cov_mat()) < exact_tol {
            termination = Termination::ExactModelStop;
            break;
        }

        let stepped: Result<(FactorModel, u32)> = match &mut state {
            LoopState::Direct => step_alg1(s0, &model, floor_abs),
            LoopState::Lifted { k, p, d } => match step_alg2(s0, k, p, d, floor_abs) {
                Ok((k2, p2, d2, hits)) => match extract_loading(&k2, &p2) {
                    Ok(h) => {
                        let m = FactorModel::new(h, d2.clone())?;
                        *k = k2;
                        *p = p2;
                        *d = d2;
                        Ok((m, hits))
                    }
                    Err(e) => Err(Error::Breakdown(format!("loading extraction failed: {e}"))),
                },
                Err(e) => Err(e),
            },
        };
        let (new_model, floor_hits) = match stepped {
            Ok(v) => v,
            Err(
                e @ (Error::Breakdown(_)
                | Error::NotPositiveDefinite { .. }
                | Error::Singular { .. }
                | Error::Internal(_)),
            ) => {
                termination = Termination::NumericalBreakdown(format!("iteration {t}: {e}"));
                break;
            }
            Err(e) => return Err(e),
        };

        let obj = match objective(s0, &new_model) {
            Ok(v) => v,
            Err(e) => {
                termination =
                    Termination::NumericalBreakdown(format!("iteration {t}: objective: {e}"));
                break;
            }
        };
        let decrement = obj_prev - obj;
        if decrement < -DIAG_BOUND_SLACK {
            warnings.push(format!(
                "objective increased by {:.3e} at iteration {t}",
                -decrement
            ));
        }

        model = new_model;
        obj_prev = obj;
        let record = build_record(s0, &model, &cfg, t, obj, decrement, floor_hits, true)?;
        if cfg.validate && !rank_warned {
            let (lo, hi) = singular_extent(model.h())?;
            if hi == 0.0 || lo <= 1e-12 * hi {
                warnings.push(format!("loading matrix near rank collapse at iteration {t}"));
                rank_warned = true;
            }
        }
        // Converged means certified: either both residuals are below the
        // fixed-point tolerance, or the objective has stalled below the
        // decrement tolerance with residuals already small. A stall without
        // small residuals keeps iterating (the parameter contraction keeps
        // making progress after the objective plateaus in floating point).
        let residuals_tight = record.fixed_point_res_h < cfg.tol_fixed_point
            && record.fixed_point_res_d < cfg.tol_fixed_point;
        let certified_stall = record.decrement < cfg.tol_divergence_decrement
            && record.fixed_point_res_h < STALL_RESIDUAL_TOL
            && record.fixed_point_res_d < STALL_RESIDUAL_TOL;
        records.push(record);
        if residuals_tight || certified_stall {
            termination = Termination::Converged;
            break;
        }
    }

    Ok(FitResult {
        objective: obj_prev,
        trace: FitTrace {
            records,
            termination,
            warnings,
        },
        config: cfg,
        input_fingerprint: s0.fingerprint(),
        model,
    })
}

#[allow(clippy::too_many_arguments)]
fn build_record(
    s0: &CovarianceMatrix,
    model: &FactorModel,
    cfg: &FitConfig,
    iter: usize,
    obj: f64,
    decrement: f64,
    floor_hits: u32,
    constrained: bool,
) -> Result<IterRecord> {
    let (res_h, res_d) = fixed_point_residual(s0, model)?;
    let min_d = model.d().iter().copied().fold(f64::INFINITY, f64::min);

    let mut d_bound_violation = false;
    if constrained {
        for i in 0..s0.dim() {
            let di = model.d()[i];
            if !(di > 0.0) || di > s0.mat()[(i, i)] + DIAG_BOUND_SLACK {
                d_bound_violation = true;
            }
        }
    }

    let (psd_slack, psd_violation) = if cfg.validate {
        let hh = SymMatrix::new(model.h().matmul(&model.h().transpose()))?;
        let slack = min_eigenvalue(&s0.sym().sub(&hh))?;
        (Some(slack), constrained && slack < -PSD_BOUND_SLACK)
    } else {
        (None, false)
    };

    Ok(IterRecord {
        iter,
        objective: obj,
        decrement,
        fixed_point_res_h: res_h,
        fixed_point_res_d: res_d,
        min_d,
        psd_slack,
        d_bound_violation,
        psd_violation,
        floor_hits,
    })
}
