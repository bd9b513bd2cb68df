//! Synthetic problem generation and the independent probe oracles the test
//! suites run against. Everything here is a pure, seed-deterministic
//! function of its inputs.

use alloc::format;
use alloc::vec::Vec;

use crate::divergence::{i_divergence, CovarianceMatrix};
use crate::error::{Error, Result};
use crate::lifted::{
    assemble_lifted, first_partial_min, second_partial_min, FactorModel, LiftedCovariance,
};
use crate::matops::{eigen_sym, Cholesky, Lu, Mat, SymMatrix};
use crate::rng::SplitMix64;

/// Eigenvalue floor used when projecting a perturbed covariance back to the
/// positive-definite cone.
const CLIP_EIGENVALUE: f64 = 1e-6;

/// Recipe for a synthetic problem instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticSpec {
    pub n: usize,
    pub k: usize,
    /// Scale of the uniform `[-1, 1)` loading entries.
    pub loading_scale: f64,
    /// Scale of the uniform `(0.1, 1.1)` noise variances.
    pub noise_scale: f64,
    /// Magnitude of the symmetric perturbation added to the exact model
    /// covariance; zero keeps the instance exactly representable.
    pub perturbation: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn new(n: usize, k: usize, seed: u64) -> Self {
        SyntheticSpec {
            n,
            k,
            loading_scale: 1.0,
            noise_scale: 1.0,
            perturbation: 0.0,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.k == 0 || self.k >= self.n {
            return Err(Error::InvalidConfig(format!(
                "k must be < n (got k={}, n={})",
                self.k, self.n
            )));
        }
        if !(self.loading_scale > 0.0) || !(self.noise_scale > 0.0) {
            return Err(Error::InvalidConfig("scales must be positive".into()));
        }
        if !(self.perturbation >= 0.0) {
            return Err(Error::InvalidConfig("perturbation must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Draw a ground-truth model and its target covariance
/// `S0 = H H^T + D + perturbation * W`, with `W` a symmetrized uniform
/// noise matrix and the result projected back to the positive-definite cone
/// by eigenvalue clipping when the perturbation pushes it out.
pub fn plant_model(spec: &SyntheticSpec) -> Result<(FactorModel, CovarianceMatrix)> {
    spec.validate()?;
    let mut rng = SplitMix64::new(spec.seed);
    let h = Mat::from_fn(spec.n, spec.k, |_, _| spec.loading_scale * rng.symmetric());
    let d: Vec<f64> = (0..spec.n)
        .map(|_| spec.noise_scale * rng.uniform(0.1, 1.1))
        .collect();
    let truth = FactorModel::new(h, d)?;

    let mut s0 = truth.cov_mat();
    if spec.perturbation > 0.0 {
        let g = Mat::from_fn(spec.n, spec.n, |_, _| rng.symmetric());
        let w = g.add(&g.transpose()).scale(0.5);
        s0 = s0.add(&w.scale(spec.perturbation));
        let sym = SymMatrix::new(s0)?;
        let eig = eigen_sym(&sym)?;
        if eig.values[0] < CLIP_EIGENVALUE {
            let clipped: Vec<f64> = eig
                .values
                .iter()
                .map(|&v| v.max(CLIP_EIGENVALUE))
                .collect();
            s0 = eig
                .vectors
                .matmul(&Mat::from_diag(&clipped))
                .matmul(&eig.vectors.transpose());
        } else {
            s0 = sym.into_mat();
        }
    }
    let s0 = CovarianceMatrix::from_mat(s0)
        .map_err(|e| Error::Generation(format!("covariance failed definiteness after clipping: {e}")))?;
    Ok((truth, s0))
}

/// Sample covariance `(1/m) X^T X` of mean-centered observation rows.
/// Requires more observations than variables; a rank-deficient result is an
/// error unless `ridge` is set, in which case `1e-8 * trace/n` is added to
/// the diagonal.
pub fn sample_covariance(data: &Mat, ridge: bool) -> Result<CovarianceMatrix> {
    let m = data.rows();
    let n = data.cols();
    if m <= n {
        return Err(Error::dim(format!(
            "need more observations than variables to form a covariance (got {m} rows for {n} columns)"
        )));
    }
    let mut means = alloc::vec![0.0; n];
    for i in 0..m {
        for j in 0..n {
            means[j] += data[(i, j)];
        }
    }
    for mj in means.iter_mut() {
        *mj /= m as f64;
    }
    let mut cov = Mat::zeros(n, n);
    for i in 0..m {
        for a in 0..n {
            let va = data[(i, a)] - means[a];
            for b in a..n {
                let vb = data[(i, b)] - means[b];
                cov[(a, b)] += va * vb;
            }
        }
    }
    for a in 0..n {
        for b in a..n {
            let v = cov[(a, b)] / m as f64;
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
    }
    if ridge {
        let eps = 1e-8 * cov.trace() / n as f64;
        for i in 0..n {
            cov[(i, i)] += eps;
        }
    }
    CovarianceMatrix::from_mat(cov).map_err(|e| match e {
        Error::NotPositiveDefinite { pivot_index } => Error::Dimension(format!(
            "sample covariance is rank deficient (pivot {pivot_index}); re-run with ridge regularization enabled"
        )),
        other => other,
    })
}

/// Falsification sweep for the second partial minimization: the smallest
/// divergence over `trials` random feasible lifted models, minus the
/// closed-form optimum. Nonnegative up to floating-point noise.
///
/// Probe 0 is the minimizer itself; later probes alternate between scaled
/// perturbations of the minimizer and fresh random models, so the sweep
/// explores both the neighborhood of the claimed optimum and the bulk of
/// the feasible set.
pub fn probe_oracle_second_min(
    sigma: &LiftedCovariance,
    trials: usize,
    seed: u64,
) -> Result<f64> {
    if trials == 0 {
        return Err(Error::InvalidConfig("at least one probe trial is required".into()));
    }
    let (opt, star) = second_partial_min(sigma)?;
    let optimum = i_divergence(sigma.whole(), star.whole())?;

    let mut rng = SplitMix64::new(seed);
    let mut best = f64::INFINITY;
    for trial in 0..trials {
        let candidate = if trial == 0 {
            opt.clone()
        } else if trial % 2 == 1 {
            perturbed_model(&opt, &mut rng)?
        } else {
            random_feasible_model(sigma.n(), sigma.k(), &mut rng)?
        };
        let lifted = assemble_lifted(&candidate)?;
        let value = i_divergence(sigma.whole(), lifted.whole())?;
        best = best.min(value);
    }
    Ok(best - optimum)
}

/// Falsification sweep for the first partial minimization: the smallest
/// divergence over `trials` random members of the pinned slice, minus the
/// closed-form optimum.
pub fn probe_oracle_first_min(
    s0: &CovarianceMatrix,
    sigma: &LiftedCovariance,
    trials: usize,
    seed: u64,
) -> Result<f64> {
    if trials == 0 {
        return Err(Error::InvalidConfig("at least one probe trial is required".into()));
    }
    let star = first_partial_min(s0, sigma)?;
    let optimum = i_divergence(star.whole(), sigma.whole())?;

    let mut rng = SplitMix64::new(seed);
    let mut best = f64::INFINITY;
    for trial in 0..trials {
        let candidate = if trial == 0 {
            star.clone()
        } else {
            perturbed_slice_member(&star, &mut rng)?
        };
        let value = i_divergence(candidate.whole(), sigma.whole())?;
        best = best.min(value);
    }
    Ok(best - optimum)
}

/// Random perturbation of a model, scale drawn log-uniformly in
/// `[1e-4, 1e0]`; the mixing factor is redrawn until invertible.
fn perturbed_model(base: &FactorModel, rng: &mut SplitMix64) -> Result<FactorModel> {
    let eps = libm::pow(10.0, rng.uniform(-4.0, 0.0));
    let h = Mat::from_fn(base.n(), base.k(), |i, j| {
        base.h()[(i, j)] + eps * rng.symmetric()
    });
    let d: Vec<f64> = base
        .d()
        .iter()
        .map(|&v| v * (1.0 + 0.9 * eps.min(1.0) * rng.symmetric()))
        .collect();
    let q_base = base.q().expect("perturbation base carries a mixing factor");
    loop {
        let q = Mat::from_fn(base.k(), base.k(), |i, j| {
            q_base[(i, j)] + eps * rng.symmetric()
        });
        if Lu::factor(&q).is_ok() {
            return FactorModel::with_mixing(h, d, q);
        }
    }
}

fn random_feasible_model(n: usize, k: usize, rng: &mut SplitMix64) -> Result<FactorModel> {
    let h = Mat::from_fn(n, k, |_, _| rng.symmetric());
    let d: Vec<f64> = (0..n).map(|_| rng.uniform(0.1, 1.1)).collect();
    loop {
        let mut q = Mat::from_fn(k, k, |_, _| rng.symmetric());
        for i in 0..k {
            q[(i, i)] += 1.0;
        }
        if Lu::factor(&q).is_ok() {
            return FactorModel::with_mixing(h, d, q);
        }
    }
}

/// Random member of the pinned slice near `star`: perturb the off-diagonal
/// and lower-right blocks, shrinking the perturbation until the block matrix
/// stays positive definite.
fn perturbed_slice_member(
    star: &LiftedCovariance,
    rng: &mut SplitMix64,
) -> Result<LiftedCovariance> {
    let n = star.n();
    let k = star.k();
    let s11 = star.s11();
    let base12 = star.s12();
    let base22 = star.s22();
    let mut eps = libm::pow(10.0, rng.uniform(-4.0, 0.0));
    let d12 = Mat::from_fn(n, k, |_, _| rng.symmetric());
    let d22 = Mat::from_fn(k, k, |_, _| rng.symmetric());
    for _ in 0..60 {
        let s12 = base12.add(&d12.scale(eps));
        let mut s22m = base22.mat().add(&d22.add(&d22.transpose()).scale(0.5 * eps));
        // Small diagonal lift keeps the lower block comfortably definite.
        for i in 0..k {
            s22m[(i, i)] += eps * eps;
        }
        let s22 = SymMatrix::new(s22m)?;
        if Cholesky::factor(&s22).is_ok() {
            if let Ok(lifted) = LiftedCovariance::from_blocks(&s11, &s12, &s22) {
                return Ok(lifted);
            }
        }
        eps *= 0.5;
    }
    Err(Error::Generation(
        "failed to draw a positive-definite slice member".into(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lifted::exact_fa_diagnostic;
    use crate::matops::min_eigenvalue;
    use crate::testutil::random_model_parts;

    #[test]
    fn plant_exact_model_passes_diagnostic() {
        let spec = SyntheticSpec::new(6, 2, 3);
        let (truth, s0) = plant_model(&spec).unwrap();
        assert!(exact_fa_diagnostic(&s0, &truth).unwrap());
    }

    #[test]
    fn plant_is_seed_deterministic() {
        let spec = SyntheticSpec::new(6, 2, 7);
        let (t1, s1) = plant_model(&spec).unwrap();
        let (t2, s2) = plant_model(&spec).unwrap();
        assert_eq!(t1.h(), t2.h());
        assert_eq!(t1.d(), t2.d());
        assert_eq!(s1.mat(), s2.mat());
    }

    #[test]
    fn plant_perturbed_is_spd_but_not_exact() {
        let mut spec = SyntheticSpec::new(6, 2, 11);
        spec.perturbation = 0.1;
        let (truth, s0) = plant_model(&spec).unwrap();
        assert!(min_eigenvalue(s0.sym()).unwrap() > 0.0);
        assert!(!exact_fa_diagnostic(&s0, &truth).unwrap());
    }

    #[test]
    fn plant_rejects_bad_spec() {
        assert!(plant_model(&SyntheticSpec::new(4, 4, 0)).is_err());
        let mut spec = SyntheticSpec::new(4, 2, 0);
        spec.noise_scale = 0.0;
        assert!(plant_model(&spec).is_err());
    }

    #[test]
    fn sample_covariance_identical_rows_is_rank_deficient() {
        let data = Mat::from_fn(5, 2, |_, j| j as f64 + 1.0);
        let err = sample_covariance(&data, false);
        match err {
            Err(Error::Dimension(msg)) => assert!(msg.contains("ridge")),
            other => panic!("expected definiteness diagnostic, got {other:?}"),
        }
    }

    #[test]
    fn sample_covariance_scalar_hand_value() {
        // Variance of (1, 2, 3) with divisor m is 2/3.
        let data = Mat::from_rows(3, 1, &[1.0, 2.0, 3.0]);
        let cov = sample_covariance(&data, false).unwrap();
        assert!((cov.mat()[(0, 0)] - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn ridge_rescues_a_rank_deficient_sample() {
        // Third column is the sum of the first two: rank 2 of 3.
        let mut data = Mat::zeros(6, 3);
        let mut rng = SplitMix64::new(5);
        for i in 0..6 {
            data[(i, 0)] = rng.symmetric();
            data[(i, 1)] = rng.symmetric();
            data[(i, 2)] = data[(i, 0)] + data[(i, 1)];
        }
        assert!(sample_covariance(&data, false).is_err());
        let cov = sample_covariance(&data, true).unwrap();
        assert_eq!(cov.dim(), 3);
    }

    #[test]
    fn sample_covariance_concentrates_on_planted_truth() {
        let spec = SyntheticSpec::new(4, 1, 13);
        let (truth, s0) = plant_model(&spec).unwrap();
        // Draw y = H x + e with x standard normal, e ~ N(0, D).
        let mut rng = SplitMix64::new(99);
        let m = 1000;
        let mut data = Mat::zeros(m, 4);
        for r in 0..m {
            let x = rng.standard_normal();
            for c in 0..4 {
                data[(r, c)] =
                    truth.h()[(c, 0)] * x + libm::sqrt(truth.d()[c]) * rng.standard_normal();
            }
        }
        let cov = sample_covariance(&data, false).unwrap();
        // Entrywise standard error is of order max|S0| / sqrt(m); allow 5x.
        let tol = 5.0 * s0.max_abs() / libm::sqrt(m as f64);
        assert!(
            cov.mat().max_abs_diff(s0.mat()) < tol,
            "max deviation {} exceeds {tol}",
            cov.mat().max_abs_diff(s0.mat())
        );
    }

    #[test]
    fn probe_second_min_self_probe_is_zero() {
        let mut rng = SplitMix64::new(17);
        let (h, d, q) = random_model_parts(4, 2, &mut rng);
        let sigma = assemble_lifted(&FactorModel::with_mixing(h, d, q).unwrap()).unwrap();
        let margin = probe_oracle_second_min(&sigma, 1, 0).unwrap();
        assert!(margin.abs() < 1e-12);
    }

    #[test]
    fn probe_second_min_never_beats_closed_form() {
        let mut rng = SplitMix64::new(19);
        let (h, d, q) = random_model_parts(4, 2, &mut rng);
        let sigma = assemble_lifted(&FactorModel::with_mixing(h, d, q).unwrap()).unwrap();
        let margin = probe_oracle_second_min(&sigma, 500, 1).unwrap();
        assert!(margin >= -1e-10, "probe beat the minimizer by {margin}");
    }

    #[test]
    fn rescaled_minimizer_is_strictly_worse() {
        let mut rng = SplitMix64::new(23);
        let (h, d, q) = random_model_parts(4, 2, &mut rng);
        let sigma = assemble_lifted(&FactorModel::with_mixing(h, d, q).unwrap()).unwrap();
        let (opt, star) = second_partial_min(&sigma).unwrap();
        let optimum = i_divergence(sigma.whole(), star.whole()).unwrap();
        for scale in [0.5, 2.0] {
            let scaled = FactorModel::with_mixing(
                opt.h().scale(scale),
                opt.d().to_vec(),
                opt.q().unwrap().clone(),
            )
            .unwrap();
            let lifted = assemble_lifted(&scaled).unwrap();
            let value = i_divergence(sigma.whole(), lifted.whole()).unwrap();
            assert!(value > optimum + 1e-6, "scale {scale}: {value} vs {optimum}");
        }
    }

    #[test]
    fn probe_first_min_never_beats_closed_form() {
        let mut rng = SplitMix64::new(29);
        let (h, d, q) = random_model_parts(5, 2, &mut rng);
        let sigma = assemble_lifted(&FactorModel::with_mixing(h, d, q).unwrap()).unwrap();
        let s0 = {
            let mut r2 = SplitMix64::new(31);
            CovarianceMatrix::new(crate::testutil::random_spd(5, &mut r2)).unwrap()
        };
        let margin = probe_oracle_first_min(&s0, &sigma, 500, 2).unwrap();
        assert!(margin >= -1e-10, "probe beat the minimizer by {margin}");
    }
}
