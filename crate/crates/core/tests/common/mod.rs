//! Seeded instance builders shared by the integration suites.
#![allow(dead_code)]

use divfact_core::matops::Lu;
use divfact_core::rng::SplitMix64;
use divfact_core::{
    assemble_lifted, CovarianceMatrix, FactorModel, LiftedCovariance, Mat, SymMatrix,
};

pub fn random_spd(n: usize, rng: &mut SplitMix64) -> SymMatrix {
    let g = Mat::from_fn(n, n, |_, _| rng.symmetric());
    let mut m = g.transpose().matmul(&g);
    for i in 0..n {
        m[(i, i)] += 1.0;
    }
    SymMatrix::new(m).unwrap()
}

pub fn random_cov(n: usize, rng: &mut SplitMix64) -> CovarianceMatrix {
    CovarianceMatrix::new(random_spd(n, rng)).unwrap()
}

pub fn random_model_parts(n: usize, k: usize, rng: &mut SplitMix64) -> (Mat, Vec<f64>, Mat) {
    // Loadings scaled by 1/sqrt(k) and a diagonally dominant mixing factor
    // keep the lifted covariance well conditioned across dimensions.
    let scale = 1.0 / (k as f64).sqrt();
    let h = Mat::from_fn(n, k, |_, _| scale * rng.symmetric());
    let d: Vec<f64> = (0..n).map(|_| rng.uniform(0.2, 1.2)).collect();
    let mut q = Mat::from_fn(k, k, |_, _| 0.4 * rng.symmetric() / k as f64);
    for i in 0..k {
        q[(i, i)] += 1.5;
    }
    debug_assert!(Lu::factor(&q).is_ok());
    (h, d, q)
}

pub fn random_lifted(n: usize, k: usize, rng: &mut SplitMix64) -> LiftedCovariance {
    let (h, d, q) = random_model_parts(n, k, rng);
    assemble_lifted(&FactorModel::with_mixing(h, d, q).unwrap()).unwrap()
}
