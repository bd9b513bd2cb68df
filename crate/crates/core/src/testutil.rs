//! Seeded builders shared by the unit tests.

use alloc::vec::Vec;

use crate::matops::{Mat, SymMatrix};
use crate::rng::SplitMix64;

/// Random comfortably-conditioned SPD matrix: `G^T G + I`.
pub(crate) fn random_spd(n: usize, rng: &mut SplitMix64) -> SymMatrix {
    let g = Mat::from_fn(n, n, |_, _| rng.symmetric());
    let mut m = g.transpose().matmul(&g);
    for i in 0..n {
        m[(i, i)] += 1.0;
    }
    SymMatrix::new(m).unwrap()
}

/// Random loading matrix, noise diagonal and invertible mixing factor,
/// scaled so the lifted covariance stays well conditioned.
pub(crate) fn random_model_parts(
    n: usize,
    k: usize,
    rng: &mut SplitMix64,
) -> (Mat, Vec<f64>, Mat) {
    let scale = 1.0 / (k as f64).sqrt();
    let h = Mat::from_fn(n, k, |_, _| scale * rng.symmetric());
    let d: Vec<f64> = (0..n).map(|_| rng.uniform(0.2, 1.2)).collect();
    let mut q = Mat::from_fn(k, k, |_, _| 0.4 * rng.symmetric() / k as f64);
    for i in 0..k {
        q[(i, i)] += 1.5;
    }
    debug_assert!(crate::matops::Lu::factor(&q).is_ok());
    (h, d, q)
}
