//! Symmetric and partitioned matrix toolkit: diagonal extraction, square
//! roots, block inversion, the Woodbury identity, log-determinants and a
//! positive-semidefinite ordering test.

mod chol;
mod eigen;
mod lu;
mod mat;

pub use chol::{Cholesky, PIVOT_REL_TOL};
pub use eigen::{eigen_sym, min_eigenvalue, SymEigen};
pub use lu::Lu;
pub use mat::Mat;

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Square matrix that is symmetric by construction.
///
/// The constructor symmetrizes its input as `(M + M^T) / 2` and records the
/// largest asymmetry `max |m_ij - m_ji|` seen, so floating-point drift in a
/// caller is visible rather than silently absorbed.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    mat: Mat,
    asymmetry: f64,
}

impl SymMatrix {
    pub fn new(m: Mat) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::dim(format!(
                "symmetric matrix requires a square input, got {}x{}",
                m.rows(),
                m.cols()
            )));
        }
        let n = m.rows();
        let mut sym = m;
        let mut asymmetry = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                let a = sym[(i, j)];
                let b = sym[(j, i)];
                asymmetry = asymmetry.max((a - b).abs());
                let avg = 0.5 * (a + b);
                sym[(i, j)] = avg;
                sym[(j, i)] = avg;
            }
        }
        Ok(SymMatrix {
            mat: sym,
            asymmetry,
        })
    }

    pub fn identity(n: usize) -> Self {
        SymMatrix {
            mat: Mat::identity(n),
            asymmetry: 0.0,
        }
    }

    pub fn from_diag(d: &[f64]) -> Self {
        SymMatrix {
            mat: Mat::from_diag(d),
            asymmetry: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.mat.rows()
    }

    pub fn mat(&self) -> &Mat {
        &self.mat
    }

    pub fn into_mat(self) -> Mat {
        self.mat
    }

    /// Asymmetry magnitude recorded at construction.
    pub fn asymmetry(&self) -> f64 {
        self.asymmetry
    }

    pub fn max_abs(&self) -> f64 {
        self.mat.max_abs()
    }

    pub fn max_diag(&self) -> f64 {
        (0..self.dim()).fold(f64::NEG_INFINITY, |m, i| m.max(self.mat[(i, i)]))
    }

    /// Entrywise difference; exactly symmetric, no re-symmetrization cost.
    pub fn sub(&self, rhs: &SymMatrix) -> SymMatrix {
        SymMatrix {
            mat: self.mat.sub(&rhs.mat),
            asymmetry: 0.0,
        }
    }
}

impl core::ops::Index<(usize, usize)> for SymMatrix {
    type Output = f64;

    #[inline]
    fn index(&self, idx: (usize, usize)) -> &f64 {
        &self.mat[idx]
    }
}

/// Row split of a partitioned square matrix: `top` rows for the upper block,
/// `bottom` for the lower one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockPartition {
    pub top: usize,
    pub bottom: usize,
}

impl BlockPartition {
    pub fn new(top: usize, bottom: usize) -> Result<Self> {
        if top == 0 || bottom == 0 {
            return Err(Error::InvalidConfig(format!(
                "block partition sizes must be positive, got {top}+{bottom}"
            )));
        }
        Ok(BlockPartition { top, bottom })
    }

    pub fn total(&self) -> usize {
        self.top + self.bottom
    }
}

/// Diagonal of a square matrix, as a vector.
pub fn delta_diag(m: &Mat) -> Result<Vec<f64>> {
    if !m.is_square() {
        return Err(Error::dim(format!(
            "diagonal extraction requires a square matrix, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    Ok(m.diag())
}

/// Deterministic square root `S` of a positive-definite `P` with
/// `S^T S = P`: the transpose of the lower Cholesky factor, hence upper
/// triangular and invertible.
pub fn sqrt_factor(p: &SymMatrix) -> Result<Mat> {
    let c = Cholesky::factor(p)?;
    Ok(c.lower().transpose())
}

/// Inverse of a symmetric partitioned matrix via the block formula
///
/// ```text
/// [A  C]^-1   [ S^-1            -S^-1 C D^-1              ]
/// [B  D]    = [ -D^-1 B S^-1     D^-1 B S^-1 C D^-1 + D^-1 ]
/// ```
///
/// with `S = A - C D^-1 B` the Schur complement of `D`.
pub fn partitioned_inverse(m: &SymMatrix, part: BlockPartition) -> Result<SymMatrix> {
    let n = m.dim();
    if part.total() != n {
        return Err(Error::dim(format!(
            "partition {}+{} does not cover dimension {n}",
            part.top, part.bottom
        )));
    }
    let (t, b) = (part.top, part.bottom);
    let a = Mat::from_fn(t, t, |i, j| m[(i, j)]);
    let c = Mat::from_fn(t, b, |i, j| m[(i, t + j)]);
    let bl = Mat::from_fn(b, t, |i, j| m[(t + i, j)]);
    let d = Mat::from_fn(b, b, |i, j| m[(t + i, t + j)]);

    let d_lu = Lu::factor(&d).map_err(|_| Error::singular("block D of the partition"))?;
    let dinv_b = d_lu.solve_mat(&bl); // D^-1 B
    let schur = a.sub(&c.matmul(&dinv_b));
    let s_lu =
        Lu::factor(&schur).map_err(|_| Error::singular("Schur complement A - C D^-1 B"))?;
    let sinv = s_lu.inverse();

    let c_dinv = d_lu.solve_mat(&c.transpose()).transpose(); // C D^-1
    let tl = sinv.clone();
    let tr = sinv.matmul(&c_dinv).scale(-1.0);
    let lo = dinv_b.matmul(&sinv).scale(-1.0);
    let mut br = dinv_b.matmul(&sinv).matmul(&c_dinv);
    let dinv = d_lu.inverse();
    br = br.add(&dinv);

    let mut out = Mat::zeros(n, n);
    for i in 0..t {
        for j in 0..t {
            out[(i, j)] = tl[(i, j)];
        }
        for j in 0..b {
            out[(i, t + j)] = tr[(i, j)];
        }
    }
    for i in 0..b {
        for j in 0..t {
            out[(t + i, j)] = lo[(i, j)];
        }
        for j in 0..b {
            out[(t + i, t + j)] = br[(i, j)];
        }
    }
    SymMatrix::new(out)
}

/// `(Dm - B A C)^-1` for diagonal positive `Dm`, via
/// `Dm^-1 + Dm^-1 B (A^-1 - C Dm^-1 B)^-1 C Dm^-1`.
pub fn woodbury_inv(dm: &[f64], b: &Mat, a: &SymMatrix, c: &Mat) -> Result<SymMatrix> {
    let n = dm.len();
    let k = a.dim();
    if b.rows() != n || b.cols() != k || c.rows() != k || c.cols() != n {
        return Err(Error::dim(format!(
            "Woodbury shapes incompatible: Dm {n}, B {}x{}, A {k}x{k}, C {}x{}",
            b.rows(),
            b.cols(),
            c.rows(),
            c.cols()
        )));
    }
    for (i, &v) in dm.iter().enumerate() {
        if !(v > 0.0) {
            return Err(Error::NonPositiveDiagonal { index: i });
        }
    }
    let a_inv = Lu::factor(a.mat())
        .map_err(|_| Error::singular("matrix A in the Woodbury update"))?
        .inverse();
    // C Dm^-1 B
    let c_dminv = Mat::from_fn(k, n, |i, j| c[(i, j)] / dm[j]);
    let inner = a_inv.sub(&c_dminv.matmul(b));
    let inner_lu = Lu::factor(&inner)
        .map_err(|_| Error::singular("inner matrix A^-1 - C Dm^-1 B"))?;
    // Dm^-1 B (inner)^-1 C Dm^-1
    let dminv_b = Mat::from_fn(n, k, |i, j| b[(i, j)] / dm[i]);
    let mut out = dminv_b.matmul(&inner_lu.solve_mat(&c_dminv));
    for i in 0..n {
        out[(i, i)] += 1.0 / dm[i];
    }
    SymMatrix::new(out)
}

/// Natural log of the determinant, via Cholesky.
pub fn logdet(p: &SymMatrix) -> Result<f64> {
    Ok(Cholesky::factor(p)?.logdet())
}

/// Solve `X U = B` for upper-triangular invertible `U`, i.e. compute
/// `B U^-1` by back substitution along the rows of `B`.
pub fn solve_right_upper(b: &Mat, u: &Mat) -> Mat {
    debug_assert!(u.is_square() && u.rows() == b.cols());
    let k = u.rows();
    let mut x = b.clone();
    for row in 0..b.rows() {
        for j in 0..k {
            let mut v = x[(row, j)];
            for l in 0..j {
                v -= x[(row, l)] * u[(l, j)];
            }
            x[(row, j)] = v / u[(j, j)];
        }
    }
    x
}

/// `true` iff `large - small + slack*I` is positive semidefinite
/// (smallest eigenvalue nonnegative).
pub fn psd_dominates(large: &SymMatrix, small: &SymMatrix, slack: f64) -> Result<bool> {
    if large.dim() != small.dim() {
        return Err(Error::dim(format!(
            "PSD comparison of dimensions {} and {}",
            large.dim(),
            small.dim()
        )));
    }
    let mut diff = large.sub(small).into_mat();
    for i in 0..diff.rows() {
        diff[(i, i)] += slack;
    }
    let diff = SymMatrix::new(diff)?;
    Ok(min_eigenvalue(&diff)? >= 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;
    use crate::testutil::random_spd;

    // Brute-force determinant by cofactor expansion, as an oracle.
    fn cofactor_det(m: &Mat) -> f64 {
        let n = m.rows();
        if n == 1 {
            return m[(0, 0)];
        }
        let mut det = 0.0;
        for j in 0..n {
            let minor = Mat::from_fn(n - 1, n - 1, |r, c| {
                let cc = if c < j { c } else { c + 1 };
                m[(r + 1, cc)]
            });
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            det += sign * m[(0, j)] * cofactor_det(&minor);
        }
        det
    }

    #[test]
    fn symmetrize_records_asymmetry() {
        let m = Mat::from_rows(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let s = SymMatrix::new(m).unwrap();
        assert_eq!(s.asymmetry(), 1.0);
        assert_eq!(s[(0, 1)], 2.5);
        assert_eq!(s[(1, 0)], 2.5);
    }

    #[test]
    fn symmetrize_is_exact_on_symmetric_input() {
        let m = Mat::from_rows(2, 2, &[1.0, 0.3, 0.3, 2.0]);
        let s = SymMatrix::new(m.clone()).unwrap();
        assert_eq!(s.mat(), &m);
        assert_eq!(s.asymmetry(), 0.0);
    }

    #[test]
    fn delta_diag_identity() {
        let d = delta_diag(&Mat::identity(3)).unwrap();
        assert_eq!(d, alloc::vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn delta_diag_direct_definition() {
        let m = Mat::from_rows(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(delta_diag(&m).unwrap(), alloc::vec![1.0, 4.0]);
    }

    #[test]
    fn delta_diag_fixed_point_on_diagonal() {
        let d = alloc::vec![2.0, 0.5, 7.0];
        let m = Mat::from_diag(&d);
        assert_eq!(delta_diag(&m).unwrap(), d);
        // Idempotence: applying the extraction to the rebuilt diagonal
        // matrix returns the same vector.
        assert_eq!(
            delta_diag(&Mat::from_diag(&delta_diag(&m).unwrap())).unwrap(),
            d
        );
    }

    #[test]
    fn delta_diag_rejects_non_square() {
        assert!(delta_diag(&Mat::zeros(2, 3)).is_err());
    }

    #[test]
    fn sqrt_factor_identity_and_scalar() {
        let s = sqrt_factor(&SymMatrix::identity(3)).unwrap();
        assert!(s.max_abs_diff(&Mat::identity(3)) == 0.0);
        let p = SymMatrix::from_diag(&[4.0]);
        let s = sqrt_factor(&p).unwrap();
        assert_eq!(s[(0, 0)], 2.0);
    }

    #[test]
    fn sqrt_factor_multiplies_back() {
        let mut rng = SplitMix64::new(11);
        let p = random_spd(5, &mut rng);
        let s = sqrt_factor(&p).unwrap();
        let back = s.transpose().matmul(&s);
        assert!(back.max_abs_diff(p.mat()) < 1e-12 * p.max_abs().max(1.0));
        // Upper triangular by convention.
        for i in 0..5 {
            for j in 0..i {
                assert_eq!(s[(i, j)], 0.0);
            }
        }
    }

    #[test]
    fn partitioned_inverse_two_by_two() {
        let m = SymMatrix::new(Mat::from_rows(2, 2, &[2.0, 1.0, 1.0, 2.0])).unwrap();
        let inv = partitioned_inverse(&m, BlockPartition::new(1, 1).unwrap()).unwrap();
        let expect = [2.0 / 3.0, -1.0 / 3.0, -1.0 / 3.0, 2.0 / 3.0];
        for (got, want) in inv.mat().data().iter().zip(expect.iter()) {
            assert!((got - want).abs() < 1e-14);
        }
    }

    #[test]
    fn partitioned_inverse_block_diagonal() {
        let mut m = Mat::zeros(4, 4);
        m[(0, 0)] = 2.0;
        m[(0, 1)] = 0.5;
        m[(1, 0)] = 0.5;
        m[(1, 1)] = 1.0;
        m[(2, 2)] = 3.0;
        m[(3, 3)] = 4.0;
        let m = SymMatrix::new(m).unwrap();
        let inv = partitioned_inverse(&m, BlockPartition::new(2, 2).unwrap()).unwrap();
        // Off-diagonal blocks of the inverse stay zero.
        for i in 0..2 {
            for j in 2..4 {
                assert_eq!(inv[(i, j)], 0.0);
                assert_eq!(inv[(j, i)], 0.0);
            }
        }
        assert!((inv[(2, 2)] - 1.0 / 3.0).abs() < 1e-15);
        assert!((inv[(3, 3)] - 0.25).abs() < 1e-15);
        // Upper block matches its direct 2x2 inverse.
        let det = 2.0 * 1.0 - 0.5 * 0.5;
        assert!((inv[(0, 0)] - 1.0 / det).abs() < 1e-14);
    }

    #[test]
    fn partitioned_inverse_multiplies_back() {
        let mut rng = SplitMix64::new(5);
        let m = random_spd(6, &mut rng);
        let inv = partitioned_inverse(&m, BlockPartition::new(4, 2).unwrap()).unwrap();
        let prod = m.mat().matmul(inv.mat());
        assert!(prod.max_abs_diff(&Mat::identity(6)) < 1e-11);
    }

    #[test]
    fn partitioned_inverse_names_singular_block() {
        let mut m = Mat::identity(3);
        m[(2, 2)] = 0.0;
        let m = SymMatrix::new(m).unwrap();
        match partitioned_inverse(&m, BlockPartition::new(2, 1).unwrap()) {
            Err(Error::Singular { what }) => assert!(what.contains("block D"), "{what}"),
            other => panic!("expected singularity error, got {other:?}"),
        }
    }

    #[test]
    fn woodbury_zero_update_gives_diagonal_inverse() {
        let dm = [2.0, 4.0];
        let b = Mat::zeros(2, 1);
        let a = SymMatrix::identity(1);
        let c = Mat::zeros(1, 2);
        let inv = woodbury_inv(&dm, &b, &a, &c).unwrap();
        assert_eq!(inv[(0, 0)], 0.5);
        assert_eq!(inv[(1, 1)], 0.25);
        assert_eq!(inv[(0, 1)], 0.0);
    }

    #[test]
    fn woodbury_scalar_case() {
        // d=3, b=c=1, a=1: (3 - 1)^-1 = 1/2.
        let inv = woodbury_inv(
            &[3.0],
            &Mat::from_rows(1, 1, &[1.0]),
            &SymMatrix::identity(1),
            &Mat::from_rows(1, 1, &[1.0]),
        )
        .unwrap();
        assert!((inv[(0, 0)] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn woodbury_matches_dense_inverse() {
        let mut rng = SplitMix64::new(17);
        let n = 6;
        let k = 2;
        let h = Mat::from_fn(n, k, |_, _| rng.symmetric());
        let d: Vec<f64> = (0..n).map(|_| rng.uniform(0.5, 1.5)).collect();
        // (H H^T + D)^-1 via Woodbury with A = -I.
        let minus_i = SymMatrix::new(Mat::identity(k).scale(-1.0)).unwrap();
        let inv = woodbury_inv(&d, &h, &minus_i, &h.transpose()).unwrap();
        let mut dense = h.matmul(&h.transpose());
        dense.add_diag(&d);
        let dense_inv = Lu::factor(&dense).unwrap().inverse();
        assert!(inv.mat().max_abs_diff(&dense_inv) < 1e-11);

        // (H H^T + D)^-1 H equals D^-1 H (I + H^T D^-1 H)^-1.
        let lhs = inv.mat().matmul(&h);
        let dinv_h = Mat::from_fn(n, k, |i, j| h[(i, j)] / d[i]);
        let small = SymMatrix::new(
            Mat::identity(k).add(&h.transpose().matmul(&dinv_h)),
        )
        .unwrap();
        let rhs = dinv_h.matmul(&Cholesky::factor(&small).unwrap().inverse().into_mat());
        assert!(lhs.max_abs_diff(&rhs) < 1e-11);
    }

    #[test]
    fn logdet_identity_and_reciprocal_pair() {
        assert_eq!(logdet(&SymMatrix::identity(4)).unwrap(), 0.0);
        let p = SymMatrix::from_diag(&[2.0, 0.5]);
        assert!(logdet(&p).unwrap().abs() < 1e-15);
    }

    #[test]
    fn logdet_matches_cofactor_expansion() {
        let mut rng = SplitMix64::new(23);
        let p = random_spd(5, &mut rng);
        let ld = logdet(&p).unwrap();
        let det = cofactor_det(p.mat());
        let rel = (libm::exp(ld) - det).abs() / det.abs();
        assert!(rel < 1e-10, "relative error {rel}");
    }

    #[test]
    fn psd_dominates_scalar_orderings() {
        let two_i = SymMatrix::new(Mat::identity(3).scale(2.0)).unwrap();
        let i = SymMatrix::identity(3);
        assert!(psd_dominates(&two_i, &i, 0.0).unwrap());
        assert!(!psd_dominates(&i, &two_i, 0.0).unwrap());
        assert!(psd_dominates(&i, &i, 0.0).unwrap());
    }

    #[test]
    fn psd_dominates_dimension_mismatch() {
        let a = SymMatrix::identity(2);
        let b = SymMatrix::identity(3);
        assert!(psd_dominates(&a, &b, 0.0).is_err());
    }
}
