use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{largest_entry_sign, orthonormalize, symmetric_eigen_desc, Matrix};
use crate::error::{FlsError, Result};
use crate::rng::rng_from_seed;

// fixed so the iterative path is deterministic without a caller seed
const START_BLOCK_SEED: u64 = 0x5eed_0005;

/// Top-K singular triples of a D x n matrix.
#[derive(Debug, Clone)]
pub struct SvdResult {
    /// D x K, orthonormal columns.
    pub left: Matrix,
    /// K values, descending.
    pub singular_values: Vec<f64>,
    /// n x K, orthonormal columns.
    pub right: Matrix,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SvdMethod {
    /// Eigendecomposition of the smaller Gram matrix.
    #[default]
    Gram,
    /// Block subspace iteration, O(K n D) per sweep.
    Iterative,
}

#[derive(Debug, Clone, Copy)]
pub struct IterativeSvdOptions {
    pub max_iter: usize,
    /// Stop once the sine of the largest principal angle between successive
    /// right singular subspaces falls below this.
    pub tol: f64,
    /// Extra block columns beyond K.
    pub oversample: usize,
}

impl Default for IterativeSvdOptions {
    fn default() -> Self {
        Self {
            max_iter: 50,
            tol: 1e-8,
            oversample: 5,
        }
    }
}

fn check_rank(values: &[f64], k: usize) -> Result<()> {
    let largest = values.first().copied().unwrap_or(0.0);
    for (index, &value) in values.iter().enumerate().take(k) {
        if !(value >= 1e-12 * largest) || largest <= 0.0 {
            return Err(FlsError::RankDeficient { index, value, largest });
        }
    }
    Ok(())
}

fn check_k(a: &Matrix, k: usize) -> Result<()> {
    let limit = a.nrows().min(a.ncols());
    if k == 0 || k > limit {
        return Err(FlsError::InvalidParam(format!(
            "requested {k} singular vectors from a {}x{} matrix",
            a.nrows(),
            a.ncols()
        )));
    }
    super::ensure_finite(a, "svd input")
}

/// Applies the sign convention to the right vectors and mirrors it on the left.
fn fix_signs(left: &mut Matrix, right: &mut Matrix) {
    for j in 0..right.ncols() {
        if largest_entry_sign(right.column(j).iter()) < 0.0 {
            right.column_mut(j).neg_mut();
            left.column_mut(j).neg_mut();
        }
    }
}

/// Top-K singular triples through the Gram matrix of the smaller side.
///
/// For D <= n this eigendecomposes `A A^T` (D x D) and recovers the right
/// vectors as `A^T u / s`; otherwise the roles are swapped.
pub fn truncated_svd(a: &Matrix, k: usize) -> Result<SvdResult> {
    check_k(a, k)?;
    let wide = a.nrows() <= a.ncols();
    let gram = if wide { a * a.transpose() } else { a.tr_mul(a) };
    let (_, vectors) = symmetric_eigen_desc(&gram);
    let small = vectors.columns(0, k).into_owned();
    let mut other = if wide { a.tr_mul(&small) } else { a * &small };
    // |A^T u| is accurate near zero where sqrt(eigenvalue) is not
    let singular: Vec<f64> = other.column_iter().map(|c| c.norm()).collect();
    check_rank(&singular, k)?;
    for j in 0..k {
        other.column_mut(j).unscale_mut(singular[j]);
    }
    let (mut left, mut right) = if wide { (small, other) } else { (other, small) };
    fix_signs(&mut left, &mut right);
    Ok(SvdResult {
        left,
        singular_values: singular,
        right,
    })
}

/// Top-K singular triples by block subspace iteration with Rayleigh-Ritz.
///
/// Each sweep costs two products with `A` against an n x (K + oversample)
/// block, so the total work is O(K n D) per iteration.
pub fn truncated_svd_iterative(a: &Matrix, k: usize, opts: IterativeSvdOptions) -> Result<SvdResult> {
    check_k(a, k)?;
    let (rows, cols) = a.shape();
    let p = (k + opts.oversample).min(rows.min(cols));
    let mut rng = rng_from_seed(START_BLOCK_SEED);
    let start = Matrix::from_fn(cols, p, |_, _| StandardNormal.sample(&mut rng));
    let mut v = orthonormalize(start);
    let mut prev: Option<Matrix> = None;
    let mut result = None;
    for _ in 0..opts.max_iter.max(1) {
        let y = a * &v;
        let svd = y.clone().svd(true, true);
        let (u_y, s, r_t) = (svd.u.unwrap(), svd.singular_values, svd.v_t.unwrap());
        // nalgebra returns singular values unsorted in rare cases; order them
        let mut order: Vec<usize> = (0..s.len()).collect();
        order.sort_by(|&i, &j| s[j].total_cmp(&s[i]));
        let pick = &order[..k];
        let r_k = Matrix::from_fn(p, k, |i, j| r_t[(pick[j], i)]);
        let ritz_right = &v * r_k;
        let left = Matrix::from_fn(rows, k, |i, j| u_y[(i, pick[j])]);
        let values: Vec<f64> = pick.iter().map(|&i| s[i]).collect();
        let converged = prev.as_ref().is_some_and(|old: &Matrix| {
            let overlap = old.tr_mul(&ritz_right);
            let residual = &ritz_right - old * overlap;
            residual.norm() < opts.tol
        });
        result = Some((left, values, ritz_right.clone()));
        if converged {
            break;
        }
        prev = Some(ritz_right);
        v = orthonormalize(a.tr_mul(&y));
    }
    let (mut left, values, mut right) = result.expect("at least one sweep");
    check_rank(&values, k)?;
    fix_signs(&mut left, &mut right);
    Ok(SvdResult {
        left,
        singular_values: values,
        right,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random(rows: usize, cols: usize, seed: u64) -> Matrix {
        let mut rng = rng_from_seed(seed);
        Matrix::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut rng))
    }

    fn assert_orthonormal(m: &Matrix) {
        let g = m.tr_mul(m);
        assert!((g - Matrix::identity(m.ncols(), m.ncols())).amax() < 1e-10);
    }

    #[test]
    fn diagonal_values() {
        let a = Matrix::from_diagonal(&nalgebra::DVector::from_vec(vec![3.0, 2.0, 1.0]));
        for r in [truncated_svd(&a, 2).unwrap(), truncated_svd_iterative(&a, 2, Default::default()).unwrap()] {
            assert!((r.singular_values[0] - 3.0).abs() < 1e-12);
            assert!((r.singular_values[1] - 2.0).abs() < 1e-12);
            assert!((r.right[(0, 0)] - 1.0).abs() < 1e-12 && (r.right[(1, 1)] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn orthonormal_rows_have_unit_values() {
        let q = orthonormalize(random(10, 4, 1)).transpose();
        let r = truncated_svd(&q, 4).unwrap();
        assert!(r.singular_values.iter().all(|s| (s - 1.0).abs() < 1e-10));
    }

    #[test]
    fn matches_full_svd() {
        let a = random(8, 20, 2);
        let full = a.transpose().svd(true, true);
        let mut order: Vec<usize> = (0..full.singular_values.len()).collect();
        order.sort_by(|&i, &j| full.singular_values[j].total_cmp(&full.singular_values[i]));
        let u_full = full.u.unwrap();
        for r in [truncated_svd(&a, 3).unwrap(), truncated_svd_iterative(&a, 3, Default::default()).unwrap()] {
            for j in 0..3 {
                let idx = order[j];
                assert!((r.singular_values[j] - full.singular_values[idx]).abs() < 1e-8);
                // right vectors of A are left vectors of A^T
                let v = u_full.column(idx);
                let d = (r.right.column(j) - v).norm().min((r.right.column(j) + v).norm());
                assert!(d < 1e-8, "{d}");
            }
            assert_orthonormal(&r.left);
            assert_orthonormal(&r.right);
        }
    }

    #[test]
    fn tall_input_uses_other_gram() {
        let a = random(30, 6, 3);
        let r = truncated_svd(&a, 4).unwrap();
        for j in 0..4 {
            let resid = (&a * r.right.column(j) - r.left.column(j) * r.singular_values[j]).norm();
            assert!(resid <= 1e-9 * r.singular_values[0]);
        }
    }

    #[test]
    fn rank_deficiency_detected() {
        let u = random(5, 1, 4);
        let v = random(1, 12, 5);
        let a = &u * &v;
        assert!(matches!(truncated_svd(&a, 2), Err(FlsError::RankDeficient { index: 1, .. })));
        assert!(truncated_svd(&a, 1).is_ok());
    }

    #[test]
    fn invalid_k() {
        let a = random(4, 6, 6);
        assert!(truncated_svd(&a, 0).is_err());
        assert!(truncated_svd(&a, 5).is_err());
    }

    #[test]
    fn sign_convention_on_right_vectors() {
        let r = truncated_svd(&random(6, 40, 7), 3).unwrap();
        for j in 0..3 {
            assert!(largest_entry_sign(r.right.column(j).iter()) > 0.0);
        }
    }

    #[test]
    fn iterative_agrees_with_gram() {
        let a = random(50, 400, 8);
        let g = truncated_svd(&a, 5).unwrap();
        let it = truncated_svd_iterative(&a, 5, Default::default()).unwrap();
        for j in 0..5 {
            assert!((g.singular_values[j] - it.singular_values[j]).abs() < 1e-6 * g.singular_values[0]);
            let resid = (&a * it.right.column(j) - it.left.column(j) * it.singular_values[j]).norm();
            assert!(resid <= 1e-6 * it.singular_values[0], "{resid}");
        }
    }
}
