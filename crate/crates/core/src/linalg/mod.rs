//! Dense linear algebra and clustering primitives.
//!
//! Everything here works on [`Matrix`] (a dense `nalgebra` matrix of `f64`).
//! Eigen and singular vectors follow one sign convention: each vector is
//! flipped so that its largest-magnitude entry is positive (first such entry
//! on ties). That keeps outputs comparable across runs and code paths.

mod assignment;
mod kmeans;
mod svd;

pub use assignment::{assignment_score, hungarian_match};
pub use kmeans::{kmeans, kmeans_from, KMeansOptions, KMeansResult};
pub use svd::{truncated_svd, truncated_svd_iterative, IterativeSvdOptions, SvdMethod, SvdResult};

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{FlsError, Result};
use crate::kernels::AffineFlat;

pub type Matrix = DMatrix<f64>;

pub(crate) fn ensure_finite(m: &Matrix, what: &str) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(FlsError::NonFinite(what.to_string()))
    }
}

/// Flips `v` in place so that its largest-magnitude entry is positive.
pub fn canonical_sign(mut v: nalgebra::DVectorViewMut<'_, f64>) {
    if largest_entry_sign(v.iter()) < 0.0 {
        v.neg_mut();
    }
}

/// Sign of the first largest-magnitude entry (1.0 for an all-zero input).
pub(crate) fn largest_entry_sign<'a>(values: impl Iterator<Item = &'a f64>) -> f64 {
    let mut best = 0.0f64;
    let mut sign = 1.0;
    for x in values {
        if x.abs() > best {
            best = x.abs();
            sign = x.signum();
        }
    }
    sign
}

/// Eigendecomposition of a symmetric matrix, eigenvalues in descending order.
///
/// Columns of the returned matrix are the matching unit eigenvectors under
/// the canonical sign convention.
pub fn symmetric_eigen_desc(a: &Matrix) -> (Vec<f64>, Matrix) {
    let n = a.nrows();
    let eig = SymmetricEigen::new(a.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = Matrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
        canonical_sign(vectors.column_mut(dst));
    }
    (values, vectors)
}

/// Spectral norm of a symmetric matrix.
pub fn symmetric_spectral_norm(a: &Matrix) -> f64 {
    SymmetricEigen::new(a.clone())
        .eigenvalues
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Spectral norm of a general matrix.
pub fn spectral_norm(a: &Matrix) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .fold(0.0f64, |m, v| m.max(*v))
}

/// Result of a principal component fit.
#[derive(Debug, Clone)]
pub struct PcaFit {
    pub flat: AffineFlat,
    /// Eigenvalues of the scatter matrix `sum (x - c)(x - c)^T`, descending.
    pub eigenvalues: Vec<f64>,
    /// Total squared distance of the points to the fitted flat.
    pub residual: f64,
}

impl PcaFit {
    /// Sum of the trailing `d - l` scatter eigenvalues.
    pub fn trailing_mass(&self) -> f64 {
        self.eigenvalues[self.flat.dim()..].iter().map(|v| v.max(0.0)).sum()
    }

    pub fn total_mass(&self) -> f64 {
        self.eigenvalues.iter().map(|v| v.max(0.0)).sum()
    }
}

/// Best-fit `l`-flat through the rows of `points` (m x d).
pub fn pca_fit(points: &Matrix, l: usize) -> Result<PcaFit> {
    let (m, d) = points.shape();
    if l == 0 || l > d {
        return Err(FlsError::InvalidParam(format!("flat dimension {l} not in 1..={d}")));
    }
    if m < l + 1 {
        return Err(FlsError::DegenerateInput(format!(
            "{m} points cannot determine a {l}-flat"
        )));
    }
    let centroid: DVector<f64> = points.row_mean().transpose();
    let mut centered = points.clone();
    for mut row in centered.row_iter_mut() {
        row -= centroid.transpose();
    }
    let scatter = centered.tr_mul(&centered);
    let (eigenvalues, vectors) = symmetric_eigen_desc(&scatter);
    let basis = vectors.columns(0, l).into_owned();
    let coords = &centered * &basis;
    let residual = (centered - coords * basis.transpose()).norm_squared();
    Ok(PcaFit {
        flat: AffineFlat::new_unchecked(centroid, basis),
        eigenvalues,
        residual,
    })
}

/// Gram-Schmidt (via QR) orthonormal basis for the columns of `a`.
pub fn orthonormalize(a: Matrix) -> Matrix {
    let cols = a.ncols();
    let mut q = a.qr().q();
    q.resize_horizontally_mut(cols, 0.0);
    q
}

/// Scales each row of `m` to unit length; zero rows stay zero.
pub fn normalize_rows(m: &mut Matrix) {
    for mut row in m.row_iter_mut() {
        let norm = row.norm();
        if norm > 0.0 {
            row /= norm;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian(rows: usize, cols: usize, seed: u64) -> Matrix {
        let mut rng = rng_from_seed(seed);
        Matrix::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut rng))
    }

    #[test]
    fn pca_exact_flat_has_zero_residual() {
        let basis = orthonormalize(gaussian(5, 2, 1));
        let coords = gaussian(10, 2, 2);
        let offset = DVector::from_vec(vec![1.0, -2.0, 0.5, 3.0, 0.0]);
        let mut pts = coords * basis.transpose();
        for mut row in pts.row_iter_mut() {
            row += offset.transpose();
        }
        let fit = pca_fit(&pts, 2).unwrap();
        assert!(fit.residual < 1e-20);
        assert!(fit.trailing_mass() < 1e-10);
    }

    #[test]
    fn pca_full_dimension() {
        let pts = gaussian(12, 3, 3);
        let fit = pca_fit(&pts, 3).unwrap();
        assert!(fit.residual < 1e-20);
        let btb = fit.flat.basis().tr_mul(fit.flat.basis());
        assert!((btb - Matrix::identity(3, 3)).amax() < 1e-10);
    }

    #[test]
    fn pca_residual_matches_independent_eigensolve() {
        let pts = gaussian(50, 4, 4);
        let fit = pca_fit(&pts, 2).unwrap();
        // oracle: covariance via explicit outer products, nalgebra's own solver, sorted ascending
        let mean = pts.row_mean();
        let mut cov = Matrix::zeros(4, 4);
        for r in pts.row_iter() {
            let c = (r - &mean).transpose();
            cov += &c * c.transpose();
        }
        let mut ev: Vec<f64> = cov.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        let trailing = ev[0] + ev[1];
        assert!((fit.residual - trailing).abs() <= 1e-8 * trailing);
    }

    #[test]
    fn pca_rejects_too_few_points() {
        let pts = gaussian(2, 4, 5);
        assert!(matches!(pca_fit(&pts, 2), Err(FlsError::DegenerateInput(_))));
    }

    #[test]
    fn pca_beats_random_competitor_flats() {
        let pts = gaussian(40, 5, 6);
        let fit = pca_fit(&pts, 2).unwrap();
        let btb = fit.flat.basis().tr_mul(fit.flat.basis());
        assert!((btb - Matrix::identity(2, 2)).amax() < 1e-10);
        let mean = pts.row_mean();
        for s in 0..100 {
            let b = orthonormalize(gaussian(5, 2, 100 + s));
            let mut res = 0.0;
            for r in pts.row_iter() {
                let c = (r - &mean).transpose();
                res += (&c - &b * (b.transpose() * &c)).norm_squared();
            }
            assert!(fit.residual <= res + 1e-12);
        }
    }

    #[test]
    fn sign_convention() {
        let mut v = DVector::from_vec(vec![0.1, -0.9, 0.3]);
        canonical_sign(v.column_mut(0));
        assert_eq!(v[1], 0.9);
    }
}
