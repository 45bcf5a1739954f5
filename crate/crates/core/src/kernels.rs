//! Integral kernels `k(x1, x2) = E_y[f(x1, y) f(x2, y)]` and their randomized
//! feature maps.
//!
//! A [`FeatureSpec`] holds D samples `y_1..y_D` from the measure over `Y`
//! together with the bandwidth. [`embed`] turns a point set into the D x n
//! matrix whose column i is `psi(x_i) = [f(x_i, y_1), ..., f(x_i, y_D)] / sqrt(D)`,
//! so that `psi(x1)^T psi(x2)` estimates `k(x1, x2)` directly.
//!
//! Three choices of `f` are provided:
//!
//! | variant | samples | `f(x, y)` |
//! |---------|---------|-----------|
//! | [`FeatureSpec::GaussianRff`] | `(w, t)`, `w ~ N(0, I/sigma^2)`, `t ~ U[0, 2 pi]` | `sqrt(2) cos(w^T x + t)` |
//! | [`FeatureSpec::LandmarkGaussian`] | centers `y` | `(2 pi sigma^2)^(-d/2) exp(-|x - y|^2 / (2 sigma^2))` |
//! | [`FeatureSpec::Subspace`] | flats `L` | `exp(-dist(x, L)^2 / sigma^2)` |

use std::f64::consts::PI;

use nalgebra::DVector;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{FlsError, Result};
use crate::linalg::{ensure_finite, orthonormalize, Matrix};
use crate::rng::rng_from_seed;

/// Default cap on n for dense n x n kernel matrices.
pub const DENSE_LIMIT: usize = 5000;

/// An affine flat `{c + B u}` with orthonormal basis `B` (d x l).
#[derive(Debug, Clone, PartialEq)]
pub struct AffineFlat {
    base: DVector<f64>,
    basis: Matrix,
}

impl AffineFlat {
    pub fn new(base: DVector<f64>, basis: Matrix) -> Result<Self> {
        if base.len() != basis.nrows() {
            return Err(FlsError::DimensionMismatch {
                expected: basis.nrows(),
                got: base.len(),
            });
        }
        if basis.ncols() == 0 || basis.ncols() > basis.nrows() {
            return Err(FlsError::InvalidParam(format!(
                "flat dimension {} in ambient dimension {}",
                basis.ncols(),
                basis.nrows()
            )));
        }
        if !base.iter().all(|v| v.is_finite()) {
            return Err(FlsError::NonFinite("flat base point".into()));
        }
        ensure_finite(&basis, "flat basis")?;
        let gram = basis.tr_mul(&basis);
        let err = (gram - Matrix::identity(basis.ncols(), basis.ncols())).amax();
        if err > 1e-10 {
            return Err(FlsError::InvalidParam(format!("basis is not orthonormal (error {err:e})")));
        }
        Ok(Self { base, basis })
    }

    /// A linear subspace (base at the origin).
    pub fn linear(basis: Matrix) -> Result<Self> {
        Self::new(DVector::zeros(basis.nrows()), basis)
    }

    pub(crate) fn new_unchecked(base: DVector<f64>, basis: Matrix) -> Self {
        Self { base, basis }
    }

    pub fn base(&self) -> &DVector<f64> {
        &self.base
    }

    pub fn basis(&self) -> &Matrix {
        &self.basis
    }

    /// Flat dimension l.
    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn ambient_dim(&self) -> usize {
        self.basis.nrows()
    }

    /// Same directions, base moved to the origin.
    pub fn to_linear(&self) -> Self {
        Self::new_unchecked(DVector::zeros(self.ambient_dim()), self.basis.clone())
    }

    /// `|(I - B B^T)(x - c)|^2`, with `x` given as a slice.
    pub fn sq_distance(&self, x: &[f64]) -> f64 {
        let d = self.ambient_dim();
        let base = self.base.as_slice();
        let mut diff = [0.0f64; 64];
        let mut heap;
        let diff: &mut [f64] = if d <= 64 {
            &mut diff[..d]
        } else {
            heap = vec![0.0; d];
            &mut heap
        };
        for i in 0..d {
            diff[i] = x[i] - base[i];
        }
        let bdata = self.basis.as_slice();
        for j in 0..self.dim() {
            let col = &bdata[j * d..(j + 1) * d];
            let coef: f64 = col.iter().zip(diff.iter()).map(|(b, v)| b * v).sum();
            for (v, b) in diff.iter_mut().zip(col) {
                *v -= coef * b;
            }
        }
        diff.iter().map(|v| v * v).sum()
    }
}

/// `|(I - B B^T)(x - c)|`.
pub fn flat_distance(x: &[f64], flat: &AffineFlat) -> Result<f64> {
    if x.len() != flat.ambient_dim() {
        return Err(FlsError::DimensionMismatch {
            expected: flat.ambient_dim(),
            got: x.len(),
        });
    }
    Ok(flat.sq_distance(x).sqrt())
}

/// D samples from the measure over `Y`, plus the bandwidth.
#[derive(Debug, Clone, PartialEq)]
pub enum FeatureSpec {
    GaussianRff {
        sigma: f64,
        /// D x d.
        frequencies: Matrix,
        phases: Vec<f64>,
    },
    LandmarkGaussian {
        sigma: f64,
        /// D x d.
        centers: Matrix,
    },
    Subspace {
        sigma: f64,
        flats: Vec<AffineFlat>,
    },
}

impl FeatureSpec {
    /// Number of samples D.
    pub fn count(&self) -> usize {
        match self {
            FeatureSpec::GaussianRff { phases, .. } => phases.len(),
            FeatureSpec::LandmarkGaussian { centers, .. } => centers.nrows(),
            FeatureSpec::Subspace { flats, .. } => flats.len(),
        }
    }

    pub fn ambient_dim(&self) -> usize {
        match self {
            FeatureSpec::GaussianRff { frequencies, .. } => frequencies.ncols(),
            FeatureSpec::LandmarkGaussian { centers, .. } => centers.ncols(),
            FeatureSpec::Subspace { flats, .. } => flats[0].ambient_dim(),
        }
    }

    pub fn sigma(&self) -> f64 {
        match self {
            FeatureSpec::GaussianRff { sigma, .. }
            | FeatureSpec::LandmarkGaussian { sigma, .. }
            | FeatureSpec::Subspace { sigma, .. } => *sigma,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            FeatureSpec::GaussianRff { .. } => "gaussian_rff",
            FeatureSpec::LandmarkGaussian { .. } => "landmark_gaussian",
            FeatureSpec::Subspace { .. } => "subspace",
        }
    }

    /// Checks the structural invariants: D >= 1, sigma > 0, finite samples,
    /// consistent dimensions.
    pub fn validate(&self) -> Result<()> {
        let sigma = self.sigma();
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(FlsError::InvalidParam(format!("sigma must be positive, got {sigma}")));
        }
        if self.count() == 0 {
            return Err(FlsError::InvalidParam("feature count D must be at least 1".into()));
        }
        match self {
            FeatureSpec::GaussianRff { frequencies, phases, .. } => {
                ensure_finite(frequencies, "frequencies")?;
                if frequencies.nrows() != phases.len() {
                    return Err(FlsError::DimensionMismatch {
                        expected: frequencies.nrows(),
                        got: phases.len(),
                    });
                }
                if !phases.iter().all(|t| t.is_finite()) {
                    return Err(FlsError::NonFinite("phases".into()));
                }
            }
            FeatureSpec::LandmarkGaussian { centers, .. } => ensure_finite(centers, "centers")?,
            FeatureSpec::Subspace { flats, .. } => {
                let d = flats[0].ambient_dim();
                if let Some(f) = flats.iter().find(|f| f.ambient_dim() != d) {
                    return Err(FlsError::DimensionMismatch {
                        expected: d,
                        got: f.ambient_dim(),
                    });
                }
            }
        }
        Ok(())
    }

    /// `f(x, y_k)` without the `1/sqrt(D)` factor.
    pub fn feature(&self, k: usize, x: &[f64]) -> f64 {
        match self {
            FeatureSpec::GaussianRff { frequencies, phases, .. } => {
                let w = frequencies.row(k);
                let dot: f64 = w.iter().zip(x).map(|(a, b)| a * b).sum();
                std::f64::consts::SQRT_2 * (dot + phases[k]).cos()
            }
            FeatureSpec::LandmarkGaussian { sigma, centers, .. } => {
                let d = centers.ncols() as f64;
                let sq: f64 = centers.row(k).iter().zip(x).map(|(c, v)| (v - c) * (v - c)).sum();
                (2.0 * PI * sigma * sigma).powf(-d / 2.0) * (-sq / (2.0 * sigma * sigma)).exp()
            }
            FeatureSpec::Subspace { sigma, flats } => {
                (-flats[k].sq_distance(x) / (sigma * sigma)).exp()
            }
        }
    }

    /// Same samples, different bandwidth.
    pub fn with_sigma(&self, sigma: f64) -> Self {
        let mut out = self.clone();
        match &mut out {
            FeatureSpec::GaussianRff { sigma: s, frequencies, .. } => {
                // frequencies are drawn at scale 1/sigma
                *frequencies *= *s / sigma;
                *s = sigma;
            }
            FeatureSpec::LandmarkGaussian { sigma: s, .. } | FeatureSpec::Subspace { sigma: s, .. } => {
                *s = sigma
            }
        }
        out
    }
}

/// `psi(X)`: D x n, column i is `psi(x_i)`.
#[derive(Debug, Clone)]
pub struct EmbeddingMatrix {
    data: Matrix,
}

impl EmbeddingMatrix {
    pub fn from_matrix(data: Matrix) -> Result<Self> {
        ensure_finite(&data, "embedding")?;
        Ok(Self { data })
    }

    pub fn matrix(&self) -> &Matrix {
        &self.data
    }

    pub fn into_matrix(self) -> Matrix {
        self.data
    }

    pub fn n_features(&self) -> usize {
        self.data.nrows()
    }

    pub fn n_points(&self) -> usize {
        self.data.ncols()
    }

    /// `psi(X)^T psi(X)`, exactly symmetric.
    pub fn gram(&self) -> Matrix {
        let w = self.data.tr_mul(&self.data);
        (&w + w.transpose()) * 0.5
    }
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(FlsError::InvalidParam(format!("sigma must be positive, got {sigma}")))
    }
}

/// Random Fourier features for the Gaussian kernel of bandwidth `sigma`.
pub fn sample_gaussian_rff(sigma: f64, count: usize, dim: usize, seed: u64) -> Result<FeatureSpec> {
    check_sigma(sigma)?;
    if count == 0 {
        return Err(FlsError::InvalidParam("feature count D must be at least 1".into()));
    }
    let mut rng = rng_from_seed(seed);
    let mut frequencies = Matrix::zeros(count, dim);
    let mut phases = Vec::with_capacity(count);
    for k in 0..count {
        for j in 0..dim {
            let z: f64 = StandardNormal.sample(&mut rng);
            frequencies[(k, j)] = z / sigma;
        }
        phases.push(rng.random_range(0.0..2.0 * PI));
    }
    Ok(FeatureSpec::GaussianRff { sigma, frequencies, phases })
}

/// `count` Haar-uniform l-dimensional linear subspaces of R^d.
pub fn sample_uniform_grassmann(d: usize, l: usize, count: usize, seed: u64) -> Result<Vec<AffineFlat>> {
    if l == 0 || l >= d {
        return Err(FlsError::InvalidParam(format!("need 1 <= l < d, got l={l}, d={d}")));
    }
    let mut rng = rng_from_seed(seed);
    Ok((0..count)
        .map(|_| {
            let g = Matrix::from_fn(d, l, |_, _| StandardNormal.sample(&mut rng));
            AffineFlat::new_unchecked(DVector::zeros(d), orthonormalize(g))
        })
        .collect())
}

/// `exp(-|x - y|^2 / (2 sigma^2))`.
pub fn exact_gaussian_kernel(x: &[f64], y: &[f64], sigma: f64) -> f64 {
    let sq: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    (-sq / (2.0 * sigma * sigma)).exp()
}

/// Feature matrix of the rows of `points` (n x d).
pub fn embed(spec: &FeatureSpec, points: &Matrix) -> Result<EmbeddingMatrix> {
    spec.validate()?;
    if points.ncols() != spec.ambient_dim() {
        return Err(FlsError::DimensionMismatch {
            expected: spec.ambient_dim(),
            got: points.ncols(),
        });
    }
    let count = spec.count();
    let scale = 1.0 / (count as f64).sqrt();
    // columns of the transpose are the points, contiguous in memory
    let by_column = points.transpose();
    let dim = points.ncols();
    let mut data = Matrix::zeros(count, points.nrows());
    if count > 0 && points.nrows() > 0 {
        data.as_mut_slice()
            .par_chunks_mut(count)
            .zip(by_column.as_slice().par_chunks(dim.max(1)))
            .for_each(|(out, x)| {
                for (k, v) in out.iter_mut().enumerate() {
                    *v = spec.feature(k, x) * scale;
                }
            });
    }
    EmbeddingMatrix::from_matrix(data)
}

/// Dense `W_hat = psi(X)^T psi(X)`; refuses more than `limit` points.
pub fn approx_kernel_matrix(spec: &FeatureSpec, points: &Matrix, limit: usize) -> Result<Matrix> {
    if points.nrows() > limit {
        return Err(FlsError::DenseLimitExceeded { n: points.nrows(), limit });
    }
    Ok(embed(spec, points)?.gram())
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum SpecDoc {
    GaussianRff {
        sigma: f64,
        dim: usize,
        /// row-major D x d
        frequencies: Vec<f64>,
        phases: Vec<f64>,
    },
    LandmarkGaussian {
        sigma: f64,
        dim: usize,
        centers: Vec<f64>,
    },
    Subspace {
        sigma: f64,
        dim: usize,
        flat_dim: usize,
        /// D x d, row-major
        bases: Vec<f64>,
        /// per flat, the d x l basis in column-major order
        directions: Vec<f64>,
    },
}

fn rows_of(m: &Matrix) -> Vec<f64> {
    m.transpose().as_slice().to_vec()
}

fn from_rows(values: &[f64], dim: usize, what: &str) -> Result<Matrix> {
    if dim == 0 || !values.len().is_multiple_of(dim) {
        return Err(FlsError::InvalidParam(format!("{what}: {} values do not split into rows of {dim}", values.len())));
    }
    Ok(Matrix::from_row_slice(values.len() / dim, dim, values))
}

impl FeatureSpec {
    pub fn to_json(&self) -> String {
        let doc = match self {
            FeatureSpec::GaussianRff { sigma, frequencies, phases } => SpecDoc::GaussianRff {
                sigma: *sigma,
                dim: frequencies.ncols(),
                frequencies: rows_of(frequencies),
                phases: phases.clone(),
            },
            FeatureSpec::LandmarkGaussian { sigma, centers } => SpecDoc::LandmarkGaussian {
                sigma: *sigma,
                dim: centers.ncols(),
                centers: rows_of(centers),
            },
            FeatureSpec::Subspace { sigma, flats } => SpecDoc::Subspace {
                sigma: *sigma,
                dim: flats[0].ambient_dim(),
                flat_dim: flats[0].dim(),
                bases: flats.iter().flat_map(|f| f.base().iter().copied()).collect(),
                directions: flats.iter().flat_map(|f| f.basis().iter().copied()).collect(),
            },
        };
        serde_json::to_string(&doc).expect("spec serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: SpecDoc = serde_json::from_str(text).map_err(|e| FlsError::Parse {
            row: e.line(),
            col: e.column(),
            msg: e.to_string(),
        })?;
        let spec = match doc {
            SpecDoc::GaussianRff { sigma, dim, frequencies, phases } => FeatureSpec::GaussianRff {
                sigma,
                frequencies: from_rows(&frequencies, dim, "frequencies")?,
                phases,
            },
            SpecDoc::LandmarkGaussian { sigma, dim, centers } => FeatureSpec::LandmarkGaussian {
                sigma,
                centers: from_rows(&centers, dim, "centers")?,
            },
            SpecDoc::Subspace { sigma, dim, flat_dim, bases, directions } => {
                let per = dim * flat_dim;
                if dim == 0 || bases.len() % dim != 0 || directions.len() != bases.len() / dim * per {
                    return Err(FlsError::InvalidParam("subspace spec arrays have inconsistent lengths".into()));
                }
                let flats = bases
                    .chunks(dim)
                    .zip(directions.chunks(per))
                    .map(|(b, u)| {
                        AffineFlat::new(DVector::from_column_slice(b), Matrix::from_column_slice(dim, flat_dim, u))
                    })
                    .collect::<Result<Vec<_>>>()?;
                FeatureSpec::Subspace { sigma, flats }
            }
        };
        spec.validate()?;
        Ok(spec)
    }
}
