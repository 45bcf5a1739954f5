//! Clustering accuracy, benchmark harness and numerical checks of the
//! approximation theory (kernel error decay, perturbation bounds on the
//! normalized kernel, eigenvector stability, rotation invariance).

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::Instant;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datagen::{gen_synthetic, SyntheticModel};
use crate::error::{FlsError, Result};
use crate::kernels::{
    embed, exact_gaussian_kernel, sample_gaussian_rff, sample_uniform_grassmann, AffineFlat, FeatureSpec, DENSE_LIMIT,
};
use crate::landmarks::{LandmarkConfig, LandmarkMethod, SigmaRule};
use crate::linalg::{assignment_score, hungarian_match, orthonormalize, spectral_norm, symmetric_eigen_desc, Matrix, SvdMethod};
use crate::rng::{derive_seed, rng_from_seed};
use crate::spectral::{dense_normalized, fls_cluster, ClusterConfig};

// ---------------------------------------------------------------------------
// accuracy

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    /// Correctly clustered inliers over all inliers.
    pub rate: f64,
    /// `matched_permutation[t]` is the predicted cluster matched to true class `t`.
    pub matched_permutation: Vec<usize>,
    /// Rows: true classes, columns: predicted clusters (inliers only).
    pub confusion: Vec<Vec<u64>>,
    pub n_inliers: usize,
}

/// Inlier accuracy under the best one-to-one matching of cluster names.
///
/// Outliers (mask true, or label < 0) are ignored. Class and cluster names
/// are mapped to dense indices in sorted order.
pub fn clustering_rate(pred: &[usize], truth: &[i64], outlier_mask: Option<&[bool]>) -> Result<EvalReport> {
    if pred.len() != truth.len() {
        return Err(FlsError::DimensionMismatch { expected: truth.len(), got: pred.len() });
    }
    if let Some(m) = outlier_mask {
        if m.len() != truth.len() {
            return Err(FlsError::DimensionMismatch { expected: truth.len(), got: m.len() });
        }
    }
    let inlier = |i: usize| truth[i] >= 0 && !outlier_mask.is_some_and(|m| m[i]);
    let idx: Vec<usize> = (0..truth.len()).filter(|&i| inlier(i)).collect();
    if idx.is_empty() {
        return Err(FlsError::InvalidParam("no inliers to evaluate".into()));
    }
    let classes: BTreeMap<i64, usize> = idx.iter().map(|&i| truth[i]).collect::<std::collections::BTreeSet<_>>()
        .into_iter().enumerate().map(|(a, b)| (b, a)).collect();
    let clusters: BTreeMap<usize, usize> = idx.iter().map(|&i| pred[i]).collect::<std::collections::BTreeSet<_>>()
        .into_iter().enumerate().map(|(a, b)| (b, a)).collect();
    let k = classes.len().max(clusters.len());
    let mut confusion = vec![vec![0u64; k]; k];
    for &i in &idx {
        confusion[classes[&truth[i]]][clusters[&pred[i]]] += 1;
    }
    let perm = hungarian_match(&confusion);
    let matched = assignment_score(&confusion, &perm);
    Ok(EvalReport {
        rate: matched as f64 / idx.len() as f64,
        matched_permutation: perm,
        confusion,
        n_inliers: idx.len(),
    })
}

// ---------------------------------------------------------------------------
// kernel families and reference kernels

/// A randomized kernel family: how to draw D samples, and its exact kernel
/// (analytic, or a large reference draw).
#[derive(Debug, Clone)]
pub enum KernelFamily {
    GaussianRff { sigma: f64 },
    /// Centers drawn uniformly from the rows of `pool`.
    LandmarkGaussian { sigma: f64, pool: Matrix },
    /// Flats drawn uniformly from `pool`.
    Subspace { sigma: f64, pool: Vec<AffineFlat> },
}

impl KernelFamily {
    pub fn name(&self) -> &'static str {
        match self {
            KernelFamily::GaussianRff { .. } => "rff",
            KernelFamily::LandmarkGaussian { .. } => "landmark",
            KernelFamily::Subspace { .. } => "subspace",
        }
    }

    fn dim(&self, fallback: usize) -> usize {
        match self {
            KernelFamily::GaussianRff { .. } => fallback,
            KernelFamily::LandmarkGaussian { pool, .. } => pool.ncols(),
            KernelFamily::Subspace { pool, .. } => pool.first().map_or(fallback, |f| f.ambient_dim()),
        }
    }

    fn pool_len(&self) -> usize {
        match self {
            KernelFamily::GaussianRff { .. } => 0,
            KernelFamily::LandmarkGaussian { pool, .. } => pool.nrows(),
            KernelFamily::Subspace { pool, .. } => pool.len(),
        }
    }

    /// Spec built from pool entries `picks`.
    fn spec_from_picks(&self, picks: &[usize]) -> FeatureSpec {
        match self {
            KernelFamily::GaussianRff { .. } => unreachable!("no pool"),
            KernelFamily::LandmarkGaussian { sigma, pool } => FeatureSpec::LandmarkGaussian {
                sigma: *sigma,
                centers: Matrix::from_fn(picks.len(), pool.ncols(), |i, j| pool[(picks[i], j)]),
            },
            KernelFamily::Subspace { sigma, pool } => FeatureSpec::Subspace {
                sigma: *sigma,
                flats: picks.iter().map(|&i| pool[i].clone()).collect(),
            },
        }
    }

    /// D i.i.d. samples from the family's measure.
    pub fn sample(&self, count: usize, dim: usize, seed: u64) -> Result<FeatureSpec> {
        match self {
            KernelFamily::GaussianRff { sigma } => sample_gaussian_rff(*sigma, count, dim, seed),
            _ => {
                let len = self.pool_len();
                if len == 0 || count == 0 {
                    return Err(FlsError::InvalidParam("need a nonempty pool and D >= 1".into()));
                }
                let mut rng = rng_from_seed(seed);
                let picks: Vec<usize> = (0..count).map(|_| rng.random_range(0..len)).collect();
                Ok(self.spec_from_picks(&picks))
            }
        }
    }

    /// Dense exact kernel on the rows of `points`.
    ///
    /// Analytic for the Gaussian family. Pool families use a reference draw
    /// of `d_ref` samples, evaluated through the multiplicity of each pool
    /// entry (same matrix as embedding all `d_ref` draws).
    pub fn reference(&self, points: &Matrix, d_ref: usize, seed: u64) -> Result<ReferenceKernel> {
        let n = points.nrows();
        if n > DENSE_LIMIT {
            return Err(FlsError::DenseLimitExceeded { n, limit: DENSE_LIMIT });
        }
        match self {
            KernelFamily::GaussianRff { sigma } => {
                let rows: Vec<Vec<f64>> = points.row_iter().map(|r| r.iter().copied().collect()).collect();
                let w = Matrix::from_fn(n, n, |i, j| exact_gaussian_kernel(&rows[i], &rows[j], *sigma));
                Ok(ReferenceKernel { w, error_estimate: 0.0 })
            }
            _ => {
                let len = self.pool_len();
                if d_ref < 2 || len == 0 {
                    return Err(FlsError::InvalidParam("reference needs D_ref >= 2 and a nonempty pool".into()));
                }
                let mut rng = rng_from_seed(seed);
                let mut halves = [vec![0usize; len], vec![0usize; len]];
                for t in 0..d_ref {
                    halves[t % 2][rng.random_range(0..len)] += 1;
                }
                let all: Vec<usize> = (0..len).collect();
                let psi = embed(&self.spec_from_picks(&all), points)?.into_matrix() * (len as f64).sqrt();
                let weighted = |counts: &[usize], total: usize| {
                    let mut f = psi.clone();
                    for (k, mut row) in f.row_iter_mut().enumerate() {
                        row *= (counts[k] as f64 / total as f64).sqrt();
                    }
                    let w = f.tr_mul(&f);
                    (&w + w.transpose()) * 0.5
                };
                let (na, nb) = (d_ref.div_ceil(2), d_ref / 2);
                let wa = weighted(&halves[0], na);
                let wb = weighted(&halves[1], nb);
                let w = (&wa * na as f64 + &wb * nb as f64) / d_ref as f64;
                // halves differ by about twice the full draw's own error
                let error_estimate = (wa - wb).amax() / 2.0;
                Ok(ReferenceKernel { w, error_estimate })
            }
        }
    }
}

/// Exact-kernel stand-in.
#[derive(Debug, Clone)]
pub struct ReferenceKernel {
    pub w: Matrix,
    /// Estimated max entry error of `w` (half-vs-half split; 0 when analytic).
    pub error_estimate: f64,
}

// ---------------------------------------------------------------------------
// kernel error decay

#[derive(Debug, Clone, Serialize)]
pub struct KernelErrorRow {
    #[serde(rename = "D")]
    pub count: usize,
    /// Max |W_hat - W| over the pair grid, one per independent spec.
    pub max_errors: Vec<f64>,
    pub mean_errors: Vec<f64>,
    pub median_max_error: f64,
    pub median_mean_error: f64,
    pub reference_error: f64,
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len();
    if m == 0 {
        return f64::NAN;
    }
    if m % 2 == 1 {
        v[m / 2]
    } else {
        0.5 * (v[m / 2 - 1] + v[m / 2])
    }
}

/// Entrywise error of `W_hat` over all pairs of rows of `points`, for each
/// D in `counts`, over `reps` independent specs.
pub fn verify_kernel_convergence(
    family: &KernelFamily,
    points: &Matrix,
    counts: &[usize],
    reps: usize,
    d_ref: usize,
    seed: u64,
) -> Result<Vec<KernelErrorRow>> {
    let reference = family.reference(points, d_ref, derive_seed(seed, u64::MAX))?;
    let dim = family.dim(points.ncols());
    counts
        .iter()
        .enumerate()
        .map(|(ci, &count)| {
            let errs: Vec<(f64, f64)> = (0..reps)
                .into_par_iter()
                .map(|r| {
                    let spec = family.sample(count, dim, derive_seed(seed, (ci * reps + r) as u64))?;
                    let w_hat = embed(&spec, points)?.gram();
                    let diff = (w_hat - &reference.w).abs();
                    Ok((diff.max(), diff.mean()))
                })
                .collect::<Result<_>>()?;
            let max_errors: Vec<f64> = errs.iter().map(|e| e.0).collect();
            let mean_errors: Vec<f64> = errs.iter().map(|e| e.1).collect();
            Ok(KernelErrorRow {
                count,
                median_max_error: median(&max_errors),
                median_mean_error: median(&mean_errors),
                max_errors,
                mean_errors,
                reference_error: reference.error_estimate,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct HoeffdingRow {
    #[serde(rename = "D")]
    pub count: usize,
    pub epsilon: f64,
    pub draws: usize,
    /// Fraction of draws with |psi(x)^T psi(y) - k(x, y)| >= epsilon.
    pub exceed_fraction: f64,
    /// `2 exp(-D eps^2 / 4)`, capped at 1.
    pub bound: f64,
    /// Binomial standard error at the bound.
    pub standard_error: f64,
    pub holds: bool,
}

/// Empirical tail probability of the pointwise error for one pair.
pub fn verify_hoeffding(
    family: &KernelFamily,
    x: &[f64],
    y: &[f64],
    count: usize,
    epsilon: f64,
    draws: usize,
    d_ref: usize,
    seed: u64,
) -> Result<HoeffdingRow> {
    let pair = Matrix::from_row_slice(2, x.len(), &[x, y].concat());
    let exact = family.reference(&pair, d_ref, derive_seed(seed, u64::MAX))?.w[(0, 1)];
    let exceed = (0..draws)
        .into_par_iter()
        .map(|r| {
            let spec = family.sample(count, x.len(), derive_seed(seed, r as u64))?;
            let psi = embed(&spec, &pair)?;
            let est = psi.matrix().column(0).dot(&psi.matrix().column(1));
            Ok(usize::from((est - exact).abs() >= epsilon))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .sum::<usize>();
    let bound = (2.0 * (-(count as f64) * epsilon * epsilon / 4.0).exp()).min(1.0);
    let standard_error = (bound * (1.0 - bound) / draws as f64).sqrt();
    let exceed_fraction = exceed as f64 / draws as f64;
    Ok(HoeffdingRow {
        count,
        epsilon,
        draws,
        exceed_fraction,
        bound,
        standard_error,
        holds: exceed_fraction <= bound + 3.0 * standard_error,
    })
}

// ---------------------------------------------------------------------------
// perturbation of the normalized kernel

#[derive(Debug, Clone, Serialize)]
pub struct PerturbationRow {
    #[serde(rename = "D")]
    pub count: usize,
    /// min W_ij
    pub lower: f64,
    /// max W_ij
    pub upper: f64,
    /// max |W_ij - W_hat_ij| / lower
    pub delta: f64,
    pub h_norms: [f64; 3],
    pub h_bounds: [f64; 3],
    /// |L - L_hat|_2
    pub l_diff_norm: f64,
    pub reference_error: f64,
}

impl PerturbationRow {
    /// All three norm bounds hold (up to rounding).
    pub fn bounds_hold(&self) -> bool {
        self.h_norms.iter().zip(&self.h_bounds).all(|(h, b)| *h <= b * (1.0 + 1e-9) + 1e-14)
    }

    /// `|L - L_hat| <= |H1| + |H2| + |H3|` (up to rounding).
    pub fn triangle_holds(&self) -> bool {
        self.l_diff_norm <= self.h_norms.iter().sum::<f64>() * (1.0 + 1e-9) + 1e-14
    }
}

/// Splits `L_hat = L - H1 - H2 - H3` for a kernel matrix `w` and its
/// approximation `w_hat`, and evaluates the spectral-norm bounds in terms of
/// `delta`, `lower` and `upper`.
pub fn perturbation_bounds(w: &Matrix, w_hat: &Matrix) -> Result<PerturbationRow> {
    if w.shape() != w_hat.shape() || !w.is_square() {
        return Err(FlsError::DimensionMismatch { expected: w.nrows(), got: w_hat.nrows() });
    }
    let lower = w.min();
    let upper = w.max();
    if !(lower > 0.0) {
        return Err(FlsError::InvalidParam(format!("kernel entries must be positive (min {lower:e})")));
    }
    let delta = (w - w_hat).amax() / lower;
    if delta >= 1.0 {
        return Err(FlsError::DeltaTooLarge(delta));
    }
    let inv_sqrt = |m: &Matrix| -> Vec<f64> { m.column_sum().iter().map(|d| 1.0 / d.sqrt()).collect() };
    let dw = inv_sqrt(w);
    let dh = inv_sqrt(w_hat);
    let n = w.nrows();
    let h1 = Matrix::from_fn(n, n, |i, j| (dw[i] - dh[i]) * w[(i, j)] * dw[j]);
    let h2 = Matrix::from_fn(n, n, |i, j| dh[i] * (w[(i, j)] - w_hat[(i, j)]) * dw[j]);
    let h3 = Matrix::from_fn(n, n, |i, j| dh[i] * w_hat[(i, j)] * (dw[j] - dh[j]));
    let l = dense_normalized(w)?;
    let l_hat = dense_normalized(w_hat)?;
    let ratio = upper / lower;
    let h_bounds = [
        ratio / 2.0 * (1.0 - delta).powf(-1.5) * delta,
        (1.0 - delta).powf(-0.5) * delta,
        delta * (ratio + delta) / (2.0 * (1.0 - delta).powi(2)),
    ];
    Ok(PerturbationRow {
        count: 0,
        lower,
        upper,
        delta,
        h_norms: [spectral_norm(&h1), spectral_norm(&h2), spectral_norm(&h3)],
        h_bounds,
        l_diff_norm: spectral_norm(&(l - l_hat)),
        reference_error: 0.0,
    })
}

/// Perturbation bounds for a D-sample spec against the reference kernel.
pub fn verify_perturbation(
    family: &KernelFamily,
    points: &Matrix,
    count: usize,
    d_ref: usize,
    seed: u64,
) -> Result<PerturbationRow> {
    if matches!(family, KernelFamily::GaussianRff { .. }) {
        return Err(FlsError::InvalidParam(
            "perturbation bounds need a positive kernel; random Fourier features can be negative".into(),
        ));
    }
    let reference = family.reference(points, d_ref, derive_seed(seed, u64::MAX))?;
    let spec = family.sample(count, points.ncols(), derive_seed(seed, 0))?;
    let w_hat = embed(&spec, points)?.gram();
    let mut row = perturbation_bounds(&reference.w, &w_hat)?;
    row.count = count;
    row.reference_error = reference.error_estimate;
    Ok(row)
}

// ---------------------------------------------------------------------------
// eigenvector stability

#[derive(Debug, Clone, Serialize)]
pub struct EigvecRow {
    #[serde(rename = "D")]
    pub count: usize,
    pub n: usize,
    /// Sign-aligned |v_hat - v| per independent spec.
    pub errors: Vec<f64>,
    pub median_error: f64,
    /// dist(lambda_1, {0} and the rest of the spectrum) of the reference.
    pub eigengap: f64,
}

/// Second-largest eigenvector, eigenvalues of a normalized kernel.
fn second_eigvec(w: &Matrix) -> Result<(Vec<f64>, nalgebra::DVector<f64>)> {
    let l = dense_normalized(w)?;
    let (values, vectors) = symmetric_eigen_desc(&l);
    Ok((values, vectors.column(1).into_owned()))
}

/// `dist(lambda_1, {0} U sigma \ {lambda_1})` for descending eigenvalues.
pub fn eigengap(values: &[f64]) -> f64 {
    let target = values[1];
    values
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != 1)
        .map(|(_, v)| (v - target).abs())
        .fold(target.abs(), f64::min)
}

/// min over s in {1, -1} of |a - s b|.
pub fn sign_aligned_distance(a: &nalgebra::DVector<f64>, b: &nalgebra::DVector<f64>) -> f64 {
    (a - b).norm().min((a + b).norm())
}

/// Distance between the second eigenvectors of the reference and
/// approximate normalized kernels, for each D.
pub fn verify_eigvec_convergence(
    family: &KernelFamily,
    points: &Matrix,
    counts: &[usize],
    reps: usize,
    d_ref: usize,
    seed: u64,
) -> Result<Vec<EigvecRow>> {
    let reference = family.reference(points, d_ref, derive_seed(seed, u64::MAX))?;
    let (values, v) = second_eigvec(&reference.w)?;
    let gap = eigengap(&values);
    if gap < 1e-3 {
        return Err(FlsError::EigengapTooSmall(gap));
    }
    let dim = family.dim(points.ncols());
    counts
        .iter()
        .enumerate()
        .map(|(ci, &count)| {
            let errors: Vec<f64> = (0..reps)
                .into_par_iter()
                .map(|r| {
                    let spec = family.sample(count, dim, derive_seed(seed, (ci * reps + r) as u64))?;
                    let (_, v_hat) = second_eigvec(&embed(&spec, points)?.gram())?;
                    Ok(sign_aligned_distance(&v_hat, &v))
                })
                .collect::<Result<_>>()?;
            Ok(EigvecRow {
                count,
                n: points.nrows(),
                median_error: median(&errors),
                errors,
                eigengap: gap,
            })
        })
        .collect()
}

// ---------------------------------------------------------------------------
// rotation invariance under the uniform Grassmannian measure

#[derive(Debug, Clone, Serialize)]
pub struct RotationPair {
    pub estimate: f64,
    pub rotated_estimate: f64,
    pub standard_error: f64,
    pub rotated_standard_error: f64,
    pub within: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct RotationReport {
    pub d: usize,
    pub l: usize,
    #[serde(rename = "D")]
    pub count: usize,
    pub distance: f64,
    pub pairs: Vec<RotationPair>,
    pub fraction_within: f64,
    pub passed: bool,
}

/// Monte Carlo estimate of a subspace kernel entry and its standard error.
pub fn kernel_estimate(flats: &[AffineFlat], sigma: f64, x: &[f64], y: &[f64]) -> (f64, f64) {
    let s2 = sigma * sigma;
    let vals: Vec<f64> = flats
        .iter()
        .map(|f| (-f.sq_distance(x) / s2).exp() * (-f.sq_distance(y) / s2).exp())
        .collect();
    let m = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / m;
    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0).max(1.0);
    (mean, (var / m).sqrt())
}

fn unit_vector(d: usize, rng: &mut impl Rng) -> nalgebra::DVector<f64> {
    nalgebra::DVector::from_fn(d, |_, _| StandardNormal.sample(rng)).normalize()
}

/// Pair on the unit sphere at Euclidean distance `distance` (at most 2).
pub fn sphere_pair(d: usize, distance: f64, rng: &mut impl Rng) -> (nalgebra::DVector<f64>, nalgebra::DVector<f64>) {
    let x = unit_vector(d, rng);
    let mut t = unit_vector(d, rng);
    t -= &x * x.dot(&t);
    t.normalize_mut();
    let theta = 2.0 * (distance / 2.0).clamp(0.0, 1.0).asin();
    let y = &x * theta.cos() + t * theta.sin();
    (x, y)
}

/// Random orthogonal matrix (QR of a Gaussian matrix).
pub fn random_rotation(d: usize, rng: &mut impl Rng) -> Matrix {
    orthonormalize(Matrix::from_fn(d, d, |_, _| StandardNormal.sample(rng)))
}

/// Compares uniform-Grassmannian kernel estimates for sphere pairs and their
/// rotated copies, each from an independent draw of `count` flats.
pub fn verify_rotation_invariance(
    d: usize,
    l: usize,
    n_pairs: usize,
    count: usize,
    distance: f64,
    sigma: f64,
    seed: u64,
) -> Result<RotationReport> {
    if l == 0 || l >= d {
        return Err(FlsError::InvalidParam(format!("need 1 <= l < d, got l={l}, d={d}")));
    }
    let pairs: Vec<RotationPair> = (0..n_pairs)
        .into_par_iter()
        .map(|p| {
            let mut rng = rng_from_seed(derive_seed(seed, 3 * p as u64));
            let (x, y) = sphere_pair(d, distance, &mut rng);
            let r = random_rotation(d, &mut rng);
            let (rx, ry) = (&r * &x, &r * &y);
            let flats = sample_uniform_grassmann(d, l, count, derive_seed(seed, 3 * p as u64 + 1))?;
            let (k, se) = kernel_estimate(&flats, sigma, x.as_slice(), y.as_slice());
            let flats = sample_uniform_grassmann(d, l, count, derive_seed(seed, 3 * p as u64 + 2))?;
            let (kr, ser) = kernel_estimate(&flats, sigma, rx.as_slice(), ry.as_slice());
            Ok(RotationPair {
                estimate: k,
                rotated_estimate: kr,
                standard_error: se,
                rotated_standard_error: ser,
                within: (k - kr).abs() <= 3.0 * (se + ser),
            })
        })
        .collect::<Result<_>>()?;
    let fraction_within = if pairs.is_empty() {
        1.0
    } else {
        pairs.iter().filter(|p| p.within).count() as f64 / pairs.len() as f64
    };
    Ok(RotationReport {
        d,
        l,
        count,
        distance,
        pairs,
        fraction_within,
        passed: fraction_within >= 0.95,
    })
}

// ---------------------------------------------------------------------------
// benchmark

/// Algorithm settings shared by every model of a benchmark. The defaults
/// (150 landmarks, cover bandwidth rule, 5 k-means restarts) are the ones
/// used for the standard suites.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    /// Landmark count D.
    #[serde(default = "default_landmarks")]
    pub landmarks: usize,
    #[serde(default)]
    pub method: LandmarkMethod,
    /// Flat dimension; the largest subspace dimension of the model when absent.
    #[serde(default)]
    pub flat_dim: Option<usize>,
    #[serde(default)]
    pub sigma: Option<f64>,
    /// Multiplier on the automatic bandwidth.
    #[serde(default = "default_sigma_scale")]
    pub sigma_scale: f64,
    #[serde(default = "default_sigma_rule")]
    pub sigma_rule: SigmaRule,
    #[serde(default)]
    pub scales: Option<usize>,
    #[serde(default)]
    pub start_size: Option<usize>,
    #[serde(default)]
    pub drop_first: bool,
    #[serde(default)]
    pub normalize_sphere: bool,
    #[serde(default)]
    pub svd: SvdMethod,
    #[serde(default = "default_restarts")]
    pub kmeans_restarts: usize,
}

fn default_landmarks() -> usize {
    150
}

fn default_sigma_rule() -> SigmaRule {
    SigmaRule::Cover
}

fn default_sigma_scale() -> f64 {
    1.0
}

fn default_restarts() -> usize {
    5
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            landmarks: default_landmarks(),
            method: LandmarkMethod::Random,
            flat_dim: None,
            sigma: None,
            sigma_scale: 1.0,
            sigma_rule: default_sigma_rule(),
            scales: None,
            start_size: None,
            drop_first: false,
            normalize_sphere: false,
            svd: SvdMethod::Gram,
            kmeans_restarts: default_restarts(),
        }
    }
}

impl BenchConfig {
    pub fn cluster_config(&self, model: &SyntheticModel, seed: u64) -> ClusterConfig {
        let flat_dim = self.flat_dim.unwrap_or_else(|| model.dims.iter().copied().max().unwrap_or(1));
        let landmarks = LandmarkConfig {
            count: self.landmarks,
            method: self.method,
            flat_dim,
            scales: self.scales,
            start_size: self.start_size,
            sigma: self.sigma,
            sigma_scale: self.sigma_scale,
            sigma_rule: self.sigma_rule,
            linear_flats: false,
        };
        ClusterConfig {
            landmarks,
            clusters: model.dims.len(),
            seed,
            drop_first: self.drop_first,
            normalize_sphere: self.normalize_sphere,
            svd: self.svd,
            kmeans_restarts: self.kmeans_restarts,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchRow {
    pub model: String,
    pub outlier_ratio: f64,
    pub rates: Vec<f64>,
    pub times: Vec<f64>,
    pub mean_rate: f64,
    pub mean_time: f64,
}

/// Named outlier-level suites: the four models at 5% or 30% outliers.
pub fn standard_suite(outlier_ratio: f64) -> Vec<SyntheticModel> {
    [(vec![2, 2], 6), (vec![4, 5, 6], 10), (vec![5, 6, 7], 20), (vec![3, 4, 5, 6, 7], 80)]
        .into_iter()
        .map(|(dims, ambient)| SyntheticModel::new(dims, ambient, outlier_ratio))
        .collect()
}

/// Generates, clusters and scores `n_trials` data sets per model.
pub fn benchmark_suite(models: &[SyntheticModel], config: &BenchConfig, n_trials: usize, seed: u64) -> Result<Vec<BenchRow>> {
    if n_trials == 0 {
        return Ok(Vec::new());
    }
    models
        .iter()
        .enumerate()
        .map(|(mi, model)| {
            let mut rates = Vec::with_capacity(n_trials);
            let mut times = Vec::with_capacity(n_trials);
            for trial in 0..n_trials {
                let trial_seed = derive_seed(derive_seed(seed, mi as u64), trial as u64);
                let run = || -> Result<(f64, f64)> {
                    let synth = gen_synthetic(model, derive_seed(trial_seed, 0))?;
                    let cfg = config.cluster_config(model, derive_seed(trial_seed, 1));
                    let start = Instant::now();
                    let result = fls_cluster(&synth.data.points, &cfg)?;
                    let elapsed = start.elapsed().as_secs_f64();
                    let truth = synth.data.labels.as_ref().expect("synthetic data is labeled");
                    let report = clustering_rate(&result.labels, truth, synth.data.outlier_mask.as_deref())?;
                    Ok((report.rate, elapsed))
                };
                let (rate, time) = run().map_err(|e| FlsError::InvalidParam(format!("{} trial {trial}: {e}", model.name())))?;
                rates.push(rate);
                times.push(time);
            }
            Ok(BenchRow {
                model: model.name(),
                outlier_ratio: model.outlier_ratio,
                mean_rate: rates.iter().sum::<f64>() / n_trials as f64,
                mean_time: times.iter().sum::<f64>() / n_trials as f64,
                rates,
                times,
            })
        })
        .collect()
}

/// Aligned text table: one column per model, `rate (time)` cells.
pub fn format_bench_table(rows: &[BenchRow]) -> String {
    let header: Vec<String> = rows.iter().map(|r| r.model.clone()).collect();
    let cells: Vec<String> = rows.iter().map(|r| format!("{:.2} ({:.2})", r.mean_rate, r.mean_time)).collect();
    let widths: Vec<usize> = header.iter().zip(&cells).map(|(h, c)| h.len().max(c.len())).collect();
    let mut out = String::new();
    let _ = write!(out, "{:<6}", "");
    for (h, w) in header.iter().zip(&widths) {
        let _ = write!(out, "  {h:>w$}");
    }
    out.push('\n');
    let _ = write!(out, "{:<6}", "FLS");
    for (c, w) in cells.iter().zip(&widths) {
        let _ = write!(out, "  {c:>w$}");
    }
    out.push('\n');
    out
}

/// Raw per-trial rows: `model,outlier_ratio,trial,rate,time`.
pub fn bench_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from("model,outlier_ratio,trial,rate,time\n");
    for r in rows {
        for (t, (rate, time)) in r.rates.iter().zip(&r.times).enumerate() {
            let _ = writeln!(out, "\"{}\",{},{},{},{}", r.model, r.outlier_ratio, t, rate, time);
        }
    }
    out
}
