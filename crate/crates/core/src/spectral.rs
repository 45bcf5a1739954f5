//! Fast landmark subspace clustering and its dense counterpart.
//!
//! The approximate normalized kernel `L_hat = D_hat^{-1/2} psi^T psi D_hat^{-1/2}`
//! is never formed: its top eigenvectors are the right singular vectors of
//! the D x n matrix `psi D_hat^{-1/2}`, and the degrees come from one
//! matrix-vector product, `d_i = psi(x_i)^T sum_j psi(x_j)`.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::datagen::sphere_normalize;
use crate::error::{FlsError, Result};
use crate::kernels::{embed, EmbeddingMatrix, FeatureSpec, DENSE_LIMIT};
use crate::landmarks::{fit_flats, select_landmarks, LandmarkConfig};
use crate::linalg::{
    kmeans, normalize_rows, symmetric_eigen_desc, truncated_svd, truncated_svd_iterative, IterativeSvdOptions,
    KMeansOptions, Matrix, SvdMethod,
};
use crate::rng::derive_seed;

const DEGREE_FLOOR: f64 = 1e-12;

/// Degrees `d_i`, all strictly positive.
#[derive(Debug, Clone, PartialEq)]
pub struct DegreeVector(Vec<f64>);

impl DegreeVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, &v)| !(v > DEGREE_FLOOR)) {
            return Err(FlsError::DegreeNotPositive { index, value });
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

/// `d_i = psi(x_i)^T s` with `s = sum_j psi(x_j)`, in O(nD).
pub fn degrees(psi: &EmbeddingMatrix) -> Result<DegreeVector> {
    let m = psi.matrix();
    if m.is_empty() {
        return Err(FlsError::DegenerateInput("empty embedding".into()));
    }
    let total = m.column_sum();
    DegreeVector::new(m.tr_mul(&total).iter().copied().collect())
}

/// Row-normalized spectral coordinates.
#[derive(Debug, Clone)]
pub struct SpectralEmbedding {
    /// n x K (or n x (K-1) when the first vector is dropped).
    pub coords: Matrix,
    /// Top K singular values of `psi D_hat^{-1/2}`.
    pub singular_values: Vec<f64>,
}

/// Top-K right singular vectors of `psi D_hat^{-1/2}`, rows normalized.
pub fn spectral_embed(psi: &EmbeddingMatrix, k: usize, drop_first: bool, method: SvdMethod) -> Result<SpectralEmbedding> {
    let deg = degrees(psi)?;
    let mut a = psi.matrix().clone();
    for (mut col, d) in a.column_iter_mut().zip(deg.values()) {
        col /= d.sqrt();
    }
    let svd = match method {
        SvdMethod::Gram => truncated_svd(&a, k)?,
        SvdMethod::Iterative => truncated_svd_iterative(&a, k, IterativeSvdOptions::default())?,
    };
    let skip = usize::from(drop_first);
    let mut coords = svd.right.columns(skip, k - skip).into_owned();
    normalize_rows(&mut coords);
    Ok(SpectralEmbedding {
        coords,
        singular_values: svd.singular_values,
    })
}

/// Wall-clock seconds per pipeline stage.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub landmarks: f64,
    pub flats: f64,
    pub embed: f64,
    pub svd: f64,
    pub kmeans: f64,
}

impl StageTimings {
    pub fn total(&self) -> f64 {
        self.landmarks + self.flats + self.embed + self.svd + self.kmeans
    }
}

#[derive(Debug, Clone)]
pub struct ClusterResult {
    pub labels: Vec<usize>,
    pub embedding: Matrix,
    pub singular_values: Vec<f64>,
    /// Kernel bandwidth used (absent for the dense path).
    pub sigma: Option<f64>,
    pub timings: StageTimings,
}

#[derive(Serialize)]
struct ClusterDoc<'a> {
    n_points: usize,
    labels: &'a [usize],
    singular_values: &'a [f64],
    #[serde(skip_serializing_if = "Option::is_none")]
    sigma: Option<f64>,
    timings: StageTimings,
}

impl ClusterResult {
    /// JSON with labels, singular values, bandwidth, and the timings under
    /// their own `timings` key.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&ClusterDoc {
            n_points: self.labels.len(),
            labels: &self.labels,
            singular_values: &self.singular_values,
            sigma: self.sigma,
            timings: self.timings,
        })
        .expect("result serializes")
    }

    /// The spectral embedding as CSV, one row per point.
    pub fn embedding_csv(&self) -> String {
        let mut out = String::new();
        for row in self.embedding.row_iter() {
            let fields: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterConfig {
    pub landmarks: LandmarkConfig,
    /// Number of clusters K.
    pub clusters: usize,
    #[serde(default)]
    pub seed: u64,
    /// Cluster on singular vectors 2..K instead of 1..K.
    #[serde(default)]
    pub drop_first: bool,
    /// Project the data onto the unit sphere first.
    #[serde(default)]
    pub normalize_sphere: bool,
    #[serde(default)]
    pub svd: SvdMethod,
    #[serde(default = "one")]
    pub kmeans_restarts: usize,
}

fn one() -> usize {
    1
}

impl ClusterConfig {
    pub fn new(landmarks: LandmarkConfig, clusters: usize, seed: u64) -> Self {
        Self {
            landmarks,
            clusters,
            seed,
            drop_first: false,
            normalize_sphere: false,
            svd: SvdMethod::Gram,
            kmeans_restarts: 1,
        }
    }
}

fn timed<T>(slot: &mut f64, f: impl FnOnce() -> Result<T>) -> Result<T> {
    let start = Instant::now();
    let out = f();
    *slot = start.elapsed().as_secs_f64();
    out
}

/// Fast landmark subspace clustering of the rows of `points`.
///
/// Stages: landmark selection, local best-fit flats (and bandwidth), subspace
/// kernel features, degrees plus truncated SVD, k-means on the normalized
/// rows of the singular vectors.
///
/// The stages run on the rows in lexicographic order, so the result does not
/// depend on the input order: permuting the points permutes the labels.
pub fn fls_cluster(points: &Matrix, cfg: &ClusterConfig) -> Result<ClusterResult> {
    let order = canonical_order(points);
    let sorted = Matrix::from_fn(points.nrows(), points.ncols(), |i, j| points[(order[i], j)]);
    let mut result = fls_cluster_ordered(&sorted, cfg)?;
    let mut labels = vec![0; order.len()];
    let mut embedding = Matrix::zeros(order.len(), result.embedding.ncols());
    for (pos, &orig) in order.iter().enumerate() {
        labels[orig] = result.labels[pos];
        embedding.set_row(orig, &result.embedding.row(pos));
    }
    result.labels = labels;
    result.embedding = embedding;
    Ok(result)
}

/// Row indices sorted lexicographically by value.
fn canonical_order(points: &Matrix) -> Vec<usize> {
    let mut order: Vec<usize> = (0..points.nrows()).collect();
    order.sort_by(|&a, &b| {
        points
            .row(a)
            .iter()
            .zip(points.row(b).iter())
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    order
}

fn check_cluster_input(points: &Matrix, cfg: &ClusterConfig) -> Result<()> {
    let n = points.nrows();
    let k = cfg.clusters;
    if k == 0 {
        return Err(FlsError::InvalidParam("cluster count K must be at least 1".into()));
    }
    if k > n {
        return Err(FlsError::DegenerateInput(format!("{k} clusters requested for {n} points")));
    }
    cfg.landmarks.validate(n, points.ncols())?;
    if k > cfg.landmarks.count {
        return Err(FlsError::InvalidParam(format!(
            "K={k} exceeds the landmark count D={}",
            cfg.landmarks.count
        )));
    }
    super::linalg::ensure_finite(points, "input points")
}

fn fls_cluster_ordered(points: &Matrix, cfg: &ClusterConfig) -> Result<ClusterResult> {
    let k = cfg.clusters;
    check_cluster_input(points, cfg).map_err(|e| e.at("input"))?;
    let normalized;
    let points = if cfg.normalize_sphere {
        normalized = sphere_normalize(points);
        &normalized
    } else {
        points
    };
    let mut t = StageTimings::default();
    let landmarks = timed(&mut t.landmarks, || {
        select_landmarks(points, cfg.landmarks.count, cfg.landmarks.method, derive_seed(cfg.seed, 1))
    })
    .map_err(|e| e.at("landmarks"))?;
    let spec = timed(&mut t.flats, || {
        let flats: Vec<_> = fit_flats(points, &landmarks, &cfg.landmarks)?.into_iter().map(|f| f.flat).collect();
        let sigma = cfg.landmarks.resolve_sigma(points, &flats, derive_seed(cfg.seed, 2))?;
        Ok(FeatureSpec::Subspace { sigma, flats })
    })
    .map_err(|e| e.at("flats"))?;
    let psi = timed(&mut t.embed, || embed(&spec, points)).map_err(|e| e.at("embed"))?;
    let spectral = timed(&mut t.svd, || spectral_embed(&psi, k, cfg.drop_first, cfg.svd)).map_err(|e| e.at("svd"))?;
    let opts = KMeansOptions {
        restarts: cfg.kmeans_restarts,
        ..KMeansOptions::default()
    };
    let km = timed(&mut t.kmeans, || kmeans_labels(&spectral.coords, k, derive_seed(cfg.seed, 3), opts))
        .map_err(|e| e.at("kmeans"))?;
    Ok(ClusterResult {
        labels: km,
        embedding: spectral.coords,
        singular_values: spectral.singular_values,
        sigma: Some(spec.sigma()),
        timings: t,
    })
}

fn kmeans_labels(coords: &Matrix, k: usize, seed: u64, opts: KMeansOptions) -> Result<Vec<usize>> {
    if coords.ncols() == 0 {
        // K = 1 with the first vector dropped leaves nothing to cluster on
        return Ok(vec![0; coords.nrows()]);
    }
    Ok(kmeans(coords, k, seed, opts)?.labels)
}

/// Spectral clustering from an already computed feature matrix, through
/// the implicit SVD. Shares the seed pipeline of [`fls_cluster`].
pub fn cluster_embedding(psi: &EmbeddingMatrix, k: usize, seed: u64, drop_first: bool, method: SvdMethod) -> Result<ClusterResult> {
    let mut t = StageTimings::default();
    let spectral = timed(&mut t.svd, || spectral_embed(psi, k, drop_first, method))?;
    let labels = timed(&mut t.kmeans, || kmeans_labels(&spectral.coords, k, derive_seed(seed, 3), KMeansOptions::default()))?;
    Ok(ClusterResult {
        labels,
        embedding: spectral.coords,
        singular_values: spectral.singular_values,
        sigma: None,
        timings: t,
    })
}

/// `L = D^{-1/2} W D^{-1/2}` with `D = diag(row sums of W)`.
pub fn dense_normalized(w: &Matrix) -> Result<Matrix> {
    if !w.is_square() {
        return Err(FlsError::DimensionMismatch { expected: w.nrows(), got: w.ncols() });
    }
    let deg = DegreeVector::new(w.column_sum().iter().copied().collect())?;
    let inv: Vec<f64> = deg.values().iter().map(|d| 1.0 / d.sqrt()).collect();
    Ok(Matrix::from_fn(w.nrows(), w.ncols(), |i, j| w[(i, j)] * inv[i] * inv[j]))
}

/// Exact normalized spectral clustering on a dense kernel matrix.
pub fn dense_spectral_cluster(w: &Matrix, k: usize, seed: u64, drop_first: bool) -> Result<ClusterResult> {
    let n = w.nrows();
    if n > DENSE_LIMIT {
        return Err(FlsError::DenseLimitExceeded { n, limit: DENSE_LIMIT });
    }
    if k == 0 || k > n {
        return Err(FlsError::DegenerateInput(format!("{k} clusters requested for {n} points")));
    }
    let mut t = StageTimings::default();
    let (values, coords) = timed(&mut t.svd, || {
        let l = dense_normalized(w)?;
        let (values, vectors) = symmetric_eigen_desc(&l);
        let skip = usize::from(drop_first);
        let mut coords = vectors.columns(skip, k - skip).into_owned();
        normalize_rows(&mut coords);
        Ok((values[..k].to_vec(), coords))
    })?;
    let labels = timed(&mut t.kmeans, || kmeans_labels(&coords, k, derive_seed(seed, 3), KMeansOptions::default()))?;
    Ok(ClusterResult {
        labels,
        embedding: coords,
        // eigenvalues of L; the square roots of the approximate path's singular values
        singular_values: values,
        sigma: None,
        timings: t,
    })
}
