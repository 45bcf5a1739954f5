//! Python bindings. Matrices cross the boundary as lists of rows.

use fls_core::datagen::{self, SyntheticModel};
use fls_core::evaluation::clustering_rate as rate;
use fls_core::kernels::{self, sample_gaussian_rff};
use fls_core::landmarks::{build_subspace_spec, LandmarkConfig, LandmarkMethod, SigmaRule};
use fls_core::linalg::SvdMethod;
use fls_core::spectral::{self, ClusterConfig};
use fls_core::{FlsError, Matrix};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn to_py(e: FlsError) -> PyErr {
    match e.root() {
        FlsError::InvalidParam(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn matrix(rows: Vec<Vec<f64>>) -> PyResult<Matrix> {
    let n = rows.len();
    let d = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != d) {
        return Err(PyValueError::new_err("rows must all have the same length"));
    }
    Ok(Matrix::from_fn(n, d, |i, j| rows[i][j]))
}

fn rows(m: &Matrix) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn parsed<T: std::str::FromStr>(s: &str, what: &str) -> PyResult<T> {
    s.parse().map_err(|_| PyValueError::new_err(format!("unknown {what} {s:?}")))
}

/// Samples a union of subspaces with outliers.
/// Returns a dict with `points`, `labels` (-1 for outliers) and `outliers`.
#[pyfunction]
#[pyo3(signature = (dims, ambient, outlier_ratio=0.0, pts=250, noise=0.05, seed=0))]
fn gen_synthetic<'py>(
    py: Python<'py>,
    dims: Vec<usize>,
    ambient: usize,
    outlier_ratio: f64,
    pts: usize,
    noise: f64,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let model = SyntheticModel {
        dims,
        ambient,
        pts_per_subspace: pts,
        noise_sigma: noise,
        outlier_ratio,
    };
    let data = datagen::gen_synthetic(&model, seed).map_err(to_py)?.data;
    let out = PyDict::new(py);
    out.set_item("points", rows(&data.points))?;
    out.set_item("labels", data.labels.clone())?;
    out.set_item("outliers", data.outliers())?;
    Ok(out)
}

#[pyclass(frozen, get_all)]
struct ClusterResult {
    labels: Vec<usize>,
    embedding: Vec<Vec<f64>>,
    singular_values: Vec<f64>,
    sigma: Option<f64>,
    /// Seconds per stage: landmarks, flats, embed, svd, kmeans.
    timings: Vec<(String, f64)>,
}

#[pymethods]
impl ClusterResult {
    fn __repr__(&self) -> String {
        format!("ClusterResult(n={}, sigma={:?})", self.labels.len(), self.sigma)
    }
}

/// Fast landmark subspace clustering of the rows of `points`.
#[pyfunction]
#[pyo3(signature = (
    points, k, flat_dim, landmarks=60, seed=0, sigma=None, sigma_rule="median", sigma_scale=1.0,
    method="random", drop_first=false, restarts=1, svd="gram"
))]
#[allow(clippy::too_many_arguments)]
fn fls_cluster(
    py: Python<'_>,
    points: Vec<Vec<f64>>,
    k: usize,
    flat_dim: usize,
    landmarks: usize,
    seed: u64,
    sigma: Option<f64>,
    sigma_rule: &str,
    sigma_scale: f64,
    method: &str,
    drop_first: bool,
    restarts: usize,
    svd: &str,
) -> PyResult<ClusterResult> {
    let points = matrix(points)?;
    let mut lc = LandmarkConfig::new(landmarks, flat_dim);
    lc.sigma = sigma;
    lc.sigma_rule = parsed::<SigmaRule>(sigma_rule, "sigma rule")?;
    lc.sigma_scale = sigma_scale;
    lc.method = parsed::<LandmarkMethod>(method, "landmark method")?;
    let mut cfg = ClusterConfig::new(lc, k, seed);
    cfg.drop_first = drop_first;
    cfg.kmeans_restarts = restarts;
    cfg.svd = match svd {
        "gram" => SvdMethod::Gram,
        "iterative" => SvdMethod::Iterative,
        other => return Err(PyValueError::new_err(format!("unknown svd method {other:?}"))),
    };
    let r = py.allow_threads(|| spectral::fls_cluster(&points, &cfg)).map_err(to_py)?;
    let t = r.timings;
    Ok(ClusterResult {
        embedding: rows(&r.embedding),
        labels: r.labels,
        singular_values: r.singular_values,
        sigma: r.sigma,
        timings: vec![
            ("landmarks".into(), t.landmarks),
            ("flats".into(), t.flats),
            ("embed".into(), t.embed),
            ("svd".into(), t.svd),
            ("kmeans".into(), t.kmeans),
        ],
    })
}

/// Best-permutation accuracy. Returns `(rate, permutation)`; entries marked
/// in `outliers` are left out.
#[pyfunction]
#[pyo3(signature = (pred, truth, outliers=None))]
fn clustering_rate(pred: Vec<usize>, truth: Vec<i64>, outliers: Option<Vec<bool>>) -> PyResult<(f64, Vec<usize>)> {
    let r = rate(&pred, &truth, outliers.as_deref()).map_err(to_py)?;
    Ok((r.rate, r.matched_permutation))
}

#[pyfunction]
fn exact_gaussian_kernel(x: Vec<f64>, y: Vec<f64>, sigma: f64) -> PyResult<f64> {
    if x.len() != y.len() {
        return Err(PyValueError::new_err("points differ in dimension"));
    }
    Ok(kernels::exact_gaussian_kernel(&x, &y, sigma))
}

/// D sampled features of an integral kernel.
#[pyclass(frozen)]
struct FeatureSpec(kernels::FeatureSpec);

#[pymethods]
impl FeatureSpec {
    /// Random Fourier features for `exp(-|x-y|^2 / (2 sigma^2))`.
    #[staticmethod]
    #[pyo3(signature = (sigma, count, dim, seed=0))]
    fn gaussian_rff(sigma: f64, count: usize, dim: usize, seed: u64) -> PyResult<Self> {
        sample_gaussian_rff(sigma, count, dim, seed).map(Self).map_err(to_py)
    }

    /// Subspace features from local best-fit flats at sampled landmarks.
    #[staticmethod]
    #[pyo3(signature = (points, count, flat_dim, seed=0, sigma=None))]
    fn subspace(points: Vec<Vec<f64>>, count: usize, flat_dim: usize, seed: u64, sigma: Option<f64>) -> PyResult<Self> {
        let points = matrix(points)?;
        let mut cfg = LandmarkConfig::new(count, flat_dim);
        cfg.sigma = sigma;
        build_subspace_spec(&points, &cfg, seed).map(Self).map_err(to_py)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        kernels::FeatureSpec::from_json(text).map(Self).map_err(to_py)
    }

    fn to_json(&self) -> String {
        self.0.to_json()
    }

    #[getter]
    fn count(&self) -> usize {
        self.0.count()
    }

    #[getter]
    fn sigma(&self) -> f64 {
        self.0.sigma()
    }

    #[getter]
    fn kind(&self) -> &'static str {
        self.0.kind()
    }

    /// The D x n feature matrix of the given points.
    fn embed(&self, py: Python<'_>, points: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
        let points = matrix(points)?;
        let psi = py.allow_threads(|| kernels::embed(&self.0, &points)).map_err(to_py)?;
        Ok(rows(psi.matrix()))
    }

    /// Approximate kernel matrix `psi^T psi` (n x n).
    fn gram(&self, py: Python<'_>, points: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
        let points = matrix(points)?;
        let psi = py.allow_threads(|| kernels::embed(&self.0, &points)).map_err(to_py)?;
        Ok(rows(&psi.gram()))
    }

    fn __repr__(&self) -> String {
        format!("FeatureSpec(kind={:?}, D={}, sigma={})", self.0.kind(), self.0.count(), self.0.sigma())
    }
}

#[pymodule]
fn fls(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(gen_synthetic, m)?)?;
    m.add_function(wrap_pyfunction!(fls_cluster, m)?)?;
    m.add_function(wrap_pyfunction!(clustering_rate, m)?)?;
    m.add_function(wrap_pyfunction!(exact_gaussian_kernel, m)?)?;
    m.add_class::<FeatureSpec>()?;
    m.add_class::<ClusterResult>()?;
    Ok(())
}
