//! Synthetic union-of-subspaces data and CSV I/O.

use std::path::Path;

use nalgebra::DVector;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{FlsError, Result};
use crate::linalg::{ensure_finite, orthonormalize, Matrix};
use crate::rng::split;

/// Points with optional ground truth. Outliers carry label -1.
#[derive(Debug, Clone, PartialEq)]
pub struct DataSet {
    /// n x d.
    pub points: Matrix,
    pub labels: Option<Vec<i64>>,
    pub outlier_mask: Option<Vec<bool>>,
}

impl DataSet {
    pub fn new(points: Matrix, labels: Option<Vec<i64>>, outlier_mask: Option<Vec<bool>>) -> Result<Self> {
        ensure_finite(&points, "data points")?;
        let n = points.nrows();
        for len in [labels.as_ref().map(Vec::len), outlier_mask.as_ref().map(Vec::len)].into_iter().flatten() {
            if len != n {
                return Err(FlsError::DimensionMismatch { expected: n, got: len });
            }
        }
        if let (Some(l), Some(m)) = (&labels, &outlier_mask) {
            if l.iter().zip(m).any(|(&l, &m)| (l == -1) != m) {
                return Err(FlsError::InvalidParam("label -1 must coincide with the outlier mask".into()));
            }
        }
        Ok(Self { points, labels, outlier_mask })
    }

    pub fn unlabeled(points: Matrix) -> Result<Self> {
        Self::new(points, None, None)
    }

    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    /// Outlier mask, derived from labels when not stored.
    pub fn outliers(&self) -> Vec<bool> {
        match (&self.outlier_mask, &self.labels) {
            (Some(m), _) => m.clone(),
            (None, Some(l)) => l.iter().map(|&v| v < 0).collect(),
            (None, None) => vec![false; self.len()],
        }
    }

    /// Rows permuted so that new row i is old row `order[i]`.
    pub fn permuted(&self, order: &[usize]) -> Self {
        let points = Matrix::from_fn(order.len(), self.dim(), |i, j| self.points[(order[i], j)]);
        Self {
            points,
            labels: self.labels.as_ref().map(|l| order.iter().map(|&i| l[i]).collect()),
            outlier_mask: self.outlier_mask.as_ref().map(|m| order.iter().map(|&i| m[i]).collect()),
        }
    }
}

/// Scales every nonzero row to unit length.
pub fn sphere_normalize(points: &Matrix) -> Matrix {
    let mut out = points.clone();
    crate::linalg::normalize_rows(&mut out);
    out
}

/// A union of linear subspaces with noise and uniform outliers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticModel {
    pub dims: Vec<usize>,
    pub ambient: usize,
    #[serde(default = "default_pts")]
    pub pts_per_subspace: usize,
    #[serde(default = "default_noise")]
    pub noise_sigma: f64,
    #[serde(default)]
    pub outlier_ratio: f64,
}

fn default_pts() -> usize {
    250
}

fn default_noise() -> f64 {
    0.05
}

impl SyntheticModel {
    pub fn new(dims: Vec<usize>, ambient: usize, outlier_ratio: f64) -> Self {
        Self {
            dims,
            ambient,
            pts_per_subspace: default_pts(),
            noise_sigma: default_noise(),
            outlier_ratio,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims.is_empty() {
            return Err(FlsError::InvalidParam("model needs at least one subspace".into()));
        }
        if let Some(&d) = self.dims.iter().find(|&&d| d == 0 || d >= self.ambient) {
            return Err(FlsError::InvalidParam(format!(
                "subspace dimension {d} must lie in 1..{}",
                self.ambient
            )));
        }
        if self.pts_per_subspace == 0 {
            return Err(FlsError::InvalidParam("pts_per_subspace must be at least 1".into()));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(FlsError::InvalidParam(format!("noise_sigma must be nonnegative, got {}", self.noise_sigma)));
        }
        if !(0.0..1.0).contains(&self.outlier_ratio) {
            return Err(FlsError::InvalidParam(format!(
                "outlier ratio must lie in [0, 1), got {}",
                self.outlier_ratio
            )));
        }
        Ok(())
    }

    pub fn n_inliers(&self) -> usize {
        self.dims.len() * self.pts_per_subspace
    }

    pub fn n_outliers(&self) -> usize {
        (self.outlier_ratio * self.n_inliers() as f64).round() as usize
    }

    /// `(2,2) in R^6` style label.
    pub fn name(&self) -> String {
        let dims: Vec<String> = self.dims.iter().map(usize::to_string).collect();
        format!("({}) in R^{}", dims.join(","), self.ambient)
    }
}

/// Generated data plus the true subspace bases (ambient x d_k each).
#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub data: DataSet,
    pub bases: Vec<Matrix>,
}

/// Samples the model: for each subspace a Haar-uniform basis, points uniform
/// in its unit ball, ambient Gaussian noise; then uniform outliers in the
/// origin-centered cube of side twice the largest inlier norm.
pub fn gen_synthetic(model: &SyntheticModel, seed: u64) -> Result<SyntheticData> {
    model.validate()?;
    let amb = model.ambient;
    let n_in = model.n_inliers();
    let n_out = model.n_outliers();
    let mut points = Matrix::zeros(n_in + n_out, amb);
    let mut labels = Vec::with_capacity(n_in + n_out);
    let mut bases = Vec::with_capacity(model.dims.len());
    for (k, &dk) in model.dims.iter().enumerate() {
        let mut rng = split(seed, k as u64 + 1);
        let basis = orthonormalize(Matrix::from_fn(amb, dk, |_, _| StandardNormal.sample(&mut rng)));
        for p in 0..model.pts_per_subspace {
            let g = DVector::from_fn(dk, |_, _| StandardNormal.sample(&mut rng));
            let r: f64 = rng.random::<f64>().powf(1.0 / dk as f64);
            let u = g.normalize() * r;
            let mut x = &basis * u;
            for v in x.iter_mut() {
                let z: f64 = StandardNormal.sample(&mut rng);
                *v += model.noise_sigma * z;
            }
            points.set_row(k * model.pts_per_subspace + p, &x.transpose());
            labels.push(k as i64);
        }
        bases.push(basis);
    }
    let reach = points.rows(0, n_in).row_iter().map(|r| r.norm()).fold(0.0f64, f64::max);
    let mut rng = split(seed, 0);
    for i in n_in..n_in + n_out {
        for j in 0..amb {
            points[(i, j)] = if reach > 0.0 { rng.random_range(-reach..=reach) } else { 0.0 };
        }
        labels.push(-1);
    }
    let mask = labels.iter().map(|&l| l < 0).collect();
    Ok(SyntheticData {
        data: DataSet::new(points, Some(labels), Some(mask))?,
        bases,
    })
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> FlsError {
    FlsError::Io {
        path: path.display().to_string(),
        msg: e.to_string(),
    }
}

/// Parses CSV text. A first row that is not all numbers is a header; a header
/// whose last field is `label` announces an integer label column.
pub fn parse_csv(text: &str) -> Result<DataSet> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut records = Vec::new();
    for (row, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| FlsError::Parse { row: row + 1, col: 0, msg: e.to_string() })?;
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        records.push((row + 1, rec));
    }
    if records.is_empty() {
        return Err(FlsError::Parse { row: 0, col: 0, msg: "no data rows".into() });
    }
    let header_row = records[0].1.iter().any(|f| f.parse::<f64>().is_err());
    let mut has_label = false;
    if header_row {
        let (_, header) = records.remove(0);
        has_label = header.iter().next_back().is_some_and(|f| f.eq_ignore_ascii_case("label"));
        if records.is_empty() {
            return Err(FlsError::Parse { row: 1, col: 0, msg: "header without data rows".into() });
        }
    }
    let width = records[0].1.len();
    let dim = if has_label { width - 1 } else { width };
    if dim == 0 {
        return Err(FlsError::Parse { row: records[0].0, col: 1, msg: "no coordinate columns".into() });
    }
    let mut values = Vec::with_capacity(records.len() * dim);
    let mut labels = Vec::new();
    for (row, rec) in &records {
        if rec.len() != width {
            return Err(FlsError::RaggedRows { row: *row, expected: width, got: rec.len() });
        }
        for (col, field) in rec.iter().enumerate() {
            let bad = |msg: &str| FlsError::Parse { row: *row, col: col + 1, msg: format!("{msg}: {field:?}") };
            if has_label && col == dim {
                labels.push(field.parse::<i64>().map_err(|_| bad("expected integer label"))?);
            } else {
                let v: f64 = field.parse().map_err(|_| bad("expected a decimal number"))?;
                if !v.is_finite() {
                    return Err(bad("non-finite value"));
                }
                values.push(v);
            }
        }
    }
    let points = Matrix::from_row_slice(records.len(), dim, &values);
    let mask = has_label.then(|| labels.iter().map(|&l| l == -1).collect());
    DataSet::new(points, has_label.then_some(labels), mask)
}

pub fn load_csv(path: impl AsRef<Path>) -> Result<DataSet> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    parse_csv(&text)
}

/// Writes a header row (`x0,...,label`), then one row per point.
pub fn to_csv(data: &DataSet) -> String {
    let mut out = String::new();
    let mut header: Vec<String> = (0..data.dim()).map(|j| format!("x{j}")).collect();
    if data.labels.is_some() {
        header.push("label".into());
    }
    out.push_str(&header.join(","));
    out.push('\n');
    for i in 0..data.len() {
        let mut fields: Vec<String> = data.points.row(i).iter().map(|v| format!("{v}")).collect();
        if let Some(l) = &data.labels {
            fields.push(l[i].to_string());
        }
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

pub fn save_csv(path: impl AsRef<Path>, data: &DataSet) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, to_csv(data)).map_err(|e| io_err(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{flat_distance, AffineFlat};

    #[test]
    fn paper_model_counts() {
        let model = SyntheticModel::new(vec![2, 2], 6, 0.05);
        let s = gen_synthetic(&model, 1).unwrap();
        assert_eq!(model.n_inliers(), 500);
        assert_eq!(model.n_outliers(), 25);
        assert_eq!(s.data.len(), 525);
        assert_eq!(s.data.outliers().iter().filter(|&&m| m).count(), 25);
    }

    #[test]
    fn noiseless_points_lie_on_their_subspace() {
        let mut model = SyntheticModel::new(vec![2, 3], 7, 0.0);
        model.noise_sigma = 0.0;
        let s = gen_synthetic(&model, 2).unwrap();
        let labels = s.data.labels.as_ref().unwrap();
        for (i, &l) in labels.iter().enumerate() {
            let flat = AffineFlat::linear(s.bases[l as usize].clone()).unwrap();
            let x: Vec<f64> = s.data.points.row(i).iter().copied().collect();
            assert!(flat_distance(&x, &flat).unwrap() < 1e-12);
        }
    }

    #[test]
    fn outliers_inside_cube() {
        let model = SyntheticModel::new(vec![3, 4], 10, 0.3);
        let s = gen_synthetic(&model, 3).unwrap();
        let mask = s.data.outliers();
        let reach = (0..s.data.len())
            .filter(|&i| !mask[i])
            .map(|i| s.data.points.row(i).norm())
            .fold(0.0, f64::max);
        for i in (0..s.data.len()).filter(|&i| mask[i]) {
            assert!(s.data.points.row(i).amax() <= reach);
        }
    }

    #[test]
    fn inlier_residual_matches_noise_level() {
        let model = SyntheticModel::new(vec![2, 4], 12, 0.0);
        let s = gen_synthetic(&model, 4).unwrap();
        let labels = s.data.labels.as_ref().unwrap();
        for (k, &dk) in model.dims.iter().enumerate() {
            let flat = AffineFlat::linear(s.bases[k].clone()).unwrap();
            let dists: Vec<f64> = (0..s.data.len())
                .filter(|&i| labels[i] == k as i64)
                .map(|i| flat.sq_distance(s.data.points.row(i).transpose().as_slice()))
                .collect();
            let mean = dists.iter().sum::<f64>() / dists.len() as f64;
            // chi-square mean of the noise orthogonal to the subspace
            let expect = 0.05f64.powi(2) * (model.ambient - dk) as f64;
            assert!((mean - expect).abs() < 0.1 * expect, "{mean} vs {expect}");
        }
    }

    #[test]
    fn ball_radius_mean() {
        let mut model = SyntheticModel::new(vec![3], 5, 0.0);
        model.noise_sigma = 0.0;
        model.pts_per_subspace = 4000;
        let s = gen_synthetic(&model, 5).unwrap();
        let radii: Vec<f64> = s.data.points.row_iter().map(|r| r.norm()).collect();
        let n = radii.len() as f64;
        let mean = radii.iter().sum::<f64>() / n;
        let sd = (radii.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!((mean - 0.75).abs() < 3.0 * sd / n.sqrt(), "{mean}");
    }

    #[test]
    fn generation_is_deterministic() {
        let model = SyntheticModel::new(vec![2, 2], 6, 0.05);
        assert_eq!(gen_synthetic(&model, 9).unwrap().data, gen_synthetic(&model, 9).unwrap().data);
        assert_ne!(gen_synthetic(&model, 9).unwrap().data, gen_synthetic(&model, 10).unwrap().data);
    }

    #[test]
    fn invalid_models() {
        assert!(gen_synthetic(&SyntheticModel::new(vec![2], 6, 1.0), 0).is_err());
        assert!(gen_synthetic(&SyntheticModel::new(vec![6], 6, 0.0), 0).is_err());
        assert!(gen_synthetic(&SyntheticModel::new(vec![], 6, 0.0), 0).is_err());
    }

    #[test]
    fn csv_plain_rows() {
        let d = parse_csv("1,2\n3,4\n5,6").unwrap();
        assert_eq!(d.len(), 3);
        assert_eq!(d.dim(), 2);
        assert_eq!(d.points[(2, 1)], 6.0);
        assert!(d.labels.is_none());
    }

    #[test]
    fn csv_header_with_labels_and_crlf() {
        let d = parse_csv("a,b,label\r\n1.5,2,0\r\n3,4,-1\r\n").unwrap();
        assert_eq!(d.labels, Some(vec![0, -1]));
        assert_eq!(d.outliers(), vec![false, true]);
    }

    #[test]
    fn csv_errors() {
        assert!(matches!(parse_csv(""), Err(FlsError::Parse { .. })));
        assert!(matches!(parse_csv("1,2\n3"), Err(FlsError::RaggedRows { row: 2, expected: 2, got: 1 })));
        assert!(matches!(parse_csv("1,2\n3,x"), Err(FlsError::Parse { row: 2, col: 2, .. })));
        assert!(matches!(parse_csv("1,2\n3,inf"), Err(FlsError::Parse { row: 2, col: 2, .. })));
        assert!(matches!(parse_csv("x,label\n1,zero"), Err(FlsError::Parse { row: 2, col: 2, .. })));
    }

    #[test]
    fn csv_round_trip_synthetic() {
        let s = gen_synthetic(&SyntheticModel::new(vec![2, 3], 6, 0.1), 11).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        save_csv(&path, &s.data).unwrap();
        let back = load_csv(&path).unwrap();
        assert_eq!(back.labels, s.data.labels);
        assert!((back.points - &s.data.points).amax() <= 1e-12);
    }
}
