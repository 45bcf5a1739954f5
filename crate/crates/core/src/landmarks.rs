//! Landmark selection and local best-fit flats.
//!
//! Each landmark gets an l-flat fitted by PCA to one of several nearest
//! neighbor sets around it. Candidate sets grow geometrically (sizes S, 2S,
//! 4S, ... capped at n) and the one whose fit leaves the smallest fraction
//! of scatter outside the flat wins. The flats, with a bandwidth, form a
//! [`FeatureSpec::Subspace`].

use nalgebra::DVector;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{FlsError, Result};
use crate::kernels::{AffineFlat, FeatureSpec};
use crate::linalg::{kmeans, pca_fit, KMeansOptions, Matrix};
use crate::rng::{derive_seed, rng_from_seed};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LandmarkMethod {
    #[default]
    Random,
    Kmeans,
}

impl std::str::FromStr for LandmarkMethod {
    type Err = FlsError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(Self::Random),
            "kmeans" => Ok(Self::Kmeans),
            other => Err(FlsError::InvalidParam(format!("unknown landmark method {other:?}"))),
        }
    }
}

/// How the bandwidth is chosen when no fixed value is given.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SigmaRule {
    /// `sigma_scale` times the median point-to-flat distance.
    #[default]
    Median,
    /// The median rule, raised if needed so every point's nearest flat is
    /// within 5 sigma (see [`cover_sigma`]).
    Cover,
}

impl std::str::FromStr for SigmaRule {
    type Err = FlsError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "median" => Ok(Self::Median),
            "cover" => Ok(Self::Cover),
            other => Err(FlsError::InvalidParam(format!("unknown sigma rule {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LandmarkConfig {
    /// Landmark count D.
    pub count: usize,
    #[serde(default)]
    pub method: LandmarkMethod,
    /// Flat dimension l.
    pub flat_dim: usize,
    /// Number of neighborhood scales T; derived from n when absent.
    #[serde(default)]
    pub scales: Option<usize>,
    /// Smallest neighborhood size S; 2(l + 1) when absent.
    #[serde(default)]
    pub start_size: Option<usize>,
    /// Kernel bandwidth; the median point-to-flat distance when absent.
    #[serde(default)]
    pub sigma: Option<f64>,
    /// Multiplier applied to the automatic bandwidth (ignored when `sigma` is set).
    #[serde(default = "unit_scale")]
    pub sigma_scale: f64,
    #[serde(default)]
    pub sigma_rule: SigmaRule,
    /// Force flats through the origin.
    #[serde(default)]
    pub linear_flats: bool,
}

fn unit_scale() -> f64 {
    1.0
}

impl LandmarkConfig {
    pub fn new(count: usize, flat_dim: usize) -> Self {
        Self {
            count,
            method: LandmarkMethod::Random,
            flat_dim,
            scales: None,
            start_size: None,
            sigma: None,
            sigma_scale: 1.0,
            sigma_rule: SigmaRule::Median,
            linear_flats: false,
        }
    }

    pub fn start_size(&self) -> usize {
        self.start_size.unwrap_or(2 * (self.flat_dim + 1))
    }

    /// T for a data set of `n` points.
    pub fn scales_for(&self, n: usize) -> usize {
        self.scales.unwrap_or_else(|| {
            let ratio = n as f64 / self.start_size() as f64;
            let steps = if ratio > 1.0 { ratio.log2().ceil() as usize } else { 0 };
            (steps + 1).min(8)
        })
    }

    /// The fixed bandwidth, or the one given by `sigma_rule`.
    pub fn resolve_sigma(&self, points: &Matrix, flats: &[AffineFlat], seed: u64) -> Result<f64> {
        if let Some(s) = self.sigma {
            return Ok(s);
        }
        let median = self.sigma_scale * default_sigma(points, flats, seed)?;
        Ok(match self.sigma_rule {
            SigmaRule::Median => median,
            SigmaRule::Cover => median.max(cover_sigma(points, flats)?),
        })
    }

    pub fn validate(&self, n: usize, d: usize) -> Result<()> {
        if self.count == 0 {
            return Err(FlsError::InvalidParam("landmark count D must be at least 1".into()));
        }
        if self.flat_dim == 0 || self.flat_dim > d {
            return Err(FlsError::InvalidParam(format!(
                "flat dimension {} not in 1..={d}",
                self.flat_dim
            )));
        }
        if self.start_size() < self.flat_dim + 1 {
            return Err(FlsError::InvalidParam(format!(
                "neighborhood size S={} must be at least l+1={}",
                self.start_size(),
                self.flat_dim + 1
            )));
        }
        if self.scales == Some(0) {
            return Err(FlsError::InvalidParam("scale count T must be at least 1".into()));
        }
        if let Some(s) = self.sigma {
            if !(s > 0.0 && s.is_finite()) {
                return Err(FlsError::InvalidParam(format!("sigma must be positive, got {s}")));
            }
        }
        if !(self.sigma_scale > 0.0 && self.sigma_scale.is_finite()) {
            return Err(FlsError::InvalidParam(format!("sigma scale must be positive, got {}", self.sigma_scale)));
        }
        if self.count > n {
            return Err(FlsError::InvalidParam(format!("{} landmarks requested from {n} points", self.count)));
        }
        if self.start_size() > n {
            return Err(FlsError::DegenerateInput(format!(
                "neighborhood size S={} exceeds the {n} available points",
                self.start_size()
            )));
        }
        Ok(())
    }
}

/// `count` landmark points (rows of the result).
pub fn select_landmarks(points: &Matrix, count: usize, method: LandmarkMethod, seed: u64) -> Result<Matrix> {
    let n = points.nrows();
    if count == 0 || count > n {
        return Err(FlsError::InvalidParam(format!("{count} landmarks requested from {n} points")));
    }
    match method {
        LandmarkMethod::Random => {
            let idx = select_landmark_indices(n, count, seed);
            Ok(Matrix::from_fn(count, points.ncols(), |i, j| points[(idx[i], j)]))
        }
        LandmarkMethod::Kmeans => Ok(kmeans(points, count, seed, KMeansOptions::default())?.centroids),
    }
}

/// `count` distinct indices drawn uniformly without replacement from `0..n`.
pub fn select_landmark_indices(n: usize, count: usize, seed: u64) -> Vec<usize> {
    let mut rng = rng_from_seed(seed);
    rand::seq::index::sample(&mut rng, n, count).into_vec()
}

#[derive(Debug, Clone)]
pub struct BestFit {
    pub flat: AffineFlat,
    /// Trailing over total scatter of the chosen neighborhood.
    pub score: f64,
    /// Size of the chosen neighborhood.
    pub size: usize,
    /// (size, score) of every candidate evaluated.
    pub candidates: Vec<(usize, f64)>,
    /// The chosen neighborhood had no spread at all.
    pub degenerate: bool,
}

/// Candidate neighborhood sizes `min(round(S 2^j), n)` for `j < T`, deduplicated.
pub fn neighborhood_sizes(n: usize, start: usize, scales: usize) -> Vec<usize> {
    let mut sizes: Vec<usize> = (0..scales)
        .map(|j| ((start as f64 * 2f64.powi(j as i32)).round() as usize).min(n))
        .collect();
    sizes.dedup();
    sizes
}

/// Scores closer than this count as tied (the smaller neighborhood wins).
pub const SCORE_TIE_TOL: f64 = 1e-12;

/// Local best-fit l-flat around `center`.
pub fn best_fit_flat(points: &Matrix, center: &[f64], l: usize, scales: usize, start: usize) -> Result<BestFit> {
    let (n, d) = points.shape();
    if center.len() != d {
        return Err(FlsError::DimensionMismatch { expected: d, got: center.len() });
    }
    if start < l + 1 || scales == 0 {
        return Err(FlsError::InvalidParam(format!("need S >= l+1 and T >= 1 (S={start}, l={l}, T={scales})")));
    }
    if n < start {
        return Err(FlsError::DegenerateInput(format!("{n} points, neighborhood size {start}")));
    }
    let mut by_dist: Vec<(f64, usize)> = (0..n)
        .map(|i| {
            let sq: f64 = points.row(i).iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum();
            (sq, i)
        })
        .collect();
    by_dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let mut best: Option<(f64, usize, crate::linalg::PcaFit)> = None;
    let mut candidates = Vec::new();
    for size in neighborhood_sizes(n, start, scales) {
        let hood = Matrix::from_fn(size, d, |i, j| points[(by_dist[i].1, j)]);
        let fit = pca_fit(&hood, l)?;
        let total = fit.total_mass();
        let score = if total > 0.0 { fit.trailing_mass() / total } else { 0.0 };
        candidates.push((size, score));
        if best.as_ref().is_none_or(|(s, _, _)| score < *s - SCORE_TIE_TOL) {
            best = Some((score, size, fit));
        }
    }
    let (score, size, fit) = best.expect("at least one scale");
    if fit.total_mass() <= 0.0 {
        let basis = Matrix::identity(d, l);
        return Ok(BestFit {
            flat: AffineFlat::new_unchecked(DVector::from_column_slice(center), basis),
            score,
            size,
            candidates,
            degenerate: true,
        });
    }
    Ok(BestFit {
        flat: fit.flat,
        score,
        size,
        candidates,
        degenerate: false,
    })
}

/// Best-fit flats for every row of `centers`, computed in parallel.
pub fn fit_flats(points: &Matrix, centers: &Matrix, config: &LandmarkConfig) -> Result<Vec<BestFit>> {
    let scales = config.scales_for(points.nrows());
    let start = config.start_size();
    let centers: Vec<Vec<f64>> = centers.row_iter().map(|r| r.iter().copied().collect()).collect();
    centers
        .par_iter()
        .map(|c| {
            best_fit_flat(points, c, config.flat_dim, scales, start).map(|mut fit| {
                if config.linear_flats {
                    fit.flat = fit.flat.to_linear();
                }
                fit
            })
        })
        .collect()
}

const SIGMA_SAMPLES: usize = 10_000;
const SIGMA_FLOOR: f64 = 1e-6;

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let m = values.len();
    if m % 2 == 1 {
        values[m / 2]
    } else {
        0.5 * (values[m / 2 - 1] + values[m / 2])
    }
}

/// Median point-to-flat distance, floored at 1e-6.
///
/// Uses every (point, flat) pair when there are at most 10^4 of them and a
/// uniform sample of 10^4 pairs otherwise.
pub fn default_sigma(points: &Matrix, flats: &[AffineFlat], seed: u64) -> Result<f64> {
    if flats.is_empty() {
        return Err(FlsError::InvalidParam("default sigma needs at least one flat".into()));
    }
    let n = points.nrows();
    if n == 0 {
        return Err(FlsError::InvalidParam("default sigma needs at least one point".into()));
    }
    let dist = |i: usize, k: usize| {
        let x: Vec<f64> = points.row(i).iter().copied().collect();
        flats[k].sq_distance(&x).sqrt()
    };
    let mut values: Vec<f64> = if n * flats.len() <= SIGMA_SAMPLES {
        (0..n).flat_map(|i| (0..flats.len()).map(move |k| (i, k))).map(|(i, k)| dist(i, k)).collect()
    } else {
        let mut rng = rng_from_seed(seed);
        (0..SIGMA_SAMPLES)
            .map(|_| {
                let i = rng.random_range(0..n);
                let k = rng.random_range(0..flats.len());
                dist(i, k)
            })
            .collect()
    };
    Ok(median(&mut values).max(SIGMA_FLOOR))
}

/// Distances to the nearest flat are capped at this many bandwidths by the cover rule.
pub const COVER_RATIO: f64 = 5.0;

/// Smallest bandwidth at which every point lies within `COVER_RATIO`
/// bandwidths of its nearest flat, so its kernel value there is at least
/// `exp(-COVER_RATIO^2)`. Far outliers otherwise get numerically zero degree.
pub fn cover_sigma(points: &Matrix, flats: &[AffineFlat]) -> Result<f64> {
    if flats.is_empty() {
        return Err(FlsError::InvalidParam("cover sigma needs at least one flat".into()));
    }
    let farthest = (0..points.nrows())
        .into_par_iter()
        .map(|i| {
            let x: Vec<f64> = points.row(i).iter().copied().collect();
            flats.iter().map(|f| f.sq_distance(&x)).fold(f64::INFINITY, f64::min)
        })
        .reduce(|| 0.0, f64::max);
    Ok((farthest.sqrt() / COVER_RATIO).max(SIGMA_FLOOR))
}

/// Landmarks, their flats and the resolved bandwidth.
#[derive(Debug, Clone)]
pub struct LandmarkSubspaces {
    pub landmarks: Matrix,
    pub fits: Vec<BestFit>,
    pub spec: FeatureSpec,
}

/// Landmark selection, flat fitting and bandwidth selection in one call.
pub fn build_subspace_spec(points: &Matrix, config: &LandmarkConfig, seed: u64) -> Result<FeatureSpec> {
    Ok(build_landmark_subspaces(points, config, seed)?.spec)
}

pub fn build_landmark_subspaces(points: &Matrix, config: &LandmarkConfig, seed: u64) -> Result<LandmarkSubspaces> {
    config.validate(points.nrows(), points.ncols())?;
    let landmarks = select_landmarks(points, config.count, config.method, derive_seed(seed, 1))?;
    let fits = fit_flats(points, &landmarks, config)?;
    let flats: Vec<AffineFlat> = fits.iter().map(|f| f.flat.clone()).collect();
    let sigma = config.resolve_sigma(points, &flats, derive_seed(seed, 2))?;
    Ok(LandmarkSubspaces {
        landmarks,
        fits,
        spec: FeatureSpec::Subspace { sigma, flats },
    })
}

/// The best-fit flat at every data point: the support of the empirical
/// landmark-subspace measure.
pub fn flat_pool(points: &Matrix, config: &LandmarkConfig) -> Result<Vec<AffineFlat>> {
    config.validate(points.nrows(), points.ncols())?;
    Ok(fit_flats(points, points, config)?.into_iter().map(|f| f.flat).collect())
}

/// `count` flats drawn i.i.d. (with replacement) from `pool`.
pub fn sample_pool(pool: &[AffineFlat], count: usize, sigma: f64, seed: u64) -> Result<FeatureSpec> {
    if pool.is_empty() || count == 0 {
        return Err(FlsError::InvalidParam("need a nonempty pool and D >= 1".into()));
    }
    let mut rng = rng_from_seed(seed);
    let flats = (0..count).map(|_| pool[rng.random_range(0..pool.len())].clone()).collect();
    let spec = FeatureSpec::Subspace { sigma, flats };
    spec.validate()?;
    Ok(spec)
}
