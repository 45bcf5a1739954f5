use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;

use super::Matrix;
use crate::error::{FlsError, Result};
use crate::rng::{derive_seed, rng_from_seed};

#[derive(Debug, Clone, Copy)]
pub struct KMeansOptions {
    pub max_iter: usize,
    /// Relative inertia change below which Lloyd iterations stop.
    pub tol: f64,
    /// Independent k-means++ restarts; the lowest inertia wins.
    pub restarts: usize,
}

impl Default for KMeansOptions {
    fn default() -> Self {
        Self {
            max_iter: 100,
            tol: 1e-6,
            restarts: 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct KMeansResult {
    pub labels: Vec<usize>,
    /// K x dim.
    pub centroids: Matrix,
    pub inertia: f64,
    pub iterations: usize,
}

fn sq_dist(points: &Matrix, i: usize, centroids: &Matrix, j: usize) -> f64 {
    let mut acc = 0.0;
    for c in 0..points.ncols() {
        let diff = points[(i, c)] - centroids[(j, c)];
        acc += diff * diff;
    }
    acc
}

/// Nearest centroid per point (lowest index on ties), squared distances.
fn assign(points: &Matrix, centroids: &Matrix) -> (Vec<usize>, Vec<f64>) {
    let m = points.nrows();
    let mut labels = vec![0; m];
    let mut dists = vec![0.0; m];
    for i in 0..m {
        let mut best = f64::INFINITY;
        for j in 0..centroids.nrows() {
            let d = sq_dist(points, i, centroids, j);
            if d < best {
                best = d;
                labels[i] = j;
            }
        }
        dists[i] = best;
    }
    (labels, dists)
}

/// Greedy k-means++: each new center is the best of `2 + ln k` candidates
/// drawn with probability proportional to squared distance.
fn plus_plus(points: &Matrix, k: usize, rng: &mut impl Rng) -> Matrix {
    let m = points.nrows();
    let trials = 2 + (k as f64).ln().floor() as usize;
    let mut centroids = Matrix::zeros(k, points.ncols());
    let first = rng.random_range(0..m);
    centroids.set_row(0, &points.row(first));
    let mut nearest: Vec<f64> = (0..m).map(|i| sq_dist(points, i, &centroids, 0)).collect();
    for j in 1..k {
        let total: f64 = nearest.iter().sum();
        let weights = WeightedIndex::new(&nearest).ok().filter(|_| total > 0.0 && total.is_finite());
        let mut best: Option<(f64, usize, Vec<f64>)> = None;
        for _ in 0..trials {
            // every point may already coincide with a centroid
            let pick = match &weights {
                Some(w) => w.sample(rng),
                None => rng.random_range(0..m),
            };
            let center = points.rows(pick, 1).into_owned();
            let cand: Vec<f64> = (0..m).map(|i| nearest[i].min(sq_dist(points, i, &center, 0))).collect();
            let cost: f64 = cand.iter().sum();
            if best.as_ref().is_none_or(|(c, _, _)| cost < *c) {
                best = Some((cost, pick, cand));
            }
        }
        let (_, pick, cand) = best.expect("at least one trial");
        centroids.set_row(j, &points.row(pick));
        nearest = cand;
    }
    centroids
}

fn update(points: &Matrix, labels: &[usize], dists: &[f64], k: usize) -> Matrix {
    let dim = points.ncols();
    let mut sums = Matrix::zeros(k, dim);
    let mut counts = vec![0usize; k];
    for (i, &l) in labels.iter().enumerate() {
        counts[l] += 1;
        for c in 0..dim {
            sums[(l, c)] += points[(i, c)];
        }
    }
    let mut taken = vec![false; points.nrows()];
    for j in 0..k {
        if counts[j] > 0 {
            let inv = 1.0 / counts[j] as f64;
            sums.row_mut(j).scale_mut(inv);
            continue;
        }
        // empty cluster: re-seed at the point farthest from its centroid
        let far = (0..points.nrows())
            .filter(|&i| !taken[i])
            .fold(None, |best: Option<usize>, i| match best {
                Some(b) if dists[b] >= dists[i] => Some(b),
                _ => Some(i),
            });
        if let Some(i) = far {
            taken[i] = true;
            sums.set_row(j, &points.row(i));
        }
    }
    sums
}

/// Lloyd iterations from the given initial centroids.
pub fn kmeans_from(points: &Matrix, init: Matrix, opts: KMeansOptions) -> KMeansResult {
    let k = init.nrows();
    let mut centroids = init;
    let (mut labels, mut dists) = assign(points, &centroids);
    let mut inertia: f64 = dists.iter().sum();
    let mut iterations = 0;
    while iterations < opts.max_iter {
        iterations += 1;
        let next = update(points, &labels, &dists, k);
        let (next_labels, next_dists) = assign(points, &next);
        let next_inertia: f64 = next_dists.iter().sum();
        let change = (inertia - next_inertia).abs();
        centroids = next;
        labels = next_labels;
        dists = next_dists;
        let done = change <= opts.tol * inertia || next_inertia == 0.0;
        inertia = next_inertia;
        if done {
            break;
        }
    }
    KMeansResult {
        labels,
        centroids,
        inertia,
        iterations,
    }
}

/// k-means with k-means++ seeding, deterministic per seed.
pub fn kmeans(points: &Matrix, k: usize, seed: u64, opts: KMeansOptions) -> Result<KMeansResult> {
    let m = points.nrows();
    if k == 0 || m < k {
        return Err(FlsError::DegenerateInput(format!(
            "k-means needs at least k={k} points, got {m}"
        )));
    }
    super::ensure_finite(points, "k-means input")?;
    let mut best: Option<KMeansResult> = None;
    for restart in 0..opts.restarts.max(1) {
        let mut rng = rng_from_seed(derive_seed(seed, restart as u64));
        let init = plus_plus(points, k, &mut rng);
        let run = kmeans_from(points, init, opts);
        if best.as_ref().is_none_or(|b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one restart"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use rand_distr::StandardNormal;

    #[test]
    fn duplicate_pairs() {
        let pts = Matrix::from_row_slice(4, 2, &[0.0, 0.0, 0.0, 0.0, 5.0, 5.0, 5.0, 5.0]);
        let r = kmeans(&pts, 2, 3, KMeansOptions::default()).unwrap();
        assert_eq!(r.labels[0], r.labels[1]);
        assert_eq!(r.labels[2], r.labels[3]);
        assert_ne!(r.labels[0], r.labels[2]);
        assert_eq!(r.inertia, 0.0);
    }

    #[test]
    fn each_point_own_cluster() {
        let pts = Matrix::from_row_slice(3, 2, &[0.0, 0.0, 1.0, 0.0, 0.0, 1.0]);
        for seed in 0..10 {
            let r = kmeans(&pts, 3, seed, KMeansOptions::default()).unwrap();
            let mut l = r.labels.clone();
            l.sort();
            l.dedup();
            assert_eq!(l.len(), 3);
            assert_eq!(r.inertia, 0.0);
        }
    }

    #[test]
    fn all_identical_points_do_not_panic() {
        let pts = Matrix::from_element(6, 2, 1.5);
        let r = kmeans(&pts, 3, 0, KMeansOptions::default()).unwrap();
        assert_eq!(r.inertia, 0.0);
        assert_eq!(r.labels.len(), 6);
    }

    #[test]
    fn too_few_points() {
        let pts = Matrix::zeros(2, 2);
        assert!(kmeans(&pts, 3, 0, KMeansOptions::default()).is_err());
    }

    fn blobs(seed: u64) -> Matrix {
        let mut rng = rng_from_seed(seed);
        Matrix::from_fn(30, 2, |i, _| {
            let g: f64 = StandardNormal.sample(&mut rng);
            (i % 3) as f64 * 5.0 + g
        })
    }

    #[test]
    fn near_multi_restart_oracle() {
        for seed in 0..20 {
            let pts = blobs(seed);
            let one = kmeans(&pts, 3, seed, KMeansOptions::default()).unwrap();
            // oracle: best of 200 independent seeded runs
            let oracle = (0..200)
                .map(|s| kmeans(&pts, 3, 10_000 + s, KMeansOptions::default()).unwrap().inertia)
                .fold(f64::INFINITY, f64::min);
            assert!(one.inertia <= 1.05 * oracle, "{} vs {}", one.inertia, oracle);
        }
    }

    #[test]
    fn assignments_match_returned_centroids() {
        let pts = blobs(9);
        let r = kmeans(&pts, 3, 1, KMeansOptions::default()).unwrap();
        let (labels, _) = assign(&pts, &r.centroids);
        assert_eq!(labels, r.labels);
    }

    #[test]
    fn continuing_never_increases_inertia() {
        for seed in 0..10 {
            let pts = blobs(100 + seed);
            let r = kmeans(&pts, 3, seed, KMeansOptions::default()).unwrap();
            let more = kmeans_from(
                &pts,
                r.centroids.clone(),
                KMeansOptions { max_iter: 10, tol: 0.0, restarts: 1 },
            );
            assert!(more.inertia <= r.inertia + 1e-12);
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let pts = blobs(4);
        let a = kmeans(&pts, 3, 42, KMeansOptions::default()).unwrap();
        let b = kmeans(&pts, 3, 42, KMeansOptions::default()).unwrap();
        assert_eq!(a.labels, b.labels);
        assert_eq!(a.inertia, b.inertia);
    }
}
