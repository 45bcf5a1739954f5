//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::time::Instant;

use fls_core::datagen::{gen_synthetic, SyntheticModel};
use fls_core::evaluation::{
    benchmark_suite, clustering_rate, median, standard_suite, verify_eigvec_convergence, verify_hoeffding,
    verify_kernel_convergence, verify_perturbation, verify_rotation_invariance, BenchConfig, KernelFamily,
};
use fls_core::kernels::embed;
use fls_core::landmarks::{build_subspace_spec, flat_pool, LandmarkConfig};
use fls_core::linalg::{Matrix, SvdMethod};
use fls_core::spectral::{cluster_embedding, dense_spectral_cluster, spectral_embed};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 42;
const D_REF: usize = 50_000;

struct Outcome {
    pass: bool,
    detail: String,
}

fn two_cluster(per_subspace: usize, seed: u64) -> Matrix {
    let mut model = SyntheticModel::new(vec![2, 2], 6, 0.0);
    model.pts_per_subspace = per_subspace;
    gen_synthetic(&model, seed).unwrap().data.points
}

fn subspace_family(points: &Matrix, sigma: f64) -> KernelFamily {
    let pool = flat_pool(points, &LandmarkConfig::new(1, 2)).unwrap();
    KernelFamily::Subspace { sigma, pool }
}

fn table(ratio: f64, paper: [f64; 4], slack: f64) -> Outcome {
    let rows = benchmark_suite(&standard_suite(ratio), &BenchConfig::default(), 10, SEED).unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for (row, target) in rows.iter().zip(paper) {
        let ok = row.mean_rate >= target - slack && row.mean_time < 60.0;
        pass &= ok;
        parts.push(format!("{} {:.3} (>= {:.2}, {:.2}s)", row.model, row.mean_rate, target - slack, row.mean_time));
    }
    Outcome { pass, detail: parts.join("; ") }
}

fn kernel_decay() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let points = Matrix::from_fn(100, 3, |_, _| 0.5 * rng.sample::<f64, _>(rand_distr::StandardNormal));
    let family = KernelFamily::GaussianRff { sigma: 1.0 };
    let rows = verify_kernel_convergence(&family, &points, &[250, 1000, 4000], 10, 0, SEED).unwrap();
    let e: Vec<f64> = rows.iter().map(|r| r.median_max_error).collect();
    let secs = start.elapsed().as_secs_f64();
    Outcome {
        pass: e[2] <= 0.75 * e[1] && e[1] <= 0.75 * e[0] && secs < 30.0,
        detail: format!("median max error {:.4} / {:.4} / {:.4} at D=250/1000/4000, {secs:.1}s", e[0], e[1], e[2]),
    }
}

fn hoeffding() -> Outcome {
    let family = KernelFamily::GaussianRff { sigma: 1.0 };
    let x = [0.0, 0.0, 0.0];
    let y = [1.0, 0.0, 0.0];
    let mut pass = true;
    let mut parts = Vec::new();
    for count in [50, 200] {
        for eps in [0.1, 0.2] {
            let r = verify_hoeffding(&family, &x, &y, count, eps, 200, 0, SEED + count as u64).unwrap();
            pass &= r.holds;
            parts.push(format!("D={count} eps={eps}: {:.3} <= {:.3}+3se", r.exceed_fraction, r.bound));
        }
    }
    Outcome { pass, detail: parts.join("; ") }
}

fn perturbation() -> Outcome {
    let mut pass = true;
    let mut worst_delta: f64 = 0.0;
    let mut worst_ratio: f64 = 0.0;
    for seed in 0..10 {
        let points = two_cluster(150, seed);
        let row = verify_perturbation(&subspace_family(&points, 1.0), &points, 400, D_REF, seed).unwrap();
        pass &= row.delta < 0.5 && row.bounds_hold();
        worst_delta = worst_delta.max(row.delta);
        for (h, b) in row.h_norms.iter().zip(&row.h_bounds) {
            worst_ratio = worst_ratio.max(h / b);
        }
    }
    Outcome {
        pass,
        detail: format!("n=300, D=400: max delta {worst_delta:.3}, max |H_i|/bound_i {worst_ratio:.3} over 10 seeds"),
    }
}

fn eigvec() -> Outcome {
    let points = two_cluster(150, 0);
    let rows = verify_eigvec_convergence(&subspace_family(&points, 1.0), &points, &[100, 400, 1600], 10, D_REF, SEED).unwrap();
    let e: Vec<f64> = rows.iter().map(|r| r.median_error).collect();
    let monotone = e[0] > e[1] && e[1] > e[2];
    let at_n = |per: usize| {
        let pts = two_cluster(per, 0);
        verify_eigvec_convergence(&subspace_family(&pts, 1.0), &pts, &[400], 10, D_REF, SEED).unwrap()[0].median_error
    };
    let (e200, e400) = (at_n(100), at_n(200));
    let change = (e400 - e200).abs() / e200;
    Outcome {
        pass: monotone && change < 0.5,
        detail: format!(
            "median error {:.4} / {:.4} / {:.4} at D=100/400/1600 (gap {:.3}); D=400: n=200 {e200:.4}, n=400 {e400:.4}, change {:.0}%",
            e[0], e[1], e[2], rows[0].eigengap, 100.0 * change
        ),
    }
}

fn rotation() -> Outcome {
    let r = verify_rotation_invariance(3, 1, 100, 100_000, 1.0, 1.0, SEED).unwrap();
    Outcome {
        pass: r.passed,
        detail: format!("{:.0}% of 100 pairs within 3 joint SE (d=3, l=1, D=1e5)", 100.0 * r.fraction_within),
    }
}

fn two_path() -> Outcome {
    let mut pass = true;
    let mut worst_agree: f64 = 1.0;
    let mut worst_sv: f64 = 0.0;
    for seed in 0..10 {
        let points = two_cluster(150, seed);
        let spec = build_subspace_spec(&points, &LandmarkConfig::new(60, 2), seed).unwrap();
        let psi = embed(&spec, &points).unwrap();
        let fast = cluster_embedding(&psi, 2, seed, false, SvdMethod::Gram).unwrap();
        let dense = dense_spectral_cluster(&psi.gram(), 2, seed, false).unwrap();
        let truth: Vec<i64> = dense.labels.iter().map(|&l| l as i64).collect();
        let agree = clustering_rate(&fast.labels, &truth, None).unwrap().rate;
        let sv = fast
            .singular_values
            .iter()
            .zip(&dense.singular_values)
            .map(|(s, l)| (s * s - l).abs())
            .fold(0.0, f64::max);
        pass &= agree >= 0.99 && sv <= 1e-6;
        worst_agree = worst_agree.min(agree);
        worst_sv = worst_sv.max(sv);
    }
    Outcome {
        pass,
        detail: format!("n=300: min label agreement {worst_agree:.3}, max |s^2 - lambda| {worst_sv:.1e} over 10 seeds"),
    }
}

fn scaling() -> Outcome {
    let mut model = SyntheticModel::new(vec![2, 2, 2, 2, 2], 10, 0.0);
    let mut time_at = |per: usize| {
        model.pts_per_subspace = per;
        let points = gen_synthetic(&model, SEED).unwrap().data.points;
        let spec = build_subspace_spec(&points, &LandmarkConfig::new(200, 2), SEED).unwrap();
        let runs: Vec<f64> = (0..5)
            .map(|_| {
                let start = Instant::now();
                let psi = embed(&spec, &points).unwrap();
                spectral_embed(&psi, 5, false, SvdMethod::Iterative).unwrap();
                start.elapsed().as_secs_f64()
            })
            .collect();
        median(&runs)
    };
    let t20 = time_at(4_000);
    let t40 = time_at(8_000);
    let ratio = t40 / t20;
    Outcome {
        pass: (1.5..=3.0).contains(&ratio),
        detail: format!("embed+svd median {t20:.3}s at n=20000, {t40:.3}s at n=40000, ratio {ratio:.2}"),
    }
}

fn main() {
    let criteria: Vec<(&str, fn() -> Outcome)> = vec![
        ("1 accuracy at 5% outliers", || table(0.05, [0.99, 0.98, 1.00, 1.00], 0.05)),
        ("2 accuracy at 30% outliers", || table(0.30, [0.99, 0.98, 1.00, 0.99], 0.06)),
        ("3 kernel error decay", kernel_decay),
        ("4 pointwise tail bound", hoeffding),
        ("5 normalized kernel perturbation bounds", perturbation),
        ("6 eigenvector convergence", eigvec),
        ("7 rotation invariance", rotation),
        ("8 two-path equivalence", two_path),
        ("9 linear scaling in n", scaling),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let start = Instant::now();
        let outcome = run();
        let tag = if outcome.pass { "PASS" } else { "FAIL" };
        println!("[{tag}] {name}: {} ({:.1}s)", outcome.detail, start.elapsed().as_secs_f64());
        failed += usize::from(!outcome.pass);
    }
    println!("acceptance: {} failed", failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
