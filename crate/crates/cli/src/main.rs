use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fls_core::datagen::{gen_synthetic, load_csv, save_csv, SyntheticModel};
use fls_core::evaluation::{
    bench_csv, benchmark_suite, clustering_rate, format_bench_table, perturbation_bounds, standard_suite,
    verify_eigvec_convergence, verify_hoeffding, verify_kernel_convergence, verify_perturbation,
    verify_rotation_invariance, BenchConfig, KernelFamily,
};
use fls_core::landmarks::{flat_pool, LandmarkConfig, LandmarkMethod, SigmaRule};
use fls_core::linalg::{Matrix, SvdMethod};
use fls_core::spectral::{fls_cluster, ClusterConfig};
use fls_core::FlsError;
use rand::{Rng, SeedableRng};
use serde::Deserialize;
use serde_json::{json, Value};

mod config;

#[derive(Parser)]
#[command(name = "fls", version, about = "Fast landmark subspace clustering and randomized kernel checks")]
pub struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true, env = "FLS_THREADS")]
    threads: Option<usize>,
    /// JSON object of flag values for the subcommand; explicit flags win.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a union-of-subspaces data set with outliers.
    Gen(GenArgs),
    /// Cluster the rows of a CSV file.
    Cluster(ClusterArgs),
    /// Run the synthetic benchmark tables.
    Bench(BenchArgs),
    /// Numerical checks of the kernel approximation theory.
    #[command(subcommand)]
    Verify(VerifyCommand),
}

#[derive(Args)]
#[command(args_override_self = true)]
struct GenArgs {
    /// Subspace dimensions, e.g. 2,2.
    #[arg(long, value_delimiter = ',', required = true)]
    dims: Vec<usize>,
    #[arg(long)]
    ambient: usize,
    /// Outliers as a fraction of the inlier count.
    #[arg(long, default_value_t = 0.0)]
    outliers: f64,
    /// Points per subspace.
    #[arg(long, default_value_t = 250)]
    pts: usize,
    #[arg(long, default_value_t = 0.05)]
    noise: f64,
    #[arg(long, env = "FLS_SEED", default_value_t = 0)]
    seed: u64,
    /// Output directory; receives points.csv.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug)]
enum Sigma {
    Auto,
    Fixed(f64),
}

fn parse_sigma(s: &str) -> Result<Sigma, String> {
    if s == "auto" {
        return Ok(Sigma::Auto);
    }
    let v: f64 = s.parse().map_err(|_| format!("expected `auto` or a number, got {s:?}"))?;
    if v > 0.0 && v.is_finite() {
        Ok(Sigma::Fixed(v))
    } else {
        Err(format!("invalid parameter: sigma must be positive, got {v}"))
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Svd {
    Gram,
    Iterative,
}

impl From<Svd> for SvdMethod {
    fn from(s: Svd) -> Self {
        match s {
            Svd::Gram => SvdMethod::Gram,
            Svd::Iterative => SvdMethod::Iterative,
        }
    }
}

#[derive(Args)]
#[command(args_override_self = true)]
struct ClusterArgs {
    /// Input CSV (optional header; a trailing `label` column is used for scoring).
    #[arg(long = "in", value_name = "FILE")]
    input: PathBuf,
    /// Number of clusters K.
    #[arg(long)]
    k: usize,
    /// Flat dimension l.
    #[arg(long)]
    d: usize,
    /// Landmark count D.
    #[arg(long, default_value_t = 60)]
    landmarks: usize,
    /// random | kmeans
    #[arg(long, default_value = "random", value_parser = |s: &str| s.parse::<LandmarkMethod>().map_err(|e| e.to_string()))]
    method: LandmarkMethod,
    /// `auto` or a positive bandwidth.
    #[arg(long, default_value = "auto", value_parser = parse_sigma)]
    sigma: Sigma,
    /// median | cover (used when sigma is auto)
    #[arg(long, default_value = "median", value_parser = |s: &str| s.parse::<SigmaRule>().map_err(|e| e.to_string()))]
    sigma_rule: SigmaRule,
    /// Multiplier on the automatic bandwidth.
    #[arg(long, default_value_t = 1.0)]
    sigma_scale: f64,
    /// Neighborhood scale count T (default from n).
    #[arg(long)]
    scales: Option<usize>,
    /// Smallest neighborhood size S (default 2(l+1)).
    #[arg(long)]
    start_size: Option<usize>,
    #[arg(long)]
    drop_first: bool,
    #[arg(long)]
    normalize_sphere: bool,
    #[arg(long, value_enum, default_value = "gram")]
    svd: Svd,
    #[arg(long, default_value_t = 1)]
    restarts: usize,
    #[arg(long, env = "FLS_SEED", default_value_t = 0)]
    seed: u64,
    /// Result JSON path (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the spectral embedding as CSV.
    #[arg(long, value_name = "FILE")]
    embedding: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Table,
    Json,
    Csv,
}

#[derive(Args)]
#[command(args_override_self = true)]
struct BenchArgs {
    /// synthetic5, synthetic30, or a suite JSON file.
    #[arg(long, default_value = "synthetic5")]
    suite: String,
    #[arg(long, default_value_t = 10)]
    trials: usize,
    #[arg(long, env = "FLS_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "table")]
    format: Format,
    /// Override the landmark count.
    #[arg(long)]
    landmarks: Option<usize>,
    /// Override the k-means restart count.
    #[arg(long)]
    restarts: Option<usize>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SuiteFile {
    models: Vec<SyntheticModel>,
    #[serde(default)]
    config: BenchConfig,
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    Rff,
    Landmark,
    Subspace,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportFormat {
    Table,
    Json,
}

#[derive(Subcommand)]
enum VerifyCommand {
    /// Max and mean kernel error over all point pairs as D grows.
    Kernel(KernelArgs),
    /// Tail probability of the pointwise error against 2 exp(-D eps^2 / 4).
    Hoeffding(HoeffdingArgs),
    /// Norm bounds on the three parts of L - L_hat.
    Perturbation(PerturbationArgs),
    /// Second-eigenvector error of L_hat as D grows.
    Eigvec(EigvecArgs),
    /// Uniform-Grassmannian kernel on rotated sphere pairs.
    Rotation(RotationArgs),
}

#[derive(Args)]
#[command(args_override_self = true)]
struct KernelArgs {
    #[arg(long, value_enum, default_value = "rff")]
    family: Family,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    /// Feature counts to sweep.
    #[arg(long = "D", value_delimiter = ',', default_value = "250,1000,4000")]
    counts: Vec<usize>,
    /// Independent specs per D.
    #[arg(long, default_value_t = 10)]
    reps: usize,
    /// Points (all n^2 pairs are compared).
    #[arg(long, default_value_t = 100)]
    n: usize,
    /// Ambient dimension for the Gaussian family.
    #[arg(long, default_value_t = 3)]
    dim: usize,
    /// Reference draw size for families without a closed form.
    #[arg(long, default_value_t = 50_000)]
    d_ref: usize,
    #[arg(long, env = "FLS_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "table")]
    format: ReportFormat,
}

#[derive(Args)]
#[command(args_override_self = true)]
struct HoeffdingArgs {
    #[arg(long = "D", value_delimiter = ',', default_value = "50,200")]
    counts: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.2")]
    eps: Vec<f64>,
    #[arg(long, default_value_t = 200)]
    draws: usize,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    /// Distance between the two points.
    #[arg(long, default_value_t = 1.0)]
    distance: f64,
    #[arg(long, default_value_t = 3)]
    dim: usize,
    #[arg(long, env = "FLS_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "table")]
    format: ReportFormat,
}

#[derive(Args)]
#[command(args_override_self = true)]
struct PerturbationArgs {
    /// Points in the two-subspace data set.
    #[arg(long, default_value_t = 300)]
    n: usize,
    #[arg(long = "D", default_value_t = 400)]
    count: usize,
    #[arg(long, default_value_t = 50_000)]
    d_ref: usize,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    /// Number of consecutive seeds to run.
    #[arg(long, default_value_t = 1)]
    seeds: u64,
    /// Compare the reference kernel with itself (delta = 0).
    #[arg(long = "self")]
    against_self: bool,
    #[arg(long, env = "FLS_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "table")]
    format: ReportFormat,
}

#[derive(Args)]
#[command(args_override_self = true)]
struct EigvecArgs {
    #[arg(long, default_value_t = 300)]
    n: usize,
    #[arg(long = "D", value_delimiter = ',', default_value = "100,400,1600")]
    counts: Vec<usize>,
    #[arg(long, default_value_t = 10)]
    reps: usize,
    #[arg(long, default_value_t = 50_000)]
    d_ref: usize,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long, env = "FLS_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "table")]
    format: ReportFormat,
}

#[derive(Args)]
#[command(args_override_self = true)]
struct RotationArgs {
    #[arg(long, default_value_t = 3)]
    d: usize,
    #[arg(long, default_value_t = 1)]
    l: usize,
    #[arg(long, default_value_t = 100)]
    pairs: usize,
    #[arg(long = "D", default_value_t = 100_000)]
    count: usize,
    #[arg(long, default_value_t = 1.0)]
    distance: f64,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long, env = "FLS_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "table")]
    format: ReportFormat,
}

/// Exit status 2: bad flags or configuration. 3: the run itself failed.
enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<FlsError> for Failure {
    fn from(e: FlsError) -> Self {
        match e.root() {
            FlsError::InvalidParam(_) => Failure::Usage(e.to_string()),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

type CliResult<T> = Result<T, Failure>;

fn write_file(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| Failure::Runtime(format!("i/o error on {}: {e}", path.display())))
}

fn emit(out: Option<&Path>, text: &str) -> CliResult<()> {
    match out {
        Some(p) => write_file(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn pretty(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("json value serializes") + "\n"
}

fn cmd_gen(a: GenArgs) -> CliResult<()> {
    let model = SyntheticModel {
        dims: a.dims,
        ambient: a.ambient,
        pts_per_subspace: a.pts,
        noise_sigma: a.noise,
        outlier_ratio: a.outliers,
    };
    model.validate()?;
    let synth = gen_synthetic(&model, a.seed)?;
    fs::create_dir_all(&a.out).map_err(|e| Failure::Runtime(format!("i/o error on {}: {e}", a.out.display())))?;
    let path = a.out.join("points.csv");
    save_csv(&path, &synth.data)?;
    println!(
        "{}: n={} inliers={} outliers={} dim={} -> {}",
        model.name(),
        synth.data.len(),
        model.n_inliers(),
        model.n_outliers(),
        model.ambient,
        path.display()
    );
    Ok(())
}

fn cmd_cluster(a: ClusterArgs) -> CliResult<()> {
    let data = load_csv(&a.input).map_err(|e| Failure::Runtime(e.to_string()))?;
    let landmarks = LandmarkConfig {
        count: a.landmarks,
        method: a.method,
        flat_dim: a.d,
        scales: a.scales,
        start_size: a.start_size,
        sigma: match a.sigma {
            Sigma::Auto => None,
            Sigma::Fixed(v) => Some(v),
        },
        sigma_scale: a.sigma_scale,
        sigma_rule: a.sigma_rule,
        linear_flats: false,
    };
    let cfg = ClusterConfig {
        landmarks,
        clusters: a.k,
        seed: a.seed,
        drop_first: a.drop_first,
        normalize_sphere: a.normalize_sphere,
        svd: a.svd.into(),
        kmeans_restarts: a.restarts,
    };
    let result = fls_cluster(&data.points, &cfg)?;
    let mut doc: Value = serde_json::from_str(&result.to_json()).expect("result json parses");
    if let Some(truth) = &data.labels {
        if truth.iter().any(|&t| t >= 0) {
            let report = clustering_rate(&result.labels, truth, data.outlier_mask.as_deref())?;
            doc["rate"] = json!(report.rate);
        }
    }
    if let Some(p) = &a.embedding {
        write_file(p, &result.embedding_csv())?;
    }
    emit(a.out.as_deref(), &pretty(&doc))
}

fn cmd_bench(a: BenchArgs) -> CliResult<()> {
    let (models, mut config) = match a.suite.as_str() {
        "synthetic5" => (standard_suite(0.05), BenchConfig::default()),
        "synthetic30" => (standard_suite(0.30), BenchConfig::default()),
        path => {
            let text = fs::read_to_string(path).map_err(|e| Failure::Usage(format!("i/o error on {path}: {e}")))?;
            let suite: SuiteFile =
                serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("suite file {path}: {e}")))?;
            (suite.models, suite.config)
        }
    };
    for m in &models {
        m.validate()?;
    }
    if let Some(d) = a.landmarks {
        config.landmarks = d;
    }
    if let Some(r) = a.restarts {
        config.kmeans_restarts = r;
    }
    let rows = benchmark_suite(&models, &config, a.trials, a.seed).map_err(|e| Failure::Runtime(e.to_string()))?;
    let text = match a.format {
        Format::Table => format_bench_table(&rows),
        Format::Csv => bench_csv(&rows),
        Format::Json => pretty(&json!({ "config": config, "rows": rows })),
    };
    print!("{text}");
    Ok(())
}

fn two_subspace_points(n: usize, seed: u64) -> CliResult<Matrix> {
    let mut model = SyntheticModel::new(vec![2, 2], 6, 0.0);
    model.pts_per_subspace = (n / 2).max(1);
    Ok(gen_synthetic(&model, seed)?.data.points)
}

fn subspace_family(points: &Matrix, sigma: f64) -> CliResult<KernelFamily> {
    let pool = flat_pool(points, &LandmarkConfig::new(1, 2))?;
    Ok(KernelFamily::Subspace { sigma, pool })
}

fn check_sigma(sigma: f64) -> CliResult<()> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(Failure::Usage(format!("invalid parameter: sigma must be positive, got {sigma}")))
    }
}

fn report(format: ReportFormat, header: &str, lines: Vec<String>, doc: Value) {
    match format {
        ReportFormat::Json => print!("{}", pretty(&doc)),
        ReportFormat::Table => {
            println!("{header}");
            for l in lines {
                println!("{l}");
            }
        }
    }
}

fn verify_kernel(a: KernelArgs) -> CliResult<()> {
    check_sigma(a.sigma)?;
    let (family, points) = match a.family {
        Family::Rff => {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(a.seed);
            let pts = Matrix::from_fn(a.n, a.dim, |_, _| 0.5 * rng.sample::<f64, _>(rand_distr::StandardNormal));
            (KernelFamily::GaussianRff { sigma: a.sigma }, pts)
        }
        Family::Landmark => {
            let pts = two_subspace_points(a.n, a.seed)?;
            (KernelFamily::LandmarkGaussian { sigma: a.sigma, pool: pts.clone() }, pts)
        }
        Family::Subspace => {
            let pts = two_subspace_points(a.n, a.seed)?;
            (subspace_family(&pts, a.sigma)?, pts)
        }
    };
    let rows = verify_kernel_convergence(&family, &points, &a.counts, a.reps, a.d_ref, a.seed)?;
    let lines = rows
        .iter()
        .map(|r| format!("{:>8}  {:>12.6}  {:>12.6}  {:>10.2e}", r.count, r.median_max_error, r.median_mean_error, r.reference_error))
        .collect();
    report(
        a.format,
        &format!("{:>8}  {:>12}  {:>12}  {:>10}", "D", "max_error", "mean_error", "ref_error"),
        lines,
        json!({ "family": family.name(), "rows": rows }),
    );
    Ok(())
}

fn verify_hoeffding_cmd(a: HoeffdingArgs) -> CliResult<()> {
    check_sigma(a.sigma)?;
    if a.dim == 0 {
        return Err(Failure::Usage("invalid parameter: dim must be at least 1".into()));
    }
    let family = KernelFamily::GaussianRff { sigma: a.sigma };
    let x = vec![0.0; a.dim];
    let mut y = vec![0.0; a.dim];
    y[0] = a.distance;
    let mut rows = Vec::new();
    for (i, &count) in a.counts.iter().enumerate() {
        for (j, &eps) in a.eps.iter().enumerate() {
            let seed = a.seed.wrapping_add((i * a.eps.len() + j) as u64 * 1_000_003);
            rows.push(verify_hoeffding(&family, &x, &y, count, eps, a.draws, 0, seed)?);
        }
    }
    let lines = rows
        .iter()
        .map(|r| {
            format!(
                "{:>6}  {:>6}  {:>9.4}  {:>9.4}  {:>8.4}  {}",
                r.count, r.epsilon, r.exceed_fraction, r.bound, r.standard_error, if r.holds { "ok" } else { "VIOLATED" }
            )
        })
        .collect();
    report(
        a.format,
        &format!("{:>6}  {:>6}  {:>9}  {:>9}  {:>8}  {}", "D", "eps", "observed", "bound", "se", "status"),
        lines,
        json!({ "rows": rows }),
    );
    Ok(())
}

fn verify_perturbation_cmd(a: PerturbationArgs) -> CliResult<()> {
    check_sigma(a.sigma)?;
    let mut rows = Vec::new();
    for s in a.seed..a.seed + a.seeds.max(1) {
        let points = two_subspace_points(a.n, s)?;
        let family = subspace_family(&points, a.sigma)?;
        let row = if a.against_self {
            let w = family.reference(&points, a.d_ref, s)?.w;
            perturbation_bounds(&w, &w)?
        } else {
            verify_perturbation(&family, &points, a.count, a.d_ref, s)?
        };
        rows.push((s, row));
    }
    let lines = rows
        .iter()
        .map(|(s, r)| {
            let h: Vec<String> = r.h_norms.iter().zip(&r.h_bounds).map(|(h, b)| format!("{h:.2e}<={b:.2e}")).collect();
            format!("{s:>6}  {:>7.4}  {:>9.3e}  {:>7.4}  {}  {}", r.delta, r.lower, r.upper, h.join("  "), if r.bounds_hold() { "ok" } else { "VIOLATED" })
        })
        .collect();
    let doc: Vec<Value> = rows.iter().map(|(s, r)| json!({ "seed": s, "bounds_hold": r.bounds_hold(), "row": r })).collect();
    report(
        a.format,
        &format!("{:>6}  {:>7}  {:>9}  {:>7}  {}", "seed", "delta", "min_W", "max_W", "|H1|, |H2|, |H3| vs bounds"),
        lines,
        json!({ "rows": doc }),
    );
    Ok(())
}

fn verify_eigvec_cmd(a: EigvecArgs) -> CliResult<()> {
    check_sigma(a.sigma)?;
    let points = two_subspace_points(a.n, a.seed)?;
    let family = subspace_family(&points, a.sigma)?;
    let rows = verify_eigvec_convergence(&family, &points, &a.counts, a.reps, a.d_ref, a.seed)?;
    let lines = rows
        .iter()
        .map(|r| format!("{:>8}  {:>6}  {:>12.6}  {:>9.4}", r.count, r.n, r.median_error, r.eigengap))
        .collect();
    report(
        a.format,
        &format!("{:>8}  {:>6}  {:>12}  {:>9}", "D", "n", "median_err", "eigengap"),
        lines,
        json!({ "rows": rows }),
    );
    Ok(())
}

fn verify_rotation_cmd(a: RotationArgs) -> CliResult<()> {
    check_sigma(a.sigma)?;
    let r = verify_rotation_invariance(a.d, a.l, a.pairs, a.count, a.distance, a.sigma, a.seed)?;
    let within = r.pairs.iter().filter(|p| p.within).count();
    let lines = vec![format!(
        "{}/{} pairs within 3 joint SE ({:.1}%): {}",
        within,
        r.pairs.len(),
        100.0 * r.fraction_within,
        if r.passed { "pass" } else { "fail" }
    )];
    report(
        a.format,
        &format!("d={} l={} D={} distance={}", r.d, r.l, r.count, r.distance),
        lines,
        json!(r),
    );
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Failure::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Runtime(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Cluster(a) => cmd_cluster(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Verify(v) => match v {
            VerifyCommand::Kernel(a) => verify_kernel(a),
            VerifyCommand::Hoeffding(a) => verify_hoeffding_cmd(a),
            VerifyCommand::Perturbation(a) => verify_perturbation_cmd(a),
            VerifyCommand::Eigvec(a) => verify_eigvec_cmd(a),
            VerifyCommand::Rotation(a) => verify_rotation_cmd(a),
        },
    }
}

fn main() -> ExitCode {
    let mut args: Vec<String> = std::env::args().collect();
    if let Some(path) = config::find_config_path(&args) {
        let spliced = fs::read_to_string(&path)
            .map_err(|e| format!("cannot read config {path}: {e}"))
            .and_then(|text| config::splice_config(args, &text));
        match spliced {
            Ok(a) => args = a,
            Err(msg) => {
                eprintln!("error: {msg}");
                return ExitCode::from(2);
            }
        }
    }
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}
