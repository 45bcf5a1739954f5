use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn fls(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fls"))
        .args(args)
        .env_remove("FLS_SEED")
        .env_remove("FLS_THREADS")
        .output()
        .expect("binary runs")
}

fn gen(dir: &Path, seed: &str) -> String {
    let out = fls(&[
        "gen", "--dims", "2,2", "--ambient", "3", "--outliers", "0.05", "--seed", seed, "--out",
        dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    fs::read_to_string(dir.join("points.csv")).unwrap()
}

#[test]
fn gen_writes_expected_rows_and_is_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let c = tempfile::tempdir().unwrap();
    let first = gen(a.path(), "7");
    assert_eq!(first.lines().count(), 526);
    assert_eq!(first, gen(b.path(), "7"));
    assert_ne!(first, gen(c.path(), "8"));
}

#[test]
fn gen_without_dims_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = fls(&["gen", "--ambient", "3", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn cluster_reports_labels_timings_and_rate() {
    let dir = tempfile::tempdir().unwrap();
    gen(dir.path(), "1");
    let csv = dir.path().join("points.csv");
    let res = dir.path().join("result.json");
    let emb = dir.path().join("embedding.csv");
    let out = fls(&[
        "cluster", "--in", csv.to_str().unwrap(), "--k", "2", "--d", "2", "--out", res.to_str().unwrap(),
        "--embedding", emb.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(&res).unwrap()).unwrap();
    assert_eq!(doc["labels"].as_array().unwrap().len(), 525);
    assert_eq!(doc["timings"].as_object().unwrap().len(), 5);
    let rate = doc["rate"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&rate));
    assert!(fs::read_to_string(&emb).unwrap().lines().filter(|l| !l.is_empty()).count() >= 525);
}

#[test]
fn cluster_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    gen(dir.path(), "2");
    let csv = dir.path().join("points.csv");
    let csv = csv.to_str().unwrap();
    let too_many = fls(&["cluster", "--in", csv, "--k", "600", "--d", "2"]);
    assert_eq!(too_many.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&too_many.stderr).contains("degenerate"));
    let zero_sigma = fls(&["cluster", "--in", csv, "--k", "2", "--d", "2", "--sigma", "0"]);
    assert_eq!(zero_sigma.status.code(), Some(2));
    let missing = fls(&["cluster", "--in", "/nonexistent/points.csv", "--k", "2", "--d", "2"]);
    assert_eq!(missing.status.code(), Some(3));
    let bad_dim = fls(&["cluster", "--in", csv, "--k", "2", "--d", "0"]);
    assert_eq!(bad_dim.status.code(), Some(2));
}

#[test]
fn bench_custom_suite() {
    let dir = tempfile::tempdir().unwrap();
    let suite = dir.path().join("suite.json");
    fs::write(
        &suite,
        r#"{"models":[{"dims":[1,1],"ambient":3,"pts_per_subspace":60,"noise_sigma":0.01,"outlier_ratio":0.0}],
            "config":{"landmarks":30,"kmeans_restarts":1}}"#,
    )
    .unwrap();
    let out = fls(&["bench", "--suite", suite.to_str().unwrap(), "--trials", "1", "--format", "csv"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 2, "{text}");

    fs::write(&suite, r#"{"models":[],"bogus":1}"#).unwrap();
    let out = fls(&["bench", "--suite", suite.to_str().unwrap(), "--trials", "1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn verify_commands_run() {
    let cases: [&[&str]; 5] = [
        &["verify", "kernel", "--D", "50,200", "--reps", "2", "--n", "20"],
        &["verify", "hoeffding", "--D", "50", "--eps", "0.2", "--draws", "50"],
        &["verify", "perturbation", "--self", "--n", "40", "--d-ref", "2000"],
        &["verify", "eigvec", "--n", "40", "--D", "100,400", "--reps", "2", "--d-ref", "5000"],
        &["verify", "rotation", "--pairs", "5", "--D", "5000"],
    ];
    for args in cases {
        let mut full = args.to_vec();
        full.extend(["--format", "json"]);
        let out = fls(&full);
        assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        let _: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    }
}

#[test]
fn perturbation_self_has_zero_delta() {
    let out = fls(&["verify", "perturbation", "--self", "--n", "40", "--d-ref", "2000", "--format", "json"]);
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let row = &doc["rows"][0];
    assert_eq!(row["row"]["delta"].as_f64(), Some(0.0));
    assert_eq!(row["bounds_hold"].as_bool(), Some(true));
}

#[test]
fn config_overlay_and_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("gen.json");
    fs::write(&cfg, r#"{"dims":[1,1],"ambient":2,"pts":10,"seed":3}"#).unwrap();
    let out_dir = dir.path().join("data");
    let out = fls(&["--config", cfg.to_str().unwrap(), "gen", "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(fs::read_to_string(out_dir.join("points.csv")).unwrap().lines().count(), 21);

    // an explicit flag wins over the file
    let out = fls(&["--config", cfg.to_str().unwrap(), "gen", "--pts", "4", "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success());
    assert_eq!(fs::read_to_string(out_dir.join("points.csv")).unwrap().lines().count(), 9);

    fs::write(&cfg, r#"{"dims":[1,1],"ambient":2,"colour":"red"}"#).unwrap();
    let out = fls(&["--config", cfg.to_str().unwrap(), "gen", "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("colour"));
}

#[test]
fn thread_count_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    gen(dir.path(), "5");
    let csv = dir.path().join("points.csv");
    let run = |threads: &str| {
        let out = fls(&["--threads", threads, "cluster", "--in", csv.to_str().unwrap(), "--k", "2", "--d", "2"]);
        assert!(out.status.success());
        let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
        doc["labels"].clone()
    };
    assert_eq!(run("1"), run("4"));
}
