use std::path::{Path, PathBuf};
use std::process::Command;

use gfrf::experiment::{
    export_priors, run_estimation_experiment, run_transient_experiment, ExperimentConfig, Manifest,
};

fn config(name: &str) -> ExperimentConfig {
    let path = configs_dir().join(name);
    ExperimentConfig::from_json(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn cli(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_gfrf"))
        .args(args)
        .output()
        .unwrap()
}

fn column_is_zero(path: &Path) -> bool {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records()
        .map(|rec| rec.unwrap())
        .all(|rec| rec.get(3).unwrap().parse::<f64>().unwrap() == 0.0)
}

#[test]
fn small_hammerstein_smoke() {
    let dir = tempfile::tempdir().unwrap();
    let c = config("hammerstein_small.json");
    let s = run_estimation_experiment(&c, dir.path()).unwrap();
    assert!(s.relative_error.is_finite());
    for f in &s.files {
        assert!(dir.path().join(f).exists(), "{f} missing");
    }
    let manifest = Manifest::read(dir.path()).unwrap();
    manifest.verify_files(dir.path()).unwrap();
    assert_eq!(manifest.config, c);
    assert_eq!(manifest.files.len() + 1, s.files.len());
    let back: Manifest = serde_json::from_str(&serde_json::to_string(&manifest).unwrap()).unwrap();
    assert_eq!(back, manifest);
}

#[test]
fn benchmark_reports_182_parameters_and_tuning_helps() {
    let dir = tempfile::tempdir().unwrap();
    let s = run_estimation_experiment(&config("benchmark_wiener.json"), dir.path()).unwrap();
    assert_eq!(s.parameters, 182);
    assert_eq!(s.rows, 26);
    assert!(s.rank_deficient);
    assert!(s.relative_error < s.untuned_relative_error);
}

#[test]
fn transient_reports() {
    let dir = tempfile::tempdir().unwrap();
    let s = run_transient_experiment(&config("transient_wiener_zero.json"), dir.path()).unwrap();
    assert!(s.all_passed);

    let s =
        run_transient_experiment(&config("transient_hammerstein_zero.json"), dir.path()).unwrap();
    let names: Vec<&str> = s.checks.iter().map(|c| c.name.as_str()).collect();
    assert!(names.contains(&"r_h_peak") && names.contains(&"t1_plus_t3_deviation"));
    assert!(s.all_passed);

    let s = run_transient_experiment(&config("transient_hammerstein_nonzero.json"), dir.path())
        .unwrap();
    assert!(s.all_passed);

    let s = run_transient_experiment(&config("transient_periodic.json"), dir.path()).unwrap();
    assert!(s.all_passed);
    for f in ["t1.csv", "t2.csv", "t3.csv", "transient_total.csv"] {
        assert!(column_is_zero(&dir.path().join(f)), "{f} not zero");
    }
}

#[test]
fn priors_export_lists_every_file() {
    let dir = tempfile::tempdir().unwrap();
    let s = export_priors(&config("hammerstein_small.json"), dir.path()).unwrap();
    assert_eq!(s.orders[0].parameters, 12);
    Manifest::read(dir.path())
        .unwrap()
        .verify_files(dir.path())
        .unwrap();
}

#[test]
fn cli_runs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = configs_dir().join("hammerstein_small.json");
    for dir in [&a, &b] {
        let out = cli(&[
            "estimate",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            dir.path().to_str().unwrap(),
            "--quiet",
        ]);
        assert!(out.status.success());
        assert!(out.stdout.is_empty());
    }
    let manifest = Manifest::read(a.path()).unwrap();
    for e in &manifest.files {
        assert_eq!(
            std::fs::read(a.path().join(&e.path)).unwrap(),
            std::fs::read(b.path().join(&e.path)).unwrap()
        );
    }
    assert_eq!(
        std::fs::read(a.path().join("manifest.json")).unwrap(),
        std::fs::read(b.path().join("manifest.json")).unwrap()
    );
}

#[test]
fn cli_seed_override_changes_input() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = configs_dir().join("transient_wiener_zero.json");
    let cfg = cfg.to_str().unwrap();
    assert!(cli(&[
        "transient",
        "--config",
        cfg,
        "--out",
        a.path().to_str().unwrap(),
        "--quiet"
    ])
    .status
    .success());
    assert!(cli(&[
        "transient",
        "--config",
        cfg,
        "--out",
        b.path().to_str().unwrap(),
        "--seed",
        "9",
        "--quiet"
    ])
    .status
    .success());
    assert_ne!(
        std::fs::read(a.path().join("input.csv")).unwrap(),
        std::fs::read(b.path().join("input.csv")).unwrap()
    );
    assert_eq!(Manifest::read(b.path()).unwrap().seed, 9);
}

#[test]
fn cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    let mut c = config("benchmark_wiener.json");
    c.signal.excited_indices.push(14);
    c.signal.amplitudes.push(1.0);
    std::fs::write(&bad, c.to_json().unwrap()).unwrap();
    let out = cli(&[
        "estimate",
        "--config",
        bad.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));

    std::fs::write(&bad, r#"{"schema_version": 1, "unknown": true}"#).unwrap();
    let out = cli(&[
        "transient",
        "--config",
        bad.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));

    let out = cli(&[
        "estimate",
        "--config",
        "/nonexistent/config.json",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));

    let out = cli(&["verify", "--quiet", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(dir.path().join("verify.json").exists());
}
