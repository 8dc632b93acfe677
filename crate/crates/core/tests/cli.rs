use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn sparselab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sparselab")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn golden(name: &str) -> String {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(format!("{name}.txt"));
    fs::read_to_string(path).unwrap()
}

#[test]
fn help_texts_match_the_golden_files() {
    let top = sparselab(&["--help"]);
    assert_eq!(top.status.code(), Some(0));
    assert_eq!(stdout(&top), golden("help"));
    for sub in ["gen", "solve", "certify", "bounds", "experiment", "validate-lemmas"] {
        let o = sparselab(&[sub, "--help"]);
        assert_eq!(o.status.code(), Some(0), "{sub}");
        assert_eq!(stdout(&o), golden(sub), "help text of {sub} changed");
    }
}

#[test]
fn usage_and_domain_errors_exit_with_one() {
    assert_eq!(sparselab(&["bounds", "--n", "10"]).status.code(), Some(1));
    assert_eq!(
        sparselab(&["bounds", "--n", "10", "--p", "200", "--alpha", "0.8", "--beta", "0.8", "--nope"]).status.code(),
        Some(1)
    );
    assert_eq!(sparselab(&["no-such-command"]).status.code(), Some(1));
    let bad_alpha = sparselab(&["bounds", "--n", "100", "--p", "200", "--alpha", "1.5", "--beta", "0.5"]);
    assert_eq!(bad_alpha.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad_alpha.stderr).contains("alpha"));
    // p = 100 is below exp(1/(2(1 - sqrt 0.8)))
    assert_eq!(
        sparselab(&["bounds", "--n", "100", "--p", "100", "--alpha", "0.8", "--beta", "0.8"]).status.code(),
        Some(1)
    );
}

#[test]
fn unreadable_instances_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.csv");
    let o = sparselab(&["solve", missing.to_str().unwrap(), "--gamma", "0.1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing.csv"));

    let garbage = dir.path().join("garbage.csv");
    fs::write(&garbage, "this is not an instance\n").unwrap();
    assert_eq!(sparselab(&["certify", garbage.to_str().unwrap(), "--gamma", "0.1"]).status.code(), Some(2));
}

#[test]
fn bounds_reports_the_full_scale_values() {
    let o = sparselab(&["bounds", "--n", "8000", "--p", "32000", "--alpha", "0.8", "--beta", "0.8", "--eps", "1"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let json: Value = serde_json::from_str(&text[text.find("\n{").unwrap()..]).unwrap();
    let exact = &json["exact"];
    assert!((exact["k_max"].as_f64().unwrap() - 246.8).abs() <= 0.1);
    assert!((exact["gamma"].as_f64().unwrap() - 0.1139).abs() <= 1e-4);
    assert!((exact["t_min"].as_f64().unwrap() - 0.6263).abs() <= 5e-4);
    assert_eq!(json["consistency"]["l2_bound"].as_f64(), Some(4.0));
}

#[test]
fn gen_solve_certify_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("inst.csv");
    let inst_s = inst.to_str().unwrap();
    let g = sparselab(&[
        "gen", "--n", "40", "--p", "80", "--k", "3", "--T", "2", "--eps", "0.05", "--seed", "11", "--out", inst_s,
    ]);
    assert_eq!(g.status.code(), Some(0));

    let sol_path = dir.path().join("x.csv");
    let s = sparselab(&["solve", inst_s, "--gamma", "0.1", "--out", sol_path.to_str().unwrap()]);
    assert_eq!(s.status.code(), Some(0));
    let rows = fs::read_to_string(&sol_path).unwrap();
    assert!(rows.starts_with("index,value\n"));

    let report_path = dir.path().join("report.json");
    let c = sparselab(&["certify", inst_s, "--gamma", "0.1", "--out", report_path.to_str().unwrap()]);
    assert_eq!(c.status.code(), Some(0));
    let report: Value = serde_json::from_str(&fs::read_to_string(&report_path).unwrap()).unwrap();
    assert_eq!(report["k"], 3);
    assert!(report["c1"].is_object() && report["c2"].is_object());
}

#[test]
fn empty_support_is_certified_on_the_dual_condition_only() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("zero.csv");
    let inst_s = inst.to_str().unwrap();
    assert!(sparselab(&["gen", "--n", "20", "--p", "40", "--k", "0", "--eps", "0.1", "--seed", "3", "--out", inst_s])
        .status
        .success());
    let o = sparselab(&["certify", inst_s, "--gamma", "0.5"]);
    assert_eq!(o.status.code(), Some(0));
    let report: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(report["c1"].is_null());
    assert_eq!(report["subset"], "c2_only");
    assert_eq!(report["c2"]["holds"], report["exact"]);
}

fn small_experiment(out: &Path, threads: &str) -> Vec<u8> {
    let o = sparselab(&[
        "experiment",
        "fig1",
        "--n",
        "60",
        "--p",
        "200",
        "--trials",
        "12",
        "--grid",
        "0,2,4",
        "--seed",
        "5",
        "--threads",
        threads,
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("fig1.svg").exists() && out.join("fig1.config.json").exists());
    fs::read(out.join("fig1.csv")).unwrap()
}

#[test]
fn experiment_csv_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let first = small_experiment(&dir.path().join("a"), "1");
    let second = small_experiment(&dir.path().join("b"), "1");
    let threaded = small_experiment(&dir.path().join("c"), "3");
    assert_eq!(first, second);
    assert_eq!(first, threaded);
    let text = String::from_utf8(first).unwrap();
    assert!(text.starts_with("sweep_var,value,trials,successes,p_hat,ci_low,ci_high,anomalies\n"));
    assert_eq!(text.lines().count(), 4);
}

#[test]
fn experiment_rejects_bad_configs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let decreasing = sparselab(&["experiment", "fig1", "--n", "60", "--p", "200", "--grid", "4,2", "--out", out]);
    assert_eq!(decreasing.status.code(), Some(1));
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"unknown_field": 1}"#).unwrap();
    let unknown = sparselab(&["experiment", "fig1", "--config", cfg.to_str().unwrap(), "--out", out]);
    assert_ne!(unknown.status.code(), Some(0));
}
