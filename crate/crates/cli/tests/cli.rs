use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_boundary-lab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn summary(dir: &Path, stem: &str) -> Value {
    let text = std::fs::read_to_string(dir.join(format!("{stem}.json"))).unwrap();
    serde_json::from_str(&text).unwrap()
}

fn write_config(dir: &Path, body: &str) -> String {
    let p = dir.join("config.json");
    std::fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn exponent_on_unit_model() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = run(&["exponent", "--out", out]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let j = summary(dir.path(), "exponent");
    let h = j["summary"]["h"].as_f64().unwrap();
    assert!((h - 3f64.ln()).abs() < 1e-9);
    assert_eq!(j["header"]["subcommand"], "exponent");
    assert!(j["header"]["config"]["sigma0"].is_number());
    assert!(dir.path().join("exponent.csv").exists());
}

#[test]
fn shadow_default_config() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["shadow", "--out", dir.path().to_str().unwrap(), "--threads", "1"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let j = summary(dir.path(), "shadow");
    assert!((j["summary"]["min_ratio"].as_f64().unwrap() - 0.75).abs() < 1e-9);
    assert!((j["summary"]["max_ratio"].as_f64().unwrap() - 2.25).abs() < 1e-9);
    let csv = std::fs::read_to_string(dir.path().join("shadow.csv")).unwrap();
    assert!(csv.starts_with("word,letters,length,mu_shadow,ratio\n"));
    assert!(dir.path().join("generalized_shadow.csv").exists());
}

#[test]
fn unknown_subcommand_is_usage_error() {
    assert_eq!(code(&run(&["frobnicate"])), 1);
    assert_eq!(code(&run(&[])), 1);
    assert_eq!(code(&run(&["exponent", "--bogus"])), 1);
    assert_eq!(code(&run(&["--help"])), 0);
}

#[test]
fn invalid_epsilon_fails_validation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"model": {"weights": [1, 1], "dimension": null, "epsilon": 2.0}}"#,
    );
    let o = run(&["verify-all", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("visual parameter"));
}

#[test]
fn malformed_config_fails_validation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"sigma0": "wide"}"#);
    assert_eq!(code(&run(&["growth", "--config", &cfg])), 2);
    assert_eq!(code(&run(&["growth", "--config", "/nonexistent/config.json"])), 1);
}

#[test]
fn small_cap_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"cap": 10}"#);
    let o = run(&["growth", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 3);
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"cocycle_trials": 300, "gap_samples": 200, "tube_pairs": 2}"#,
    );
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for (d, threads) in [(&a, "1"), (&b, "2")] {
        let o = run(&[
            "cocycle",
            "--config",
            &cfg,
            "--out",
            d.to_str().unwrap(),
            "--seed",
            "11",
            "--threads",
            threads,
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    for stem in ["cocycle", "cocycle_gap", "tube_census"] {
        let x = std::fs::read(a.join(format!("{stem}.csv"))).unwrap();
        let y = std::fs::read(b.join(format!("{stem}.csv"))).unwrap();
        assert_eq!(x, y, "{stem}");
    }
    assert_eq!(summary(&a, "cocycle")["header"]["config"]["seed"], 11);
}
