use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use ridgekit::networks::GTNetwork;

fn ridgekit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ridgekit"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn sweep_config(seed: u64) -> String {
    format!(
        r#"{{"d": 2, "ell": 1, "r": 3, "q": "inf", "n_list": [3, 4, 6],
            "target": {{"kind": "gaussian", "center": [0.2, -0.1], "width": 1.0}},
            "seed": {seed}, "quadrature": {{"sup_points": 2000}}}}"#
    )
}

#[test]
fn counterexample_passes() {
    let out = ridgekit(&["counterexample"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["reports"].as_array().unwrap().len(), 4);
}

#[test]
fn basis_reports_size() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("basis.json");
    let out = ridgekit(&["basis", "--d", "2", "--s-max", "3", "--output", target.to_str().unwrap()]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["size"], 10);
    assert!(target.exists());
}

#[test]
fn decompose_writes_a_loadable_network() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "dec.json",
        r#"{"polynomial": {"dim": 3, "terms": [{"k": [2, 0, 1], "c": 1.5}, {"k": [0, 1, 0], "c": -0.25}]},
            "ell": 2, "seed": 3}"#,
    );
    let out = ridgekit(&["decompose", "--config", &cfg]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["n"], 4);
    let net = GTNetwork::from_json(&v["network"].to_string()).unwrap();
    assert_eq!(net.units.len(), 4);
    let x = [0.1, -0.3, 0.5];
    let exact = 1.5 * 0.01 * 0.5 + 0.25 * 0.3;
    assert!((net.eval(&x).unwrap() - exact).abs() < 4e-6);
}

#[test]
fn verify_single_suite_and_unknown_suite() {
    let out = ridgekit(&["verify", "--suite", "trig"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["passed"], true);
    assert_eq!(ridgekit(&["verify", "--suite", "nope"]).status.code(), Some(2));
}

#[test]
fn rate_sweep_is_byte_stable() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "sweep.json", &sweep_config(5));
    let a = ridgekit(&["rate-sweep", "--config", &cfg]);
    let b = ridgekit(&["rate-sweep", "--config", &cfg]);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    assert_eq!(text.lines().next(), Some("n,s,error_lq,residual,seconds"));
    assert_eq!(text.lines().count(), 4);
}

#[test]
fn rate_sweep_writes_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "sweep.json", &sweep_config(1));
    let csv = dir.path().join("out.csv");
    let json = dir.path().join("out.json");
    let out = ridgekit(&[
        "rate-sweep",
        "--config",
        &cfg,
        "--csv",
        csv.to_str().unwrap(),
        "--json",
        json.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    assert!(fs::read_to_string(csv).unwrap().starts_with("n,s,error_lq"));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(json).unwrap()).unwrap();
    assert!(v["slope"].is_number());
}

#[test]
fn bad_inputs_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "bad.json",
        r#"{"d": 2, "ell": 2, "n_list": [4], "target": {"kind": "gaussian", "center": [0, 0], "width": 1}}"#,
    );
    assert_eq!(ridgekit(&["rate-sweep", "--config", &cfg]).status.code(), Some(2));
    let missing = ridgekit(&["rate-sweep", "--config", "/nonexistent/cfg.json"]);
    assert_eq!(missing.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("/nonexistent/cfg.json"));
}

#[test]
fn thread_cap_is_validated() {
    let run = |v: &str| {
        Command::new(env!("CARGO_BIN_EXE_ridgekit"))
            .args(["verify", "--suite", "counterexample"])
            .env("RIDGEKIT_THREADS", v)
            .output()
            .unwrap()
            .status
            .code()
    };
    assert_eq!(run("1"), Some(0));
    assert_eq!(run("0"), Some(2));
    assert_eq!(run("many"), Some(2));
}
