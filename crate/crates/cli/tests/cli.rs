use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_gclm");

fn gclm(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn json(bytes: &[u8]) -> Value {
    serde_json::from_slice(bytes).expect("valid JSON")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Rows of a sweep CSV keyed by column name, skipping comment lines.
fn sweep_rows(text: &str) -> Vec<std::collections::HashMap<String, String>> {
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    lines
        .map(|l| header.iter().map(|h| h.to_string()).zip(l.split(',').map(str::to_string)).collect())
        .collect()
}

fn field(row: &std::collections::HashMap<String, String>, k: &str) -> f64 {
    row[k].parse().unwrap_or_else(|_| panic!("{k} = {:?}", row[k]))
}

#[test]
fn rejects_a_above_one() {
    let out = gclm(&["solve", "--a", "1.5"]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("a <= 1"));
}

#[test]
fn solve_a0_converges_quickly() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("a0.csv");
    let out = gclm(&["solve", "--a", "0", "--out", path(&csv)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let meta = json(&out.stdout);
    assert!(meta["iterations"].as_u64().unwrap() <= 50);
    assert!(meta["residual"].as_f64().unwrap() <= 1e-7);
    let text = fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("x,f,g,omega\n"));
    let side = json(&fs::read(dir.path().join("a0.meta.json")).unwrap());
    assert_eq!(side, meta);
}

#[test]
fn solve_half_gamma() {
    let out = gclm(&["solve", "--a", "0.5", "--format", "json"]);
    assert_eq!(code(&out), 0);
    let v = json(&out.stdout);
    assert!((v["gamma"].as_f64().unwrap() - 1.0 / 3.0).abs() < 1e-3);
    assert_eq!(v["support"]["kind"], "algebraic");
    let x = v["profile"]["x"].as_array().unwrap();
    assert_eq!(x.len(), v["profile"]["f"].as_array().unwrap().len());
}

#[test]
fn outputs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (p1, p2) = (dir.path().join("one.csv"), dir.path().join("two.csv"));
    for p in [&p1, &p2] {
        assert_eq!(code(&gclm(&["solve", "--a", "0.25", "--out", path(p)])), 0);
    }
    assert_eq!(fs::read(&p1).unwrap(), fs::read(&p2).unwrap());
    assert_eq!(
        fs::read(dir.path().join("one.meta.json")).unwrap(),
        fs::read(dir.path().join("two.meta.json")).unwrap()
    );
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"tol": 1e-5, "max_iter": 40, "format": "json"}"#).unwrap();
    let v = json(&gclm(&["solve", "--a", "0", "--config", path(&cfg)]).stdout);
    assert_eq!(v["config"]["tol"].as_f64(), Some(1e-5));
    assert_eq!(v["config"]["max_iter"].as_u64(), Some(40));
    let v = json(&gclm(&["solve", "--a", "0", "--config", path(&cfg), "--tol", "1e-9"]).stdout);
    assert_eq!(v["config"]["tol"].as_f64(), Some(1e-9));
    assert_eq!(v["config"]["max_iter"].as_u64(), Some(40));
    let v = json(&gclm(&["solve", "--a", "0", "--format", "json"]).stdout);
    assert_eq!(v["config"]["tol"].as_f64(), Some(1e-7));
}

#[test]
fn unknown_config_key_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"tolerance": 1e-5}"#).unwrap();
    assert_eq!(code(&gclm(&["solve", "--a", "0", "--config", path(&cfg)])), 1);
}

#[test]
fn bad_seed_and_flags_are_usage_errors() {
    assert_eq!(code(&gclm(&["solve", "--a", "0", "--seed", "gauss"])), 1);
    assert_eq!(code(&gclm(&["solve", "--a", "0", "--tol", "-1"])), 1);
    assert_eq!(code(&gclm(&["solve"])), 1);
    assert_eq!(code(&gclm(&["--help"])), 0);
}

#[test]
fn seed_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("half.csv");
    let first = json(&gclm(&["solve", "--a", "0.5", "--out", path(&csv)]).stdout);
    let seed = format!("file:{}", path(&csv));
    let out = gclm(&["solve", "--a", "0.5", "--seed", &seed, "--format", "json"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let again = json(&out.stdout);
    assert!(again["iterations"].as_u64().unwrap() <= 2, "{}", again["iterations"]);
    assert_eq!(again["config"]["seed"], Value::String(seed));
    let (b0, b1) = (first["b"].as_f64().unwrap(), again["b"].as_f64().unwrap());
    assert!((b0 - b1).abs() < 1e-6);
}

#[test]
fn sweep_list_matches_catalog() {
    let dir = tempfile::tempdir().unwrap();
    let out = gclm(&["sweep", "--a-list", "0,0.5", "--out", path(dir.path())]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(text, String::from_utf8_lossy(&out.stdout));
    assert!(text.starts_with("a,b,c,k,mu,cl,cw,gamma,ra,L,pa,iters,residual\n"));
    let rows = sweep_rows(&text);
    assert_eq!(rows.len(), 2);
    let rel = |x: f64, y: f64| ((x - y) / y).abs();
    let s2 = std::f64::consts::SQRT_2;
    assert!(rel(field(&rows[0], "b"), 1.0) < 1e-3);
    assert!(rel(field(&rows[0], "mu"), 2.0 * (2f64.ln() - 0.5)) < 1e-3);
    assert!(rel(field(&rows[1], "b"), s2 / 2.0) < 1e-3);
    assert!(rel(field(&rows[1], "cl"), s2 / 16.0) < 1e-3);
    assert!(rel(field(&rows[1], "gamma"), 1.0 / 3.0) < 1e-3);
    assert!(dir.path().join("profile_a0.5.csv").exists());
    assert!(dir.path().join("profile_a0.5.meta.json").exists());
    let meta = json(&fs::read(dir.path().join("sweep.meta.json")).unwrap());
    assert_eq!(meta["table"]["mode"], "continuation");
}

#[test]
fn sweep_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let d = path(dir.path());
    assert_eq!(code(&gclm(&["sweep", "--a-min", "0.5", "--a-max", "0", "--step", "0.1", "--out", d])), 1);
    assert_eq!(code(&gclm(&["sweep", "--a-list", "0", "--jobs", "2", "--out", d])), 1);
    assert_eq!(code(&gclm(&["sweep", "--a-list", "2", "--out", d])), 1);
}

#[test]
fn sweep_negative_range_decay() {
    let dir = tempfile::tempdir().unwrap();
    let out = gclm(&["sweep", "--a-min", "-3", "--a-max", "-0.5", "--step", "0.5", "--out", path(dir.path())]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let rows = sweep_rows(&String::from_utf8_lossy(&out.stdout));
    assert_eq!(rows.len(), 6);
    for r in &rows {
        let ra = field(r, "ra");
        assert!(ra > 1.0 && ra < 2.0, "a={} ra={ra}", r["a"]);
    }
}

#[test]
fn sweep_cold_compact() {
    let dir = tempfile::tempdir().unwrap();
    let out = gclm(&["sweep", "--a-list", "0.9,1.0", "--mode", "cold", "--jobs", "2", "--out", path(dir.path())]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let rows = sweep_rows(&String::from_utf8_lossy(&out.stdout));
    assert_eq!(rows.len(), 2);
    for r in &rows {
        assert_eq!(r["ra"], "inf");
        assert!(field(r, "L") >= 1.0);
    }
    assert_eq!(field(&rows[0], "a"), 0.9);
}

#[test]
fn critical_without_sign_change_fails() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.json");
    let out = gclm(&["critical", "--bracket", "0,0.1", "--out", path(&trace)]);
    assert_eq!(code(&out), 2, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn verify_passes_and_reports_json() {
    let out = gclm(&["verify"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    let v = json(&gclm(&["verify", "--json"]).stdout);
    assert_eq!(v["passed"], true);
    let checks = v["checks"].as_array().unwrap();
    assert!(checks.len() > 20);
    assert!(checks.iter().all(|c| c["pass"] == true && c["name"].is_string()));
}

#[test]
fn verify_flags_injected_kernel_error() {
    let out = gclm(&["--inject-f-error", "0.01", "verify", "--json"]);
    assert_eq!(code(&out), 2);
    let v = json(&out.stdout);
    assert_eq!(v["passed"], false);
    let failed: Vec<&str> = v["checks"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|c| c["pass"] == false)
        .map(|c| c["name"].as_str().unwrap())
        .collect();
    for name in ["specfun.F(0.5)", "a0.T", "a0.R0 fixed point", "a_half.solve"] {
        assert!(failed.contains(&name), "{name} not flagged: {failed:?}");
    }
    assert!(!failed.iter().any(|n| n.contains("identity")), "{failed:?}");
}
