use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_shortpath"));
    c.env_remove("SHORTPATH_CAP_N");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("valid JSON")
}

fn gen(dir: &Path, name: &str, args: &[&str]) -> PathBuf {
    let path = dir.join(name);
    let mut full = vec!["gen"];
    full.extend_from_slice(args);
    full.extend_from_slice(&["--output", path.to_str().unwrap()]);
    let out = run(&full);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    path
}

#[test]
fn gen_is_deterministic_and_builds_i2() {
    let a = run(&["gen", "--n", "8", "--d", "2", "--terms", "12", "--weights", "pm1", "--seed", "1"]);
    let b = run(&["gen", "--n", "8", "--d", "2", "--terms", "12", "--weights", "pm1", "--seed", "1"]);
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(json(&a)["terms"].as_array().unwrap().len(), 12);
    let i2 = json(&run(&["gen", "--n", "2", "--d", "2", "--terms", "1", "--weights", "m1"]));
    assert_eq!(i2["terms"], serde_json::json!([{ "qubits": [0, 1], "weight": -1 }]));
}

#[test]
fn gen_output_round_trips_through_stdin() {
    let inst = run(&["gen", "--n", "6", "--d", "2", "--terms", "12", "--seed", "1"]);
    let mut child = bin()
        .args(["spectrum", "-"])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(&inst.stdout).unwrap();
    let out = child.wait_with_output().unwrap();
    let v = json(&out);
    assert!(v["e_ground"].as_f64().unwrap() <= v["e0"].as_f64().unwrap());
}

#[test]
fn spectrum_of_i2_matches_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let i2 = gen(dir.path(), "i2.json", &["--n", "2", "--d", "2", "--terms", "1", "--weights", "m1"]);
    let v = json(&run(&["spectrum", i2.to_str().unwrap(), "--b", "0.5", "--k", "3"]));
    assert!((v["e_ground"].as_f64().unwrap() + 1.25f64.sqrt()).abs() < 1e-10);
    assert_eq!(v["eq_ground"].as_f64().unwrap(), 1.0);
}

#[test]
fn pathscan_csv_has_constant_eq_column() {
    let dir = tempfile::tempdir().unwrap();
    let i2 = gen(dir.path(), "i2.json", &["--n", "2", "--d", "2", "--terms", "1", "--weights", "m1"]);
    let out = run(&["pathscan", i2.to_str().unwrap(), "--grid", "21", "--format", "csv"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 22);
    let header: Vec<&str> = lines[0].split(',').collect();
    let col = header.iter().position(|&h| h == "eq_ground").unwrap();
    for line in &lines[1..] {
        assert_eq!(line.split(',').nth(col).unwrap(), "1.0");
    }
}

#[test]
fn reports_are_byte_identical_across_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let inst = gen(dir.path(), "r.json", &["--n", "7", "--d", "3", "--terms", "14", "--seed", "2"]);
    let p = inst.to_str().unwrap();
    let a = run(&["shortpath", p, "--trials", "5000", "--seed", "9", "--workers", "1"]);
    let b = run(&["shortpath", p, "--trials", "5000", "--seed", "9", "--workers", "4"]);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
    let v = json(&a);
    let (rate, p_ov, se) = (
        v["accept_rate"].as_f64().unwrap(),
        v["p_ov"].as_f64().unwrap(),
        v["accept_stderr"].as_f64().unwrap(),
    );
    assert!((rate - p_ov).abs() <= 3.0 * se.max(1e-4));
}

#[test]
fn hybrid_and_reduce_and_dichotomy_run() {
    let dir = tempfile::tempdir().unwrap();
    let inst = gen(dir.path(), "r.json", &["--n", "6", "--d", "2", "--terms", "12", "--seed", "1"]);
    let p = inst.to_str().unwrap();
    let h = json(&run(&["hybrid", p, "--n-samp", "0"]));
    assert_eq!(h["verdict"], "exact");
    assert_eq!(h["verified_ground"], true);
    let r = json(&run(&["reduce", p, "--lift"]));
    assert_eq!(r["trace"]["final_in_original"], true);
    assert_eq!(r["lift"]["assumption_ok"], true);
    let d = json(&run(&["dichotomy", p]));
    assert!(d["branch"] == "gapped" || d["branch"] == "localized");
}

#[test]
fn walk_reports_moments_and_returns() {
    let v = json(&run(&["walk", "--n", "4", "--k", "3", "--t-max", "3", "--walks", "2000"]));
    assert_eq!(v["moments"][1]["value"].as_f64().unwrap(), 0.0);
    assert_eq!(v["returns"].as_array().unwrap().len(), 3);
}

#[test]
fn error_classes_map_to_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let i2 = gen(dir.path(), "i2.json", &["--n", "2", "--d", "2", "--terms", "1", "--weights", "m1"]);
    let p = i2.to_str().unwrap();
    assert_eq!(run(&["spectrum", p, "--b", "1.5"]).status.code(), Some(2));
    assert_eq!(run(&["spectrum"]).status.code(), Some(2));
    assert_eq!(run(&["spectrum", p, "--mode", "full"]).status.code(), Some(4));
    assert_eq!(run(&["entropy", p]).status.code(), Some(4));
    let big = gen(dir.path(), "big.json", &["--n", "10", "--d", "2", "--terms", "20"]);
    let out = bin()
        .args(["reduce", big.to_str().unwrap()])
        .env("SHORTPATH_CAP_N", "8")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(5));
}

#[test]
fn verify_small_battery_passes() {
    let out = run(&["verify", "--battery", "small", "--seed", "7"]);
    let v = json(&out);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(v["instances"], 10);
}
