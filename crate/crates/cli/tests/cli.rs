use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn sicoop(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sicoop")).args(args).output().unwrap()
}

fn config(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

#[test]
fn equilibria_prints_coordpref_sets() {
    let tmp = tempfile::tempdir().unwrap();
    let out = sicoop(&[
        "equilibria",
        "--config",
        &config("handshake_certify.json"),
        "--joint-type",
        "0,1",
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("Nash equilibria: 3"), "{text}");
    assert!(text.contains("Pareto-optimal: 2"), "{text}");
    assert!(text.contains("worst for seat 2: ([1.000000, 0.000000], [1.000000, 0.000000]) payoffs (1.000000, 0.600000)"));
}

#[test]
fn malformed_config_exits_with_config_code() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = write(tmp.path(), "bad.json", "{ \"name\": ");
    let out = sicoop(&["dataset", "--config", bad.to_str().unwrap(), "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("not valid JSON"));
}

#[test]
fn unknown_member_is_named() {
    let tmp = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(config("imitation_tv.json")).unwrap().replace("handshake_si", "telepath");
    let bad = write(tmp.path(), "bad.json", &text);
    let out = sicoop(&["dataset", "--config", bad.to_str().unwrap(), "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("telepath"));
}

#[test]
fn dataset_reports_size_and_checksum() {
    let tmp = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(config("imitation_tv.json"))
        .unwrap()
        .replace("\"tv\":", "\"dataset_k\": 100, \"tv\":");
    let cfg = write(tmp.path(), "c.json", &text);
    let out = sicoop(&["dataset", "--config", cfg.to_str().unwrap(), "--out", tmp.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("K = 100"));
    let body = fs::read_to_string(tmp.path().join("dataset.jsonl")).unwrap();
    assert_eq!(body.lines().count(), 101);
    assert!(stdout.lines().any(|l| l.starts_with("sha256 = ") && l.len() == "sha256 = ".len() + 64));
}

#[test]
fn mismatched_dataset_is_a_runtime_error() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().to_str().unwrap();
    assert!(sicoop(&["dataset", "--config", &config("handshake_certify.json"), "--out", dir]).status.success());
    let out = sicoop(&[
        "run-ic",
        "--config",
        &config("imitation_tv.json"),
        "--dataset",
        tmp.path().join("dataset.jsonl").to_str().unwrap(),
        "--out",
        dir,
    ]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn bounds_table_prints_csv() {
    let out = sicoop(&[
        "bounds",
        "--imitation-horizon",
        "1",
        "--horizon",
        "100",
        "--k",
        "1000000",
        "--delta",
        "0.05",
        "--epsilon",
        "0.1",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "n_actions,imitation_horizon,horizon,n_types,k,delta,epsilon,tv_bound,tv_bound_capped,regret_bound"
    );
    let cols: Vec<f64> = lines.next().unwrap().split(',').map(|c| c.parse().unwrap()).collect();
    // 2^4 · 2 · ln(10^6) / 10^6
    let tv = 16.0 * 2.0 * 1e6f64.ln() / 1e6;
    assert!((cols[7] - tv).abs() < 1e-12);
    assert!((cols[9] - (0.1 + tv + (2.0 * 99.0 / 100.0 + 1.0) * 0.1)).abs() < 1e-12);
}

#[test]
fn bad_flag_is_a_usage_error() {
    let out = sicoop(&["bounds", "--delta", "x"]);
    assert_eq!(out.status.code(), Some(2));
}
