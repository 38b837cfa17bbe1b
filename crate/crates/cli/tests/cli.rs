//! End-to-end checks of the binary: exit codes, file outputs, and
//! reproducibility of numeric output across runs and thread counts.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_suptail")
}

fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().expect("spawn failed")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("no exit code")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn identity2(dir: &Path) -> PathBuf {
    write(
        dir,
        "identity2.json",
        r#"{"n":2,"entries":[[1.0,0.0],[0.0,1.0]]}"#,
    )
}

#[test]
fn bound_success_and_value_window() {
    let dir = tempfile::tempdir().unwrap();
    identity2(dir.path());
    let cfg = write(
        dir.path(),
        "cfg.json",
        r#"{"matrix":"identity2.json","u":1.0,"H":1.0,"delta":0.1,"cd_rule":"stationary-complement"}"#,
    );
    let out_file = dir.path().join("result.json");
    let out = run(&[
        "bound",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_file.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out_file).unwrap()).unwrap();
    let bound = doc["result"]["bound"].as_f64().unwrap();
    // closed-form ceiling: 1 - Phi(1)^2
    assert!(bound > 0.0 && bound <= 0.2922, "bound = {bound}");
    assert!(doc["manifest"]["tool_version"].is_string());
}

#[test]
fn bound_missing_and_malformed_files_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["bound", "--config", "/nonexistent/cfg.json"]);
    assert_eq!(code(&out), 1);

    let cfg = write(dir.path(), "bad.json", "{ not json");
    let out = run(&["bound", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
}

#[test]
fn bound_validation_failure_exits_two_with_report() {
    let dir = tempfile::tempdir().unwrap();
    // negative partial correlation against the pivot: c = 0.2, d = 1 cannot
    // be a strict lower bound for r_12 - r_13 r_23 = -0.2 - 0.36
    write(
        dir.path(),
        "m3.json",
        r#"{"n":3,"entries":[[1.0,-0.2,0.6],[-0.2,1.0,0.6],[0.6,0.6,1.0]]}"#,
    );
    let cfg = write(
        dir.path(),
        "cfg.json",
        r#"{"matrix":"m3.json","u":1.0,"H":1.0,"delta":0.1,
            "c":[0.2,0.2],"d":[1.0,1.0],"cd_rule":"explicit"}"#,
    );
    let out_file = dir.path().join("fail.json");
    let out = run(&[
        "bound",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_file.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 2, "{}", String::from_utf8_lossy(&out.stderr));
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out_file).unwrap()).unwrap();
    let pairs = doc["validation_failure"]["report"]["pair_violations"]
        .as_array()
        .expect("embedded pair violations");
    assert!(!pairs.is_empty());
}

#[test]
fn sweep_small_suite_passes_and_corruption_hook_fails() {
    let dir = tempfile::tempdir().unwrap();
    let suite = write(
        dir.path(),
        "suite.json",
        r#"{"families":[
            {"kind":"random-psd","count":5,"seed":11,"u":1.0},
            {"kind":"random-stationary","count":2,"seed":7,"n_min":2,"n_max":8,"u":2.0,"samples":50000}
        ]}"#,
    );
    let out_file = dir.path().join("sweep.csv");
    let out = run(&[
        "sweep",
        "--suite",
        suite.to_str().unwrap(),
        "--out",
        out_file.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&out_file).unwrap();
    let rows: Vec<&str> = text
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("family,"))
        .collect();
    assert_eq!(rows.len(), 7);
    assert!(rows.iter().all(|r| r.ends_with("true")));

    let out = run(&["sweep", "--suite", suite.to_str().unwrap(), "--corrupt-bound"]);
    assert_eq!(code(&out), 3);
}

#[test]
fn sweep_empty_suite_exits_zero_with_no_rows() {
    let dir = tempfile::tempdir().unwrap();
    let suite = write(dir.path(), "empty.json", r#"{"families":[]}"#);
    let out_file = dir.path().join("empty.csv");
    let out = run(&[
        "sweep",
        "--suite",
        suite.to_str().unwrap(),
        "--out",
        out_file.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    let text = std::fs::read_to_string(&out_file).unwrap();
    let rows: Vec<&str> = text
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("family,"))
        .collect();
    assert!(rows.is_empty(), "unexpected rows: {rows:?}");
}

#[test]
fn sweep_reproducible_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let suite = write(
        dir.path(),
        "suite.json",
        r#"{"families":[
            {"kind":"random-stationary","count":2,"seed":5,"n_min":2,"n_max":6,"u":2.0,"samples":40000},
            {"kind":"random-psd","count":3,"seed":2,"u":0.8}
        ]}"#,
    );
    let mut outputs = Vec::new();
    for threads in ["1", "4"] {
        let out_file = dir.path().join(format!("sweep_{threads}.csv"));
        let out = run(&[
            "sweep",
            "--suite",
            suite.to_str().unwrap(),
            "--threads",
            threads,
            "--out",
            out_file.to_str().unwrap(),
        ]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        let text = std::fs::read_to_string(&out_file).unwrap();
        let numeric: Vec<String> = text
            .lines()
            .filter(|l| !l.starts_with('#'))
            .map(String::from)
            .collect();
        outputs.push(numeric);
    }
    assert_eq!(outputs[0], outputs[1], "numeric output differs across thread counts");
}

#[test]
fn pickands_csv_row_contents() {
    let out = run(&["pickands", "--alpha", "1", "--u", "6", "--format", "csv"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8_lossy(&out.stdout);
    let row = text
        .lines()
        .find(|l| l.starts_with("1,6,"))
        .expect("data row");
    let finite_u: f64 = row.split(',').nth(6).unwrap().parse().unwrap();
    assert!(finite_u <= 1.05, "finite_u_value = {finite_u}");
}

#[test]
fn primeproc_smoke_run() {
    let dir = tempfile::tempdir().unwrap();
    let out_file = dir.path().join("report.json");
    let out = run(&[
        "primeproc",
        "--x",
        "1e4",
        "--samples",
        "20000",
        "--seed",
        "42",
        "--out",
        out_file.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out_file).unwrap()).unwrap();
    assert!(doc["result"]["halasz"]["result"]["bound"].as_f64().unwrap() >= 0.0);
    assert!(doc["result"]["experiment"]["small_prime_variance"]
        .as_f64()
        .unwrap()
        > 0.0);
    assert!(doc["result"]["exact_matrix"].is_null());
}

#[test]
fn clt_error_and_unknown_flag() {
    let dir = tempfile::tempdir().unwrap();
    let coeffs = write(
        dir.path(),
        "coeffs.json",
        r#"{"n":2,"T":2,"alpha":[[0.5,0.25],[0.125,0.5]]}"#,
    );
    let out = run(&[
        "clt-error",
        "--coeffs",
        coeffs.to_str().unwrap(),
        "--a",
        "0.4",
        "--b",
        "0.9",
        "--mode",
        "exact",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let doc: serde_json::Value =
        serde_json::from_str(&String::from_utf8_lossy(&out.stdout)).unwrap();
    assert!(doc["result"]["error"]["total_error"].as_f64().unwrap() > 0.0);

    let out = run(&["clt-error", "--nonsense"]);
    assert_eq!(code(&out), 1);
    let err = String::from_utf8_lossy(&out.stderr).to_lowercase();
    assert!(err.contains("usage"), "stderr: {err}");
}

#[test]
fn oracle_matches_known_value() {
    let dir = tempfile::tempdir().unwrap();
    let m = write(
        dir.path(),
        "half.json",
        r#"{"n":2,"entries":[[1.0,0.5],[0.5,1.0]]}"#,
    );
    let out = run(&[
        "oracle",
        "--matrix",
        m.to_str().unwrap(),
        "--thresholds",
        "0,0",
    ]);
    assert_eq!(code(&out), 0);
    let doc: serde_json::Value =
        serde_json::from_str(&String::from_utf8_lossy(&out.stdout)).unwrap();
    let p = doc["result"]["probability"].as_f64().unwrap();
    assert!((p - 1.0 / 3.0).abs() < 1e-8);
}
