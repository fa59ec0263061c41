use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join(format!("../../fixtures/{name}.json"))
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_collapse-lab"))
        .args(args)
        .env_remove("COLLAPSE_LAB_TOL")
        .output()
        .unwrap()
}

fn report(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn validate_prints_a_report() {
    let out = run(&[
        "validate",
        "--scenario",
        fixture("vshape").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert_eq!(r["format"], "collapse-lab/1");
    assert_eq!(r["status"], "complete");
    assert_eq!(r["verdict"], "clean");
}

#[test]
fn negative_verdict_exits_two() {
    let out = run(&[
        "diagnose",
        "--scenario",
        fixture("fee-gate").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(report(&out)["verdict"], "negative");
}

#[test]
fn output_is_deterministic() {
    let path = fixture("loan-probation");
    let a = run(&[
        "collapse",
        "--scenario",
        path.to_str().unwrap(),
        "--delta",
        "0.1",
    ]);
    let b = run(&[
        "collapse",
        "--scenario",
        path.to_str().unwrap(),
        "--delta",
        "0.1",
    ]);
    assert_eq!(a.status.code(), Some(2));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn out_file_matches_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("r.json");
    let path = fixture("three-type");
    let a = run(&["terminal", "--scenario", path.to_str().unwrap()]);
    let b = run(&[
        "terminal",
        "--scenario",
        path.to_str().unwrap(),
        "--out",
        file.to_str().unwrap(),
    ]);
    assert!(b.stdout.is_empty());
    assert_eq!(std::fs::read(&file).unwrap(), a.stdout);
}

#[test]
fn envelope_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let path = fixture("loan-probation");
    let out = run(&[
        "envelope",
        "--scenario",
        path.to_str().unwrap(),
        "--grid",
        "101",
        "--csv",
        dir.path().to_str().unwrap(),
        "--quiet",
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(dir.path().join("envelope.csv")).unwrap();
    let mut lines = text.split('\n');
    assert_eq!(lines.next(), Some("s,g,ghat,conc_g,conc_ghat,h_eps"));
    assert!(!text.contains('\r'));
    // Header, 101 lattice rows and the trailing newline.
    assert_eq!(text.split('\n').count(), 103);
}

#[test]
fn tolerance_comes_from_environment() {
    let out = Command::new(env!("CARGO_BIN_EXE_collapse-lab"))
        .args([
            "validate",
            "--scenario",
            fixture("vshape").to_str().unwrap(),
        ])
        .env("COLLAPSE_LAB_TOL", "1e-7")
        .output()
        .unwrap();
    assert_eq!(
        report(&out)["params"]["tolerances"]["val"].as_f64(),
        Some(1e-7)
    );
}

#[test]
fn load_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.json");
    let out = run(&["validate", "--scenario", missing.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(out.stdout.is_empty());

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\n  \"format\": \"collapse-lab/1\",\n  oops\n}").unwrap();
    let out = run(&["validate", "--scenario", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));

    let mut v: Value =
        serde_json::from_str(&std::fs::read_to_string(fixture("vshape")).unwrap()).unwrap();
    v["prior"] = serde_json::json!([0.7, 0.7]);
    std::fs::write(&bad, v.to_string()).unwrap();
    let out = run(&["validate", "--scenario", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/prior"));
}

#[test]
fn failed_items_make_the_report_partial() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("edge.json");
    let mut v: Value =
        serde_json::from_str(&std::fs::read_to_string(fixture("loan-probation")).unwrap()).unwrap();
    v["cones"] = serde_json::json!([{ "name": "edge", "date": 1, "point": [1.0, 0.0], "generators": [[1.0, -1.0]] }]);
    std::fs::write(&file, v.to_string()).unwrap();
    let out = run(&["certify", "--scenario", file.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let r = report(&out);
    assert_eq!(r["status"], "partial");
    assert!(r["sections"]["certificates"]["data"]["cones"][0]["posterior"]["error"].is_string());
}

#[test]
fn argument_errors() {
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&["validate"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&["--version"]).status.code(), Some(0));
    let path = fixture("vshape");
    assert_eq!(
        run(&[
            "validate",
            "--scenario",
            path.to_str().unwrap(),
            "--eps",
            "-1"
        ])
        .status
        .code(),
        Some(1)
    );
}
