use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn steenlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_steenlab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("config.json");
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn report(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is a JSON report")
}

const FREE_HALF: &str = r#"{"scenarios": [{"kind": "dirac", "name": "half",
    "potential": {"q1": {"type": "zero"}, "q2": {"type": "zero"}},
    "lambdas": [[0.0, 0.5]], "gamma1_oracle": "matrix-exponential"}]}"#;

#[test]
fn empty_config_passes_trivially() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"scenarios": []}"#);
    let out = steenlab(&["run", "--config", &cfg, "--no-timings"]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert_eq!(r["scenarios"].as_array().unwrap().len(), 0);
    assert_eq!(r["summary"]["pass"], 0);
}

#[test]
fn free_trace_at_half_imaginary_lambda_is_minus_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), FREE_HALF);
    let out = steenlab(&["run", "--config", &cfg, "--no-timings"]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    let records = r["scenarios"][0]["records"].as_array().unwrap();
    let g = records.iter().find(|c| c["check"] == "lambda[0]/gamma1").unwrap();
    assert!((g["values"]["re_gamma1"].as_f64().unwrap() + 2.0).abs() < 1e-9);
    assert!(g["values"]["im_gamma1"].as_f64().unwrap().abs() < 1e-9);
    assert!(r["scenarios"][0].get("timing_ms").is_none());
}

#[test]
fn vanishing_partial_solution_is_an_error_verdict() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"scenarios": [{"kind": "deform", "name": "e12",
            "potential": {"q1": {"type": "zero"}, "q2": {"type": "zero"}},
            "lambda": [0.4, 0.0], "c": "e12"}]}"#,
    );
    let out = steenlab(&["run", "--config", &cfg, "--no-timings"]);
    assert_eq!(out.status.code(), Some(1));
    let r = report(&out);
    assert_eq!(r["summary"]["error"], 1);
    let err = r["scenarios"][0]["records"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["verdict"] == "error")
        .unwrap();
    assert!(err["values"]["x"].is_number());
}

#[test]
fn config_errors_name_the_offending_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"scenarios": [{"kind": "dirac", "name": "x",
            "potential": {"q1": {"type": "zero"}, "q2": {"type": "zero"}},
            "lambdas": [[0.4, 0.0]], "bogus": 1}]}"#,
    );
    let out = steenlab(&["run", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("/scenarios/0"), "{stderr}");
    assert!(stderr.contains("bogus"), "{stderr}");
}

#[test]
fn duplicate_names_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let one = r#"{"kind": "dirac", "name": "same",
        "potential": {"q1": {"type": "zero"}, "q2": {"type": "zero"}}, "lambdas": [[0.4, 0.0]]}"#;
    let cfg = write_config(dir.path(), &format!(r#"{{"scenarios": [{one}, {one}]}}"#));
    let out = steenlab(&["run", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/scenarios/1/name"));
}

#[test]
fn out_directory_receives_report_and_traces() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"scenarios": [{"kind": "deform", "name": "flow",
            "potential": {"q1": {"type": "constant", "value": [0.3, 0.0]},
                          "q2": {"type": "constant", "value": [0.3, 0.0]}},
            "lambda": [0.4, 0.0], "c": "symplectic",
            "flows": [{"name": "a", "state0": [[1.0, 0.0], [1.0, 0.0], [0.1, 0.0]]}]}]}"#,
    );
    let out_dir = dir.path().join("out");
    let out = steenlab(&["run", "--config", &cfg, "--out", out_dir.to_str().unwrap(), "--traces"]);
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(out_dir.join("report.json")).unwrap();
    let r: Value = serde_json::from_str(&text).unwrap();
    assert_eq!(r["schema"], 1);
    let trace = std::fs::read_to_string(out_dir.join("flow.flow-a.csv")).unwrap();
    let header = trace.lines().next().unwrap();
    assert!(header.starts_with("x,"), "{header}");
    assert!(trace.lines().count() > 100);
}

#[test]
fn traces_need_an_out_directory() {
    let out = steenlab(&["run", "--traces"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn monodromy_scan_prints_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), FREE_HALF);
    let out = steenlab(&["dirac", "monodromy", "--config", &cfg, "--lambda-grid", "0:0.2:2,0:0:1"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "# half");
    assert!(lines[1].starts_with("re_lambda,im_lambda,re_gamma1"));
    assert_eq!(lines.len(), 4);
    let g: f64 = lines[3].split(',').nth(2).unwrap().parse().unwrap();
    assert!((g - 2.0 * (0.4 * std::f64::consts::PI).cosh()).abs() < 1e-9);
}

#[test]
fn malformed_lambda_grid_is_rejected() {
    let out = steenlab(&["dirac", "monodromy", "--lambda-grid", "0:1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn scan_alpha_on_a_single_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"scenarios": [{"kind": "deform", "name": "free",
            "potential": {"q1": {"type": "zero"}, "q2": {"type": "zero"}},
            "lambda": [0.4, 0.0], "c": "symplectic"}]}"#,
    );
    let out = steenlab(&[
        "deform", "scan-alpha", "--config", &cfg, "--no-timings", "--alpha-min", "-0.5", "--alpha-max", "0.5",
        "--alpha-steps", "11",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    let scan = r["scenarios"][0]["records"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["check"] == "alpha-scan")
        .unwrap()
        .clone();
    assert_eq!(scan["verdict"], "reported-only");
}
