use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use gw_gauss_cli::verify::{Check, SuiteReport, VerifyReport};
use gw_gauss_cli::verify_exit_code;
use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gw-gauss"))
}

fn write(dir: &TempDir, name: &str, body: &str) -> PathBuf {
    let path = dir.path().join(name);
    fs::write(&path, body).unwrap();
    path
}

fn run(args: &[&str], files: &[&Path]) -> Output {
    bin().args(args).args(files).output().unwrap()
}

fn json(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).unwrap()
}

fn numbers(v: &Value, out: &mut Vec<String>) {
    match v {
        Value::Number(n) => out.push(n.to_string()),
        Value::Array(items) => items.iter().for_each(|i| numbers(i, out)),
        Value::Object(map) => map.values().for_each(|i| numbers(i, out)),
        _ => {}
    }
}

#[test]
fn igw_example() {
    let dir = TempDir::new().unwrap();
    let a = write(&dir, "a.json", r#"{"mass": 1, "spectrum": [2, 1]}"#);
    let b = write(&dir, "b.json", r#"{"mass": 1, "spectrum": [3]}"#);
    let doc = json(&run(&["igw", "--epsilon", "0"], &[&a, &b]));
    assert_eq!(doc["schema"], "gw-gauss/1");
    assert_eq!(doc["value"].as_f64(), Some(2.0));
    assert_eq!(doc["diagnostics"]["kappas"][0].as_f64(), Some(1.0));
    assert!(doc["plan"]["k_xy"].is_array());
}

#[test]
fn igw_accepts_covariance_files() {
    let dir = TempDir::new().unwrap();
    let a = write(
        &dir,
        "a.json",
        r#"{"mass": 1, "covariance": [[2, 1], [1, 2]]}"#,
    );
    let b = write(&dir, "b.json", r#"{"mass": 1, "spectrum": [3, 1]}"#);
    let doc = json(&run(&["igw", "--epsilon", "0"], &[&a, &b]));
    assert!(doc["value"].as_f64().unwrap().abs() < 1e-12);
}

#[test]
fn barycenter_example() {
    let dir = TempDir::new().unwrap();
    let m1 = write(&dir, "m1.json", r#"{"mass": 1, "spectrum": [1]}"#);
    let m3 = write(&dir, "m3.json", r#"{"mass": 1, "spectrum": [3]}"#);
    let doc = json(&run(
        &[
            "barycenter",
            "--epsilon",
            "0",
            "--weights",
            "0.5,0.5",
            "--dim",
            "1",
        ],
        &[&m1, &m3],
    ));
    assert_eq!(doc["spectrum"], serde_json::json!([2.0]));
    assert_eq!(doc["formula_flags"], serde_json::json!([]));
}

#[test]
fn entropic_barycenter_reports_formula_flag() {
    let dir = TempDir::new().unwrap();
    let m = write(&dir, "m.json", r#"{"mass": 1, "spectrum": [1]}"#);
    let doc = json(&run(
        &[
            "barycenter",
            "--epsilon",
            "0.1",
            "--weights",
            "1",
            "--dim",
            "1",
        ],
        &[&m],
    ));
    assert_eq!(doc["formula_flags"], serde_json::json!(["Proof"]));
    let k = doc["diagnostics"]["kappas"][0][0].as_f64().unwrap();
    assert_eq!(k, 0.5 * (1.0 + 0.9f64.sqrt()));
}

#[test]
fn uigw_document() {
    let dir = TempDir::new().unwrap();
    let a = write(&dir, "a.json", r#"{"mass": 2, "spectrum": [2, 1]}"#);
    let b = write(&dir, "b.json", r#"{"mass": 0.5, "spectrum": [3]}"#);
    let doc = json(&run(&["uigw", "--epsilon", "0.5", "--tau", "1"], &[&a, &b]));
    assert!(doc["value"].as_f64().unwrap().is_finite());
    assert_eq!(doc["diagnostics"]["coords"].as_array().unwrap().len(), 2);
    assert!(doc["diagnostics"]["mass"].as_f64().unwrap() > 0.0);
}

#[test]
fn verify_uigw_suite_passes() {
    let out = run(&["verify", "--suite", "uigw", "--seed", "7"], &[]);
    assert_eq!(out.status.code(), Some(0));
    let doc = json(&out);
    let d = &doc["diagnostics"];
    assert_eq!(d["passed"], true);
    assert_eq!(d["suites"][0]["suite"], "uigw");
    assert!(d["suites"][0]["checks"]
        .as_array()
        .unwrap()
        .iter()
        .all(|c| c["pass"] == true));
    assert_eq!(d["tolerances"][0]["tolerance"].as_f64(), Some(1e-5));
    assert!(doc["value"].as_f64().unwrap() <= 1.0);
}

#[test]
fn verify_suite_seed_is_independent_of_selection() {
    let alone = json(&run(
        &["verify", "--suite", "monte_carlo", "--seed", "3"],
        &[],
    ));
    let all = json(&run(&["verify", "--seed", "3"], &[]));
    let suites = all["diagnostics"]["suites"].as_array().unwrap();
    let mc = suites.iter().find(|s| s["suite"] == "monte_carlo").unwrap();
    assert_eq!(&alone["diagnostics"]["suites"][0], mc);
    assert_eq!(suites.len(), 6);
    assert_eq!(all["formula_flags"], serde_json::json!(["Proof"]));
}

#[test]
fn output_is_byte_identical_and_exact() {
    let dir = TempDir::new().unwrap();
    let a = write(&dir, "a.json", r#"{"mass": 1.3, "spectrum": [2.2, 0.7]}"#);
    let b = write(&dir, "b.json", r#"{"mass": 0.4, "spectrum": [1.9]}"#);
    let args = ["uigw", "--epsilon", "0.3", "--tau", "0.9"];
    let first = run(&args, &[&a, &b]);
    let second = run(&args, &[&a, &b]);
    assert_eq!(first.stdout, second.stdout);
    let v1 = run(&["verify", "--suite", "balanced", "--seed", "11"], &[]);
    let v2 = run(&["verify", "--suite", "balanced", "--seed", "11"], &[]);
    assert_eq!(v1.stdout, v2.stdout);

    let text = String::from_utf8(first.stdout).unwrap();
    let doc: Value = serde_json::from_str(&text).unwrap();
    let mut nums = Vec::new();
    numbers(&doc, &mut nums);
    // floats are written as d.dddddddddddddddde<exp>
    let floats: Vec<&str> = text
        .split([',', ':', '[', ']', '{', '}'])
        .filter(|t| t.contains('e') && t.starts_with(|c: char| c == '-' || c.is_ascii_digit()))
        .collect();
    assert!(!floats.is_empty() && floats.len() == nums.len());
    for f in floats {
        let mantissa = f
            .trim_start_matches('-')
            .split('e')
            .next()
            .unwrap()
            .replace('.', "");
        assert_eq!(mantissa.len(), 17, "{f}");
    }
}

#[test]
fn out_flag_writes_file() {
    let dir = TempDir::new().unwrap();
    let a = write(&dir, "a.json", r#"{"mass": 1, "spectrum": [1]}"#);
    let target = dir.path().join("result.json");
    let out = run(
        &["igw", "--epsilon", "1", "--out", target.to_str().unwrap()],
        &[&a, &a],
    );
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let doc: Value = serde_json::from_str(&fs::read_to_string(&target).unwrap()).unwrap();
    assert_eq!(doc["command"], "igw");
}

#[test]
fn validation_errors_exit_2() {
    let dir = TempDir::new().unwrap();
    let a = write(&dir, "a.json", r#"{"mass": 1, "spectrum": [1]}"#);
    let heavy = write(&dir, "heavy.json", r#"{"mass": 2, "spectrum": [1]}"#);
    let broken = write(&dir, "broken.json", r#"{"mass": 1, "spectrum": "#);
    let singular = write(
        &dir,
        "singular.json",
        r#"{"mass": 1, "covariance": [[1, 1], [1, 1]]}"#,
    );
    let missing = dir.path().join("missing.json");
    let cases: Vec<(Vec<&str>, Vec<&Path>)> = vec![
        (vec!["uigw"], vec![&a, &a]),
        (vec!["igw", "--tau", "1"], vec![&a, &a]),
        (vec!["igw"], vec![&a]),
        (vec!["igw", "--epsilon", "-1"], vec![&a, &a]),
        (vec!["igw"], vec![&a, &heavy]),
        (vec!["igw"], vec![&a, &broken]),
        (vec!["igw"], vec![&a, &singular]),
        (vec!["igw"], vec![&a, &missing]),
        (vec!["barycenter", "--dim", "1"], vec![&a]),
        (
            vec!["barycenter", "--weights", "0.5,0.4", "--dim", "1"],
            vec![&a, &a],
        ),
        (vec!["barycenter", "--weights", "1", "--dim", "2"], vec![&a]),
        (vec!["verify", "--suite", "nope"], vec![]),
        (vec!["igw", "--suite", "uigw"], vec![&a, &a]),
        (vec!["frobnicate"], vec![]),
    ];
    for (args, files) in cases {
        let out = run(&args, &files);
        assert_eq!(
            out.status.code(),
            Some(2),
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        assert!(!out.stderr.is_empty());
        assert!(out.stdout.is_empty());
    }
}

#[test]
fn epsilon_condition_exits_3() {
    let dir = TempDir::new().unwrap();
    let m = write(&dir, "m.json", r#"{"mass": 1, "spectrum": [0.3]}"#);
    let out = run(
        &[
            "barycenter",
            "--epsilon",
            "0.0901",
            "--weights",
            "1",
            "--dim",
            "1",
        ],
        &[&m],
    );
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("(0, 0)"));
}

fn report(pass: bool, converged: bool) -> VerifyReport {
    VerifyReport {
        root_seed: 0,
        suites: vec![SuiteReport {
            suite: "discrete",
            seed: 1,
            instances: 1,
            checks: vec![Check {
                name: "solver marginal error",
                worst: if pass { 0.0 } else { 1.0 },
                tolerance: 1e-6,
                pass,
            }],
            formula_flags: Vec::new(),
            converged,
        }],
        tolerances: Vec::new(),
        passed: pass,
    }
}

#[test]
fn verify_exit_codes() {
    assert_eq!(verify_exit_code(&report(true, true)), 0);
    assert_eq!(verify_exit_code(&report(false, true)), 1);
    assert_eq!(verify_exit_code(&report(true, false)), 4);
    assert_eq!(verify_exit_code(&report(false, false)), 4);
}
