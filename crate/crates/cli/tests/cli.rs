use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn aucteq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aucteq")).args(args).env_remove("AUCTEQ_SEED").output().unwrap()
}

fn json_of(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn welfare_minimum_bound() {
    let out = aucteq(&["bound", "welfare-min"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json_of(&out);
    assert!((v["results"]["alpha"].as_f64().unwrap() - 0.274322).abs() < 1e-4);
    assert!((v["results"]["value"].as_f64().unwrap() - 0.813559).abs() < 1e-5);
    assert!(v["input_digest"].as_str().unwrap().starts_with("sha256:"));
    assert!(v["comparisons"].as_array().unwrap().iter().all(|c| c["pass"] == true));
}

#[test]
fn other_bounds() {
    let v = json_of(&aucteq(&["bound", "gap", "--eps", "0.1"]));
    assert!((v["results"]["value"].as_f64().unwrap() - 3.24e6).abs() < 1e-6);
    let v = json_of(&aucteq(&["bound", "symmetric", "--n", "3", "--value", "1"]));
    assert!((v["results"]["value"].as_f64().unwrap() - (1.0 - 3.0 * (-2.0f64).exp())).abs() < 1e-15);
    assert_eq!(aucteq(&["bound", "gap", "--eps", "0"]).status.code(), Some(2));
    assert_eq!(aucteq(&["bound", "welfare-lb", "--alpha", "0.3", "--beta", "0.1", "--v", "1"]).status.code(), Some(2));
}

#[test]
fn table1_verification_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = aucteq(&["construct", "table1", "--output", path(dir.path())]);
    assert_eq!(out.status.code(), Some(0));
    let file = dir.path().join("equilibrium.json");
    assert!(file.exists() && dir.path().join("construct.json").exists());

    let cce = aucteq(&["verify", "--input", path(&file), "--mode", "cce", "--tol", "0.005"]);
    assert_eq!(cce.status.code(), Some(0));
    let v = json_of(&cce);
    assert_eq!(v["results"]["pass"], true);
    assert!(v["results"]["by_policy"]["deviator-wins"].is_object());
    assert!(v["results"]["by_policy"]["deviator-loses"].is_object());

    let ce = aucteq(&["verify", "--input", path(&file), "--mode", "ce", "--tol", "0.005"]);
    assert_eq!(ce.status.code(), Some(1));
    let worst = &json_of(&ce)["results"]["report"]["worst"];
    assert!(worst["gain"].as_f64().unwrap() > 0.005);

    let digest = |o: &Output| json_of(o)["input_digest"].clone();
    assert_eq!(digest(&cce), digest(&ce));
}

#[test]
fn input_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{\n  \"values\": [1, 1],\n  \"atoms\": [\n").unwrap();
    let out = aucteq(&["verify", "--input", path(&bad)]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line") && err.contains("column"), "{err}");

    fs::write(&bad, r#"{"values": ["1", "1"], "atoms": [{"probability": "0.5", "bids": ["0", "0"]}]}"#).unwrap();
    let out = aucteq(&["verify", "--input", path(&bad)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("invariant"));

    assert_eq!(aucteq(&["verify", "--input", path(&dir.path().join("missing.json"))]).status.code(), Some(2));
    assert_eq!(aucteq(&["lp", "--values", "0.5,1"]).status.code(), Some(2));
    assert_eq!(aucteq(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn lp_output_reverifies_and_reduces() {
    let dir = tempfile::tempdir().unwrap();
    let out = aucteq(&["lp", "--values", "1,1", "--grid", "10", "--objective", "revenue", "--output", path(dir.path())]);
    assert_eq!(out.status.code(), Some(0));
    let v = json_of(&out);
    assert!(v["results"]["value"].as_f64().unwrap() >= 1.0 - 2.0 / std::f64::consts::E - 1e-6);
    let file = dir.path().join("equilibrium.json");
    let check = aucteq(&["verify", "--input", path(&file), "--tie", "deviator-wins", "--tol", "1e-7"]);
    assert_eq!(check.status.code(), Some(0));

    let out = aucteq(&["lp", "--values", "1,0.6,0.3", "--grid", "4", "--objective", "revenue", "--output", path(dir.path())]);
    assert_eq!(out.status.code(), Some(0));
    let reduced = aucteq(&["reduce", "--input", path(&file)]);
    assert_eq!(reduced.status.code(), Some(0));
    let r = json_of(&reduced);
    let before = r["results"]["summary_before"]["revenue"].as_f64().unwrap();
    let after = r["results"]["summary_after"]["revenue"].as_f64().unwrap();
    assert!((before - after).abs() < 1e-12);
    assert_eq!(r["results"]["equilibrium"]["values"].as_array().unwrap().len(), 2);
}

#[test]
fn simulation_seed_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["simulate", "--values", "1,1", "--grid", "5", "--rounds", "2000"];
    let by_env = Command::new(env!("CARGO_BIN_EXE_aucteq")).args(args).env("AUCTEQ_SEED", "5").output().unwrap();
    let mut with_flag = args.to_vec();
    with_flag.extend(["--seed", "5", "--output", path(dir.path())]);
    let by_flag = aucteq(&with_flag);
    assert_eq!(by_env.status.code(), Some(0));
    assert_eq!(json_of(&by_env)["results"], json_of(&by_flag)["results"]);
    assert_eq!(json_of(&by_flag)["results"]["config"]["seed"], 5);
    let default = aucteq(&args);
    assert_eq!(json_of(&default)["results"]["config"]["seed"], 7);
    let csv = fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    assert!(csv.starts_with("round,welfare,revenue\n"));
    assert!(dir.path().join("equilibrium.json").exists());
}

#[test]
fn constructions_emit_samples() {
    let dir = tempfile::tempdir().unwrap();
    let out = aucteq(&["construct", "worst-revenue", "--n", "2", "--value", "1", "--grid", "50", "--samples", "11", "--output", path(dir.path())]);
    assert_eq!(out.status.code(), Some(0));
    let v = json_of(&out);
    let revenue = v["results"]["summary"]["revenue"].as_f64().unwrap();
    assert!((revenue - (1.0 - 2.0 / std::f64::consts::E)).abs() < 1e-9);
    let csv = fs::read_to_string(dir.path().join("cdf_samples.csv")).unwrap();
    assert_eq!(csv.lines().count(), 12);
    assert!(dir.path().join("cdf.json").exists());

    let v = json_of(&aucteq(&["construct", "worst-welfare", "--optimal"]));
    assert!((v["results"]["summary"]["welfare"].as_f64().unwrap() - 0.813559).abs() < 1e-6);
    assert_eq!(aucteq(&["construct", "nash-mixture", "--values", "2,1", "--prices", "0.5"]).status.code(), Some(2));
    let v = json_of(&aucteq(&["construct", "nash-mixture", "--values", "2,1", "--prices", "1,1.5"]));
    assert_eq!(v["results"]["summary"]["revenue"], 1.25);
}

#[test]
fn report_passes_and_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let first = aucteq(&["report", "--output", path(a.path())]);
    let text = String::from_utf8_lossy(&first.stdout);
    assert_eq!(first.status.code(), Some(0), "{text}");
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS [")).count(), 11);
    let second = aucteq(&["report", "--output", path(b.path())]);
    assert_eq!(second.status.code(), Some(0));
    let read = |d: &Path| -> Value { serde_json::from_str(&fs::read_to_string(d.join("report.json")).unwrap()).unwrap() };
    let (x, y) = (read(a.path()), read(b.path()));
    assert_eq!(x["results"], y["results"]);
    assert!(x["comparisons"].as_array().unwrap().iter().all(|c| c["provenance"].is_string() && c["tolerance"].is_number()));

    let one = aucteq(&["report", "--criterion", "6"]);
    assert_eq!(one.status.code(), Some(0));
    assert_eq!(aucteq(&["report", "--criterion", "12"]).status.code(), Some(2));
}
