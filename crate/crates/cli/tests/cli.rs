use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const CHAIN: &str = r#"{"n": 2, "kind": "direct", "edges": [[0, 1, 0.5]], "inputs": [0], "outputs": [1]}"#;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_edgeimpact"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn as_f64(v: &Value) -> f64 {
    match v {
        Value::String(s) => s.parse().unwrap(),
        other => other.as_f64().unwrap(),
    }
}

#[test]
fn chain_scan_lists_both_edges() {
    let dir = tempfile::tempdir().unwrap();
    let net = write(dir.path(), "chain.json", CHAIN);
    let out = run(&["scan", "--net", net.to_str().unwrap(), "--w", "1", "--sort", "edge"]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows, ["0,1,inf,false,1,1", "1,0,2,false,0.5,0.0833333333333"]);
}

#[test]
fn verified_scan_passes_and_reports_on_stderr() {
    let dir = tempfile::tempdir().unwrap();
    let net = dir.path().join("er.json");
    let gen = run(&[
        "generate", "--kind", "er", "--n", "30", "--p", "0.1", "--rho", "0.85", "--seed", "7",
        "--inputs", "4", "--outputs", "6", "--out", net.to_str().unwrap(),
    ]);
    assert_eq!(code(&gen), 0);
    let out = run(&[
        "scan", "--net", net.to_str().unwrap(), "--w", "0.2", "--verify", "--seed", "1",
        "--samples", "10", "--top-k", "5", "--format", "json",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(json(&out).as_array().unwrap().len(), 5);
    assert!(String::from_utf8_lossy(&out.stderr).contains("0 failed"));
}

#[test]
fn generated_er_network_validates() {
    let dir = tempfile::tempdir().unwrap();
    let net = dir.path().join("er.json");
    let gen = run(&[
        "generate", "--kind", "er", "--n", "50", "--p", "0.08", "--rho", "0.9", "--seed", "11",
        "--out", net.to_str().unwrap(),
    ]);
    assert_eq!(code(&gen), 0);
    let out = run(&["validate", "--net", net.to_str().unwrap(), "--format", "json"]);
    assert_eq!(code(&out), 0);
    let v = json(&out);
    assert_eq!(v["n"], 50);
    assert_eq!(v["kind"], "direct");
    assert!((as_f64(&v["spectral_radius"]) - 0.9).abs() < 1e-9);
}

#[test]
fn path_growth_with_displacement_condition() {
    let dir = tempfile::tempdir().unwrap();
    let net = dir.path().join("path.json");
    let grown = dir.path().join("grown.json");
    assert_eq!(code(&run(&["generate", "--kind", "path", "--n", "20", "--w", "0.2", "--out", net.to_str().unwrap()])), 0);
    let out = run(&[
        "grow", "--net", net.to_str().unwrap(), "--w", "0.2", "--budget", "10", "--condition",
        "displacement", "--verify", "--format", "json", "--save-net", grown.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert_eq!(v["steps"].as_array().unwrap().len(), 10);
    let final_c = as_f64(&v["final"]);
    assert!((29.3..=31.3).contains(&final_c), "final coherence {final_c}");
    assert_eq!(v["hop_diameter_before"], 19);
    assert!(v["hop_diameter_after"].as_u64().unwrap() <= 5);

    let check = run(&["coherence", "--net", grown.to_str().unwrap(), "--verify", "--format", "json"]);
    assert_eq!(code(&check), 0);
    assert!((as_f64(&json(&check)["coherence"]) - final_c).abs() < 1e-9 * final_c);
}

#[test]
fn strict_path_growth_stalls() {
    let dir = tempfile::tempdir().unwrap();
    let net = dir.path().join("path.json");
    assert_eq!(code(&run(&["generate", "--kind", "path", "--n", "20", "--w", "0.2", "--out", net.to_str().unwrap()])), 0);
    let out = run(&["grow", "--net", net.to_str().unwrap(), "--w", "0.2", "--budget", "10"]);
    assert_eq!(code(&out), 3);
}

#[test]
fn gramian_growth_on_chain_adds_the_feedback_edge() {
    let dir = tempfile::tempdir().unwrap();
    let net = write(dir.path(), "chain.json", CHAIN);
    let out = run(&["grow", "--net", net.to_str().unwrap(), "--w", "0.1", "--budget", "1", "--verify"]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    let last = text.lines().last().unwrap();
    assert!(last.starts_with("1,1,0,0.1,"), "{last}");
}

#[test]
fn margin_and_fragility_radius() {
    let dir = tempfile::tempdir().unwrap();
    let net = write(dir.path(), "chain.json", CHAIN);
    let path = net.to_str().unwrap();
    let out = run(&["margin", "--net", path, "--s", "1", "--t", "0", "--verify"]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("margin,2\n"));
    let out = run(&["margin", "--net", path, "--s", "0", "--t", "1"]);
    assert!(stdout(&out).contains("margin,inf\n"));
    let out = run(&["margin", "--net", path, "--format", "json"]);
    let v = json(&out);
    assert_eq!(as_f64(&v["fragility_radius"]), 2.0);
    assert_eq!((v["s"].as_u64(), v["t"].as_u64()), (Some(1), Some(0)));
}

#[test]
fn verify_all_on_both_kinds() {
    let dir = tempfile::tempdir().unwrap();
    let grid = dir.path().join("grid.json");
    assert_eq!(code(&run(&["generate", "--kind", "grid", "--rows", "3", "--cols", "4", "--w", "0.15", "--out", grid.to_str().unwrap()])), 0);
    let out = run(&["verify-all", "--net", grid.to_str().unwrap(), "--seed", "3", "--samples", "8", "--format", "json"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(json(&out)["passed"], true);

    let er = dir.path().join("er.json");
    assert_eq!(code(&run(&["generate", "--kind", "er", "--n", "12", "--p", "0.3", "--rho", "0.8", "--seed", "5", "--out", er.to_str().unwrap()])), 0);
    let out = run(&["verify-all", "--net", er.to_str().unwrap(), "--seed", "3", "--samples", "8"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn failed_verification_exits_with_four() {
    let dir = tempfile::tempdir().unwrap();
    let net = dir.path().join("er.json");
    let gen = run(&[
        "generate", "--kind", "er", "--n", "20", "--p", "0.2", "--rho", "0.9", "--seed", "2",
        "--out", net.to_str().unwrap(),
    ]);
    assert_eq!(code(&gen), 0);
    let path = net.to_str().unwrap();
    // Sweep and closed form agree to round-off, never to 1e-300.
    let out = run(&["scan", "--net", path, "--w", "0.1", "--verify", "--seed", "1", "--tol", "1e-300"]);
    assert_eq!(code(&out), 4);
    assert!(String::from_utf8_lossy(&out.stderr).contains("FAILED"));
    let out = run(&["scan", "--net", path, "--w", "0.1", "--verify", "--seed", "1", "--tol=-1"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn exit_codes_for_bad_input() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("absent.json");
    assert_eq!(code(&run(&["validate", "--net", missing.to_str().unwrap()])), 2);

    let garbage = write(dir.path(), "garbage.json", "{not json");
    assert_eq!(code(&run(&["validate", "--net", garbage.to_str().unwrap()])), 2);

    assert_eq!(code(&run(&["generate", "--kind", "er", "--n", "5", "--p", "0.5", "--rho", "0.5"])), 2);
    assert_eq!(code(&run(&["scan", "--w", "1"])), 2);

    let unstable = write(
        dir.path(),
        "unstable.json",
        r#"{"n": 2, "kind": "direct", "edges": [[0, 1, 1.0], [1, 0, 1.5]], "inputs": [0], "outputs": [1]}"#,
    );
    assert_eq!(code(&run(&["validate", "--net", unstable.to_str().unwrap()])), 3);

    let chain = write(dir.path(), "chain.json", CHAIN);
    assert_eq!(code(&run(&["coherence", "--net", chain.to_str().unwrap()])), 3);
}

#[test]
fn csv_output_goes_to_file() {
    let dir = tempfile::tempdir().unwrap();
    let net = write(dir.path(), "chain.json", CHAIN);
    let out_path = dir.path().join("scan.csv");
    let out = run(&["scan", "--net", net.to_str().unwrap(), "--w", "0.5", "--out", out_path.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    assert!(out.stdout.is_empty());
    let text = fs::read_to_string(out_path).unwrap();
    assert!(text.starts_with("s,t,margin,destabilizing,hinf,h2_lower_bound\n"));
}
