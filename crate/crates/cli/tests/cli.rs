//! End-to-end checks of the experiment runner: exit codes, report schema,
//! artifact files and reproducibility.

use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_backlund"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("stdout is a JSON report")
}

fn tmp(name: &str) -> PathBuf {
    let mut p = std::env::temp_dir();
    p.push(format!("backlund-cli-test-{}-{name}", std::process::id()));
    p
}

#[test]
fn hypothesis_violation_exits_3_and_quotes_bound() {
    let out = run(&[
        "simulate",
        "--system",
        "hyperbolic2",
        "--mu",
        "0.4",
        "--n-paths",
        "50",
        "--t",
        "0.05",
        "--dt",
        "0.01",
    ]);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("mu >= 1/2"), "stderr: {err}");
}

#[test]
fn lambda_cap_violation_exits_3() {
    let out = run(&["eigen-scan", "--system", "hyperbolic2", "--lambda", "1.5"]);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("eps*mu"), "stderr: {err}");
}

#[test]
fn config_error_exits_2() {
    let out = run(&["classical-flow", "--system", "nosuch"]);
    assert_eq!(out.status.code(), Some(2));
    let missing = run(&["classical-flow", "--config", "/nonexistent/config.json"]);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn toda_chain_check_passes() {
    let out = run(&["toda-chain-check", "--nmax", "5", "--t-values", "0.5"]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let report = stdout_json(&out);
    assert_eq!(report["test"], "toda-chain-check");
    assert_eq!(report["pass"], true);
    assert_eq!(report["results"].as_array().unwrap().len(), 5);
}

#[test]
fn verify_identities_passes_and_reports_all_checks() {
    let out = run(&["verify-identities", "--system", "rational", "--lambda", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let report = stdout_json(&out);
    assert_eq!(report["pass"], true);
    let names: Vec<&str> = report["results"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["test"].as_str().unwrap())
        .collect();
    assert!(names.contains(&"kernel-identity-gradient"));
    assert!(names.contains(&"intertwining-kernel"));
    assert!(names.contains(&"intertwining-operator"));
}

#[test]
fn classical_flow_writes_trajectory_csv() {
    let path = tmp("traj.csv");
    let out = run(&[
        "classical-flow",
        "--system",
        "rational",
        "--lambda",
        "1",
        "--x0",
        "1",
        "--t",
        "0.5",
        "--output",
        path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("t,x,u\n"));
    assert_eq!(text.lines().count(), 1 + 501);
    fs::remove_file(&path).ok();
}

#[test]
fn simulate_writes_csv_or_sbk_by_extension() {
    let csv = tmp("ens.csv");
    let out = run(&[
        "simulate",
        "--system",
        "toda",
        "--x0",
        "0",
        "--n-paths",
        "10",
        "--t",
        "0.1",
        "--dt",
        "0.01",
        "--output",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(fs::read_to_string(&csv).unwrap().starts_with("path,t,x,u\n"));
    fs::remove_file(&csv).ok();

    let sbk = tmp("ens.sbk");
    let out = run(&[
        "simulate",
        "--system",
        "toda",
        "--x0",
        "0",
        "--n-paths",
        "10",
        "--t",
        "0.1",
        "--dt",
        "0.01",
        "--output",
        sbk.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let bytes = fs::read(&sbk).unwrap();
    assert_eq!(&bytes[..5], b"SBKL1");
    fs::remove_file(&sbk).ok();
}

#[test]
fn same_config_and_seed_give_byte_identical_reports() {
    let cfg = tmp("config.json");
    fs::write(
        &cfg,
        r#"{
  "system": {"kind": "rational"},
  "run": {"lambda": 0.5, "x0": 1.0, "t": 0.2, "dt": 0.002, "n_paths": 400, "seed": 7}
}"#,
    )
    .unwrap();
    let args = [
        "verify-laws",
        "--config",
        cfg.to_str().unwrap(),
        "--skip-conditional",
    ];
    let a = run(&args);
    let b = run(&args);
    assert_eq!(a.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
    fs::remove_file(&cfg).ok();
}

#[test]
fn flags_override_config_file() {
    let cfg = tmp("override.json");
    fs::write(&cfg, r#"{"system": {"kind": "hyperbolic2", "mu": 0.4}}"#).unwrap();
    // config alone violates the mu bound; the flag override rescues the run
    let bad = run(&[
        "toda-chain-check",
        "--nmax",
        "2",
        "--config",
        cfg.to_str().unwrap(),
    ]);
    // toda-chain-check does not consult the system block, so check via simulate
    assert_eq!(bad.status.code(), Some(0));
    let violated = run(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--n-paths",
        "10",
        "--t",
        "0.05",
        "--dt",
        "0.01",
    ]);
    assert_eq!(violated.status.code(), Some(3));
    let fixed = run(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--mu",
        "1.0",
        "--n-paths",
        "10",
        "--t",
        "0.05",
        "--dt",
        "0.01",
    ]);
    assert_eq!(fixed.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&fixed.stderr));
    let report = stdout_json(&fixed);
    assert_eq!(report["params"]["mu"], 1.0);
    fs::remove_file(&cfg).ok();
}

#[test]
fn negative_flag_values_parse() {
    let out = run(&[
        "eigen-scan",
        "--system",
        "toda",
        "--lambda",
        "-0.4",
        "--x-min",
        "-1",
        "--x-max",
        "1",
        "--x-steps",
        "4",
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let report = stdout_json(&out);
    assert_eq!(report["params"]["lambda"], -0.4);
}

#[test]
fn verify_laws_report_schema() {
    let out = run(&[
        "verify-laws",
        "--system",
        "toda",
        "--lambda",
        "0.5",
        "--x0",
        "0",
        "--t",
        "0.25",
        "--dt",
        "0.0025",
        "--n-paths",
        "2000",
        "--skip-conditional",
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let report = stdout_json(&out);
    for r in report["results"].as_array().unwrap() {
        assert!(r["test"].is_string());
        assert!(r["statistic"].is_number());
        assert!(r["pass"].is_boolean());
        assert!(r["seed"].is_number());
        if r["test"].as_str().unwrap().starts_with("marginal") {
            assert!(r["p_value"].is_number());
        }
    }
}
