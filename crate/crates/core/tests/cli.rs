mod common;

use std::path::Path;
use std::process::{Command, Output};

use common::PRESET_TOML;

const SMALL: &str = "\n[mesh]\nnx = 4\nny = 4\n[sweep]\nsamples = 20\nlambda_grid = [0.1, 0.4, 1.6, 3.2]\npolish_iters = 20\n";

fn run(dir: &Path, config: &str, args: &[&str]) -> Output {
    let cfg = dir.join("config.toml");
    std::fs::write(&cfg, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_doublephase"))
        .args(args)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn small() -> String {
    format!("{PRESET_TOML}{SMALL}")
}

#[test]
fn validate_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let ok = run(dir.path(), PRESET_TOML, &["validate"]);
    assert_eq!(ok.status.code(), Some(0));
    assert!(stdout(&ok).contains("\"ok\": true"));

    let bad = run(
        dir.path(),
        &PRESET_TOML.replace("q1 = 4", "q1 = 2.5"),
        &["validate"],
    );
    assert_eq!(bad.status.code(), Some(1));
    assert!(stdout(&bad).contains("\"ok\": false"));

    let unknown = run(
        dir.path(),
        &format!("{PRESET_TOML}qq1 = 4\n"),
        &["validate"],
    );
    assert_eq!(unknown.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&unknown.stderr).contains("qq1"));
}

#[test]
fn usage_errors_exit_two() {
    let bin = env!("CARGO_BIN_EXE_doublephase");
    let o = Command::new(bin).arg("frobnicate").output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    let o = Command::new(bin).arg("solve").output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    let o = Command::new(bin)
        .args(["solve", "--config", "/nonexistent/config.toml"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    let o = Command::new(bin).arg("--help").output().unwrap();
    assert_eq!(o.status.code(), Some(0));

    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &small(), &["norms", "--function", "x +"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn norms_of_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &small(), &["norms"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((v["norm_1p"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert!((v["norm_circ"].as_f64().unwrap() - (1.0 + 4f64.cbrt())).abs() < 1e-12);
}

#[test]
fn fiber_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &small(), &["fiber", "--function", "1 + x*y"]);
    assert_eq!(o.status.code(), Some(0));
    let csv = std::fs::read_to_string(dir.path().join("out/fiber.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,psi,dpsi,ddpsi,eta,eta_tilde"));
    assert_eq!(lines.count(), 201);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["roots"]["kind"], "two");
}

#[test]
fn solve_writes_solutions_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &small(), &["solve"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    for branch in ["plus", "minus"] {
        let csv =
            std::fs::read_to_string(dir.path().join(format!("out/solution_{branch}.csv"))).unwrap();
        assert!(csv.starts_with("node,x,y,value\n"));
        assert_eq!(csv.lines().count(), 26);
    }
    let report: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("out/solve_report.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(report["sign_pattern_ok"], true);
    assert!(report["plus"]["best"]["energy"].as_f64().unwrap() < 0.0);
    assert!(report["minus"]["best"]["energy"].as_f64().unwrap() > 0.0);
}

#[test]
fn solve_fails_beyond_the_minus_threshold() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        dir.path(),
        &small().replace("lambda = 0.1", "lambda = 50"),
        &["solve"],
    );
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn sweep_and_props() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &small(), &["sweep"]);
    assert_eq!(o.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("out/sweep_report.json")).unwrap(),
    )
    .unwrap();
    for key in [
        "lambda_tilde_est",
        "lambda_hat_evidence",
        "lambda_star_est",
        "sobolev_S_est",
        "samples",
        "seed",
    ] {
        assert!(report.get(key).is_some(), "missing {key}");
    }
    let csv = std::fs::read_to_string(dir.path().join("out/sweep_samples.csv")).unwrap();
    assert_eq!(csv.lines().count(), 21);

    let o = run(dir.path(), &small(), &["props", "--samples", "20"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("8 of 8 suites passed"));
}
