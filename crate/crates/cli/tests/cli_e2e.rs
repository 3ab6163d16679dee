//! End-to-end exercises of the built binary: validation behavior, exit
//! codes, and byte-level determinism of the run section.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cocyspec"))
}

fn repo_config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn run_with(config: &Path, out: &Path) -> Output {
    bin()
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn exit_code(out: &Output) -> i32 {
    out.status.code().expect("no signal")
}

#[test]
fn invalid_config_exits_two_with_aggregated_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(
        &cfg,
        r#"{
            "command": "spextrum",
            "base": {"kind": "finite-periodic", "period": 1},
            "generator": {"kind": "constant", "matrix": [[2.0]]},
            "scan": {"grid_step": 0.0, "gridd": 1}
        }"#,
    )
    .unwrap();
    let out = run_with(&cfg, dir.path());
    assert_eq!(exit_code(&out), 2);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("grid step must be > 0"), "{err}");
    assert!(err.contains("gridd") && err.contains("grid_step"), "{err}");
    assert!(err.contains("spextrum") && err.contains("spectrum"), "{err}");
    assert!(err.matches("config-invalid").count() >= 3, "aggregated, not first-only: {err}");
}

#[test]
fn missing_config_exits_two_unless_selftest() {
    let out = bin().arg("--command").arg("spectrum").output().unwrap();
    assert_eq!(exit_code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("config-missing"));
}

#[test]
fn unknown_command_flag_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .arg("--config")
        .arg(repo_config("spectrum_diag2.json"))
        .arg("--out")
        .arg(dir.path())
        .arg("--command")
        .arg("spectrym")
        .output()
        .unwrap();
    assert_eq!(exit_code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown command"));
}

#[test]
fn selftest_passes_without_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .arg("--command")
        .arg("selftest")
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(exit_code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("10/10 checks passed"), "{stdout}");
    assert!(dir.path().join("report.json").exists());
}

#[test]
fn spectrum_example_reports_log_eigenvalues_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_with(&repo_config("spectrum_diag2.json"), dir.path());
    assert_eq!(exit_code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    let intervals = report["run"]["result"]["spectrum"]["intervals"].as_array().unwrap();
    assert_eq!(intervals.len(), 2);
    let log2 = 2.0f64.ln();
    assert!((intervals[0]["hi"].as_f64().unwrap() - log2).abs() <= 1e-3);
    assert!((intervals[1]["hi"].as_f64().unwrap() + log2).abs() <= 1e-3);
    assert!(dir.path().join("trace_scan.csv").exists());
}

#[test]
fn identical_configs_give_byte_identical_run_sections() {
    let cfg = repo_config("spectrum_diag2.json");
    let d1 = tempfile::tempdir().unwrap();
    let d2 = tempfile::tempdir().unwrap();
    // Different thread counts must not change the run section either.
    let out1 = bin()
        .arg("--config").arg(&cfg)
        .arg("--out").arg(d1.path())
        .arg("--threads").arg("1")
        .output()
        .unwrap();
    let out2 = bin()
        .arg("--config").arg(&cfg)
        .arg("--out").arg(d2.path())
        .arg("--threads").arg("4")
        .output()
        .unwrap();
    assert_eq!(exit_code(&out1), 0);
    assert_eq!(exit_code(&out2), 0);
    let r1: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d1.path().join("report.json")).unwrap()).unwrap();
    let r2: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d2.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(
        serde_json::to_string(&r1["run"]).unwrap(),
        serde_json::to_string(&r2["run"]).unwrap(),
        "run sections must match byte for byte"
    );
    let t1 = std::fs::read(d1.path().join("trace_scan.csv")).unwrap();
    let t2 = std::fs::read(d2.path().join("trace_scan.csv")).unwrap();
    assert_eq!(t1, t2, "traces must match byte for byte");
}

#[test]
fn failed_verification_verdict_exits_one() {
    // Tail rate above the top exponent: margin 0, verdict not quasicompact.
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("qc.json");
    std::fs::write(
        &cfg,
        r#"{
            "command": "quasicompact",
            "base": {"kind": "finite-periodic", "period": 1},
            "generator": {"kind": "constant", "matrix": [[2.0, 0.0], [0.0, 0.5]]},
            "model": {"kind": "banded", "truncation": 1, "log_tail_rate": 0.8},
            "quasicompact": {"n_max": 64}
        }"#,
    )
    .unwrap();
    let out = run_with(&cfg, dir.path());
    assert_eq!(exit_code(&out), 1, "{}", String::from_utf8_lossy(&out.stdout));
    assert!(String::from_utf8_lossy(&out.stdout).contains("NOT quasicompact"));
}
