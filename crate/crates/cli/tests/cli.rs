//! End-to-end tests of the installed binary.

use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_csvortex"))
}

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

const QUICK_N1: &str = r#"{
    "vortices": [{"x": 0.3, "y": -0.2, "n": 1}],
    "grid": {"half_width": 10.0, "nodes": 129},
    "solver": {"method": "newton", "residual_tol": 1e-10,
               "max_iterations": 100, "max_gradient_steps": 20000,
               "continuation": null}
}"#;

#[test]
fn report_prints_default_configuration() {
    let out = bin().arg("report").output().unwrap();
    assert!(out.status.success());
    let cfg: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(cfg["mu"], 1.0);
    assert_eq!(cfg["grid"]["nodes"], 513);
    assert_eq!(cfg["solver"]["method"], "both");
}

#[test]
fn missing_config_file_exits_2() {
    let out = bin()
        .args(["solve", "--config", "/nonexistent/cfg.json"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn invalid_config_exits_2_with_field_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    write(&cfg, r#"{"mu": -3.0}"#);
    let out = bin()
        .args(["solve", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("mu"), "stderr: {err}");
}

#[test]
fn unknown_key_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    write(&cfg, r#"{"vorticez": []}"#);
    let out = bin()
        .args(["solve", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn trivial_solve_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    write(
        &cfg,
        r#"{"grid": {"half_width": 8.0, "nodes": 65}, "solver": {"method": "newton"}}"#,
    );
    let report_path = dir.path().join("report.json");
    let out = bin()
        .args(["solve", "--config"])
        .arg(&cfg)
        .arg("--output")
        .arg(&report_path)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report_path).unwrap()).unwrap();
    assert_eq!(report["total_vorticity"], 0);
    assert_eq!(report["observables"]["flux"], 0.0);
    assert_eq!(report["solve"]["converged"], true);
}

#[test]
fn solve_with_artifacts_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    write(&cfg, QUICK_N1);
    let run = |name: &str| -> serde_json::Value {
        let report_path = dir.path().join(name);
        let out = bin()
            .args(["solve", "--config"])
            .arg(&cfg)
            .arg("--output")
            .arg(&report_path)
            .args(["--dump-fields", "--heatmap"])
            .env("VORTEX_WORKERS", "1")
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        serde_json::from_str(&std::fs::read_to_string(&report_path).unwrap()).unwrap()
    };
    let mut a = run("r1.json");
    let mut b = run("r2.json");
    // Reports must be identical apart from wall-clock timing.
    a["solve"]["wall_time_s"] = 0.0.into();
    b["solve"]["wall_time_s"] = 0.0.into();
    assert_eq!(a, b);

    let flux = a["observables"]["flux"].as_f64().unwrap();
    let target = 2.0 * std::f64::consts::PI;
    assert!((flux / target - 1.0).abs() < 1e-2, "flux {flux}");

    for name in ["w.csv", "bfield.csv", "a0.csv"] {
        let text = std::fs::read_to_string(dir.path().join(name)).unwrap();
        assert!(text.starts_with("x,y,value\n"), "{name} header");
        assert_eq!(text.lines().count(), 129 * 129 + 1, "{name} rows");
    }
    for name in ["w.svg", "bfield.svg"] {
        let text = std::fs::read_to_string(dir.path().join(name)).unwrap();
        assert!(text.starts_with("<svg"));
        assert!(text.contains("data:image/png;base64,"));
    }
}

#[test]
fn oracle_subcommand_reports_flux() {
    let out = bin()
        .args(["oracle", "--n", "1", "--metric", "flat", "--rmax", "30", "--nodes", "4096"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("flux = 6.28"), "stdout: {text}");
}

#[test]
fn oracle_rejects_bad_metric() {
    let out = bin()
        .args(["oracle", "--metric", "lumpy"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn verify_passes_on_trivial_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    write(
        &cfg,
        r#"{"grid": {"half_width": 8.0, "nodes": 65}, "solver": {"method": "newton"}}"#,
    );
    let out = bin()
        .args(["verify", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("PASS converged"), "stdout: {text}");
}

#[test]
fn verify_fails_on_truncated_domain() {
    // A domain this small leaks flux; the checks must catch it.
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    write(
        &cfg,
        r#"{
            "vortices": [{"x": 0.0, "y": 0.0, "n": 1}],
            "grid": {"half_width": 5.0, "nodes": 65},
            "solver": {"method": "newton"}
        }"#,
    );
    let out = bin()
        .args(["verify", "--config"])
        .arg(&cfg)
        .args(["--skip-negative-control"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stdout));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("FAIL"), "stdout: {text}");
}
