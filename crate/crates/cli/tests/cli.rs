//! Exit-code and file-output behavior of the binary.

use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_coagdiff"))
}

fn scenarios() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

#[test]
fn check_passes_on_shipped_model() {
    let out = bin()
        .args(["check"])
        .arg(scenarios().join("es_default.json"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn malformed_json_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("broken.json");
    std::fs::write(&path, "{ not json").unwrap();
    for sub in ["check", "run", "horizon"] {
        let out = bin().args([sub]).arg(&path).output().unwrap();
        assert_eq!(out.status.code(), Some(2), "subcommand {sub}");
    }
}

#[test]
fn unknown_key_exits_2() {
    let text = std::fs::read_to_string(scenarios().join("es_smooth.json")).unwrap();
    let mut value: serde_json::Value = serde_json::from_str(&text).unwrap();
    value["integrato"] = serde_json::json!("strang");
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("extra.json");
    std::fs::write(&path, serde_json::to_string(&value).unwrap()).unwrap();
    let out = bin().args(["check"]).arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn increasing_diffusivity_fails_check_with_witness() {
    let text = std::fs::read_to_string(scenarios().join("constant_kernel_refine.json")).unwrap();
    let mut value: serde_json::Value = serde_json::from_str(&text).unwrap();
    let n = value["model"]["diffusivity"].as_array().unwrap().len();
    value["model"]["diffusivity"] =
        serde_json::json!((1..=n).map(|i| i as f64).collect::<Vec<_>>());
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, serde_json::to_string(&value).unwrap()).unwrap();
    let out = bin().args(["check"]).arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["diffusivity_k_decreasing"], serde_json::json!(false));
    assert!(report["violations"]
        .as_array()
        .unwrap()
        .iter()
        .any(|v| v["check"] == "diffusivity_k_decreasing"));
}

#[test]
fn run_writes_outputs_and_respects_flags() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["run"])
        .arg(scenarios().join("es_smooth.json"))
        .args(["--cadence", "5", "--out-dir"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let diag = std::fs::read_to_string(dir.path().join("diagnostics.csv")).unwrap();
    // 0.04 / 0.004 = 10 steps at cadence 5: rows at steps 0, 5, 10 + header
    assert_eq!(diag.lines().count(), 4);
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["overrides"]["cadence"], serde_json::json!(5));
    assert!(manifest["tolerances"]["stability_cmax_dt"].is_number());
}

#[test]
fn run_rejects_inadmissible_without_force() {
    let text = std::fs::read_to_string(scenarios().join("constant_kernel_refine.json")).unwrap();
    let mut value: serde_json::Value = serde_json::from_str(&text).unwrap();
    let n = value["model"]["diffusivity"].as_array().unwrap().len();
    value["model"]["diffusivity"] =
        serde_json::json!((1..=n).map(|i| i as f64 * 1e-3).collect::<Vec<_>>());
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("inadmissible.json");
    std::fs::write(&path, serde_json::to_string(&value).unwrap()).unwrap();
    let out_dir = dir.path().join("out");
    let out = bin()
        .args(["run"])
        .arg(&path)
        .arg("--out-dir")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let forced = bin()
        .args(["run"])
        .arg(&path)
        .args(["--force", "--out-dir"])
        .arg(&out_dir)
        .output()
        .unwrap();
    assert_eq!(forced.status.code(), Some(0), "{}", String::from_utf8_lossy(&forced.stderr));
}

#[test]
fn horizon_on_empty_init_reports_infinite() {
    let text = std::fs::read_to_string(scenarios().join("es_smooth.json")).unwrap();
    let mut value: serde_json::Value = serde_json::from_str(&text).unwrap();
    value["init"] = serde_json::json!({"kind": "monodisperse", "class": 1, "density": 0.0});
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("empty.json");
    std::fs::write(&path, serde_json::to_string(&value).unwrap()).unwrap();
    let out = bin().args(["horizon"]).arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["alpha"], serde_json::json!(0.0));
    assert_eq!(report["zeta_lower"], serde_json::json!("inf"));
}

#[test]
fn horizon_scales_linearly_with_density() {
    let text = std::fs::read_to_string(scenarios().join("es_default.json")).unwrap();
    let mut value: serde_json::Value = serde_json::from_str(&text).unwrap();
    value["init"]["density"] = serde_json::json!(2.0);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("doubled.json");
    std::fs::write(&path, serde_json::to_string(&value).unwrap()).unwrap();
    let out = bin().args(["horizon"]).arg(&path).output().unwrap();
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((report["alpha"].as_f64().unwrap() - 8.0).abs() < 1e-12);
}

#[test]
fn oracle_rejects_irreducible_scenario() {
    // spatially resolved with a nonzero kernel: no oracle applies
    let out = bin()
        .args(["oracle"])
        .arg(scenarios().join("es_smooth.json"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn converge_rejects_bad_axis() {
    let out = bin()
        .args(["converge"])
        .arg(scenarios().join("es_smooth.json"))
        .args(["--grid", "dz"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2)); // clap usage error
}
