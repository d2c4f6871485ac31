use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn camtomo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_camtomo")).args(args).output().expect("binary runs")
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

const COARSE: [&str; 6] = ["--grid", "32x64", "--surface-grid", "64x64", "--points", "6"];

#[test]
fn validate_passes_on_the_default_config() {
    let out = camtomo(&["validate", "--config", config("default_cap.toml").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    assert_eq!(text.lines().filter(|l| l.contains("pass")).count(), 4, "{text}");
}

#[test]
fn validation_failure_exits_with_2() {
    let out = camtomo(&["validate", "--config", config("large_cam.toml").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let large = config("large_cam.toml");
    let mut args = vec!["roundtrip", "--config", large.to_str().unwrap()];
    args.extend(COARSE);
    args.extend(["--out", dir.path().to_str().unwrap()]);
    let out = camtomo(&args);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn missing_config_exits_with_4() {
    let out = camtomo(&["validate", "--config", "/nonexistent/camtomo.toml"]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn project_then_invert() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let mut args = vec!["project"];
    args.extend(COARSE);
    args.extend(["--out", d]);
    let out = camtomo(&args);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let sino = dir.path().join("sinogram.json");
    assert!(sino.exists());

    let mut args = vec!["invert", "--sinogram", sino.to_str().unwrap()];
    args.extend(COARSE);
    args.extend(["--out", d]);
    let out = camtomo(&args);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["report.json", "field.csv", "normalizer.csv"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }

    // A different grid is a different geometry.
    let out = camtomo(&["invert", "--sinogram", sino.to_str().unwrap(), "--grid", "32x48", "--out", d]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("does not match"));
}

#[test]
fn roundtrip_reports_metrics_and_dumps_slices() {
    let dir = tempfile::tempdir().unwrap();
    let slices = dir.path().join("slices");
    let mut args = vec!["roundtrip"];
    args.extend(COARSE);
    args.extend(["--out", dir.path().to_str().unwrap(), "--dump-slices", slices.to_str().unwrap()]);
    let out = camtomo(&args);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("linf"));
    assert!(std::fs::read_dir(&slices).unwrap().count() >= 2);
}

#[test]
fn schedule_flags_are_checked() {
    let out = camtomo(&["validate", "--levels", "1"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn selftest_passes() {
    let out = camtomo(&["selftest"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
}
