use serde_json::Value;
use std::path::{Path, PathBuf};
use std::process::Command;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn ccdyn(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_ccdyn")).args(args).output().expect("binary runs")
}

fn summary(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

#[test]
fn kirchhoff_rotation_rate() {
    let out = tempfile::tempdir().unwrap();
    let cfg = configs().join("kirchhoff.toml");
    let o = ccdyn(&["run", "--config", cfg.to_str().unwrap(), "--out", out.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = summary(out.path());
    assert_eq!(s["status"], "ok");
    let rate = s["diagnostics"]["rotation_rate"].as_f64().unwrap();
    assert!((rate - 0.24).abs() < 1e-6, "rate {rate}");
    for f in ["invariants.csv", "contours_final.svg", "state_final.csv"] {
        assert!(out.path().join(f).exists(), "{f} missing");
    }
}

#[test]
fn symmetric_monopole_stays_centered() {
    let out = tempfile::tempdir().unwrap();
    let cfg = configs().join("monopole_sym.toml");
    let o = ccdyn(&["run", "--config", cfg.to_str().unwrap(), "--out", out.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = summary(out.path());
    let d = s["diagnostics"]["center_displacement"].as_f64().unwrap();
    assert!(d < 1e-8, "displacement {d}");
    let csv = std::fs::read_to_string(out.path().join("invariants.csv")).unwrap();
    assert!(csv.starts_with("# ccdyn invariants v1"));
}

#[test]
fn missing_dt_exits_with_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "schema = 1\nkind = \"monopole\"\n[time]\nt_end = 1.0\n").unwrap();
    let o = ccdyn(&["run", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err: Value = serde_json::from_str(String::from_utf8_lossy(&o.stderr).trim()).unwrap();
    assert_eq!(err["kind"], "config-error");
    assert!(err["message"].as_str().unwrap().contains("dt"));
}

#[test]
fn compare_of_a_run_with_itself_is_zero() {
    let out = tempfile::tempdir().unwrap();
    let cfg = configs().join("spectral_reference.toml");
    let run = out.path().join("run");
    let o = ccdyn(&["run", "--config", cfg.to_str().unwrap(), "--out", run.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let o = ccdyn(&["compare", "--a", run.to_str().unwrap(), "--b", run.to_str().unwrap()]);
    assert!(o.status.success());
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["max_hausdorff"].as_f64().unwrap(), 0.0);
}
