//! End-to-end runs of the `sspd` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn sspd(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sspd"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn report_recomputes_indices_and_footnotes_the_outlier() {
    let dir = TempDir::new().unwrap();
    let o = sspd(dir.path(), &["report"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.contains("67.7"), "{text}");
    assert!(text.contains("6.8"), "{text}");

    let csv = fs::read_to_string(dir.path().join("comparison.csv")).unwrap();
    let header: Vec<&str> = csv.lines().next().unwrap().split(',').collect();
    let col = header.iter().position(|h| *h == "performance_index_e6").unwrap();
    let sspd_row = csv.lines().find(|l| l.starts_with("SSPD")).expect("SSPD row");
    let index: f64 = sspd_row.split(',').nth(col).unwrap().parse().unwrap();
    assert!((index - 666.67).abs() < 0.01, "{index}");
    assert!(dir.path().join("manifest.json").exists());
}

#[test]
fn bb84_is_reproducible_for_a_seed() {
    let (d1, d2) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    let args = ["bb84", "--seed", "1", "--slots", "200000"];
    assert!(sspd(d1.path(), &args).status.success());
    assert!(sspd(d2.path(), &args).status.success());
    let r1 = fs::read(d1.path().join("report.json")).unwrap();
    let r2 = fs::read(d2.path().join("report.json")).unwrap();
    assert_eq!(r1, r2);

    let manifest: serde_json::Value =
        serde_json::from_slice(&fs::read(d1.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 1);
    assert_eq!(manifest["subcommand"], "bb84");
}

#[test]
fn jitter_on_preset_b_reports_the_band() {
    let dir = TempDir::new().unwrap();
    let o = sspd(dir.path(), &["jitter", "--preset", "B", "--seed", "5"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.contains("100 ± 5 ps"), "{text}");
    assert!(text.contains("PASS"), "{text}");
    for f in ["histogram.csv", "histogram.gp", "jitter.json", "manifest.json"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
}

#[test]
fn bbm92_writes_a_report() {
    let dir = TempDir::new().unwrap();
    let o = sspd(dir.path(), &["bbm92", "--seed", "2", "--slots", "100000000"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["protocol"], "bbm92");
}

#[test]
fn malformed_config_fails_with_json_error() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[bb84\nslots = ").unwrap();
    let o = sspd(dir.path(), &["bb84", "--config", cfg.to_str().unwrap()]);
    assert!(!o.status.success());
    let err: serde_json::Value =
        serde_json::from_str(String::from_utf8_lossy(&o.stderr).trim()).expect("JSON on stderr");
    assert!(err["error"].is_string());
    assert!(err["message"].is_string());
}

#[test]
fn report_rejects_slot_override() {
    let dir = TempDir::new().unwrap();
    let o = sspd(dir.path(), &["report", "--slots", "10"]);
    assert_eq!(o.status.code(), Some(2));
}
