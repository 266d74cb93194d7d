//! End-to-end checks of the experiment runner binary.

use std::fs;
use std::process::Command;

fn coopsim() -> Command {
    Command::new(env!("CARGO_BIN_EXE_coopsim"))
}

fn smoke_spec(dir: &std::path::Path) -> std::path::PathBuf {
    let spec = serde_json::json!({
        "families": ["overtaking"],
        "strategies": ["selective", "oracle"],
        "n_s_list": [6],
        "n_c": 3,
        "seeds_per_config": 1,
        "config_indices": [0],
    });
    let path = dir.join("spec.json");
    fs::write(&path, serde_json::to_string_pretty(&spec).unwrap()).unwrap();
    path
}

#[test]
fn runs_smoke_spec_and_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let spec = smoke_spec(dir.path());
    let out = dir.path().join("out");
    let status = coopsim()
        .args(["--spec", spec.to_str().unwrap(), "--out", out.to_str().unwrap()])
        .status()
        .unwrap();
    assert!(status.success());
    let report = fs::read_to_string(out.join("campaign.csv")).unwrap();
    assert!(report.contains("overtaking,selective,6,3"));
    assert!(fs::read_to_string(out.join("episodes.csv"))
        .unwrap()
        .contains("oracle"));
}

#[test]
fn identical_specs_reproduce_byte_identical_reports() {
    let dir = tempfile::tempdir().unwrap();
    let spec = smoke_spec(dir.path());
    let mut reports = Vec::new();
    for name in ["a", "b"] {
        let out = dir.path().join(name);
        let status = coopsim()
            .args(["--spec", spec.to_str().unwrap(), "--out", out.to_str().unwrap()])
            .status()
            .unwrap();
        assert!(status.success());
        reports.push(fs::read_to_string(out.join("campaign.csv")).unwrap());
    }
    let strip = |s: &str| -> String {
        s.lines()
            .filter(|l| !l.starts_with('#'))
            .collect::<Vec<_>>()
            .join("\n")
    };
    assert_eq!(strip(&reports[0]), strip(&reports[1]));
}

#[test]
fn seed_env_var_overrides_spec_seeds() {
    let dir = tempfile::tempdir().unwrap();
    let spec = smoke_spec(dir.path());
    let out = dir.path().join("out");
    let status = coopsim()
        .args(["--spec", spec.to_str().unwrap(), "--out", out.to_str().unwrap()])
        .env("COOPSIM_SEED", "9")
        .status()
        .unwrap();
    assert!(status.success());
    let episodes = fs::read_to_string(out.join("episodes.csv")).unwrap();
    // Every episode row carries the overridden seed.
    for line in episodes.lines().skip(1) {
        assert_eq!(line.split(',').nth(2), Some("9"), "row: {line}");
    }
}

#[test]
fn rejects_bad_spec() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    fs::write(&path, "{\"families\": []").unwrap();
    let status = coopsim().args(["--spec", path.to_str().unwrap()]).status().unwrap();
    assert!(!status.success());
}
