//! End-to-end pipeline tests through the configuration layer and the
//! compiled binary: validation verdicts, report artifacts, determinism, and
//! exit codes.

use std::path::Path;
use std::process::Command;

use pamham::config::{validate_config, RunConfig};
use pamham::runner::run_experiment;

fn write_config(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

const CASE1_VARIANCE: &str = r#"
[model]
equation = "pam"
dimension = 1
t0 = 1.0
truncation = 2

[kernel]
temporal = { kind = "exponential", rate = 1.0 }
spatial = { kind = "exponential_decay", rate = 1.0, amplitude = 1.0 }

[grid]
n_t = 3
n_x = 24

[experiment]
kind = "variance"
radii = [2.0, 4.0, 8.0]
target_exponent = 0.5
tolerance = 0.15

[run]
seed = 5
"#;

#[test]
fn variance_pipeline_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig::from_toml(CASE1_VARIANCE).unwrap();
    let report = validate_config(&cfg);
    assert!(report.ok(), "{:?}", report.errors);
    let outcome = run_experiment(&cfg, dir.path()).unwrap();
    assert!(outcome.pass);
    assert!(dir.path().join("report.json").exists());
    assert!(dir.path().join("variance.csv").exists());
    assert!(dir.path().join("seeds.json").exists());
    let text = std::fs::read_to_string(dir.path().join("report.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["config"]["run"]["seed"], 5);
    assert!(v["results"]["fit"]["exponent"].as_f64().is_some());
}

#[test]
fn binary_validate_run_report_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = write_config(dir.path(), "case1.toml", CASE1_VARIANCE);
    let bin = env!("CARGO_BIN_EXE_pamham");

    let validate = Command::new(bin)
        .args(["validate", "--config"])
        .arg(&cfg_path)
        .output()
        .unwrap();
    assert!(validate.status.success(), "{validate:?}");
    assert!(String::from_utf8_lossy(&validate.stdout).contains("ok"));

    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    for out in [&out_a, &out_b] {
        let run = Command::new(bin)
            .args(["run", "--config"])
            .arg(&cfg_path)
            .args(["--workers", "2", "--out"])
            .arg(out)
            .output()
            .unwrap();
        assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    }
    // Identical config + seeds => byte-identical artifacts.
    for file in ["report.json", "variance.csv", "seeds.json"] {
        let a = std::fs::read(out_a.join(file)).unwrap();
        let b = std::fs::read(out_b.join(file)).unwrap();
        assert_eq!(a, b, "{file} differs between reruns");
    }

    let report = Command::new(bin)
        .args(["report", "--out"])
        .arg(&out_a)
        .output()
        .unwrap();
    assert!(report.status.success());
    let text = String::from_utf8_lossy(&report.stdout);
    assert!(text.contains("variance") && text.contains("pass: yes"));
}

#[test]
fn binary_flags_invalid_config_with_failure_exit() {
    let dir = tempfile::tempdir().unwrap();
    let bad = CASE1_VARIANCE.replace("alpha = 1.5", "x").replace(
        "spatial = { kind = \"exponential_decay\", rate = 1.0, amplitude = 1.0 }",
        "spatial = { kind = \"riesz\", alpha = 1.5 }",
    );
    let cfg_path = write_config(dir.path(), "bad.toml", &bad);
    let bin = env!("CARGO_BIN_EXE_pamham");
    let validate = Command::new(bin)
        .args(["validate", "--config"])
        .arg(&cfg_path)
        .output()
        .unwrap();
    // Hypothesis violation: exit code 1 and the admissible range in the text.
    assert_eq!(validate.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&validate.stdout).contains("outside"));

    let run = Command::new(bin)
        .args(["run", "--config"])
        .arg(&cfg_path)
        .args(["--out"])
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(run.status.code(), Some(2), "structured error expected");
}

#[test]
fn seed_override_changes_streams_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = write_config(dir.path(), "clt.toml", &CASE1_VARIANCE.replace("seed = 5", "seed = 9"));
    let bin = env!("CARGO_BIN_EXE_pamham");
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    // Same --seed override twice: identical outputs.
    for out in [&out_a, &out_b] {
        let run = Command::new(bin)
            .args(["run", "--config"])
            .arg(&cfg_path)
            .args(["--seed", "77", "--out"])
            .arg(out)
            .output()
            .unwrap();
        assert!(run.status.success());
    }
    let a = std::fs::read(out_a.join("report.json")).unwrap();
    let b = std::fs::read(out_b.join("report.json")).unwrap();
    assert_eq!(a, b);
    let text = String::from_utf8_lossy(&a);
    assert!(text.contains("\"seed\": 77"));
}

#[test]
fn noise_cache_env_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("cache");
    let cfg_path = write_config(dir.path(), "case1.toml", CASE1_VARIANCE);
    let bin = env!("CARGO_BIN_EXE_pamham");
    for out in ["a", "b"] {
        let run = Command::new(bin)
            .env("PAMHAM_CACHE_DIR", &cache)
            .args(["run", "--config"])
            .arg(&cfg_path)
            .args(["--out"])
            .arg(dir.path().join(out))
            .output()
            .unwrap();
        assert!(run.status.success());
    }
    // Factor dump exists and the cached rerun matches the uncached one.
    assert!(cache.read_dir().unwrap().next().is_some(), "cache dir empty");
    let a = std::fs::read(dir.path().join("a/variance.csv")).unwrap();
    let b = std::fs::read(dir.path().join("b/variance.csv")).unwrap();
    assert_eq!(a, b);
}
