use std::path::Path;
use std::process::{Command, Output};

fn apsipic(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_apsipic"))
        .args(args)
        .output()
        .expect("binary runs")
}

/// The JSON object printed on the last stderr line of a failed run.
fn error_json(out: &Output) -> serde_json::Value {
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    serde_json::from_str(stderr.lines().last().unwrap_or_default()).expect("error line is JSON")
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("config.json");
    std::fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

const SMALL_BENCHMARK: &str = r#"{
  "experiment": "benchmark",
  "study": "single-path",
  "scheme": "APSI1",
  "eps_list": [0.5, 0.25, 0.125],
  "dt": 0.1,
  "t_final": 1.0,
  "sigma": 1.0,
  "tau": 1.0,
  "gc_model": "R0-euler"
}"#;

#[test]
fn presets_are_listed() {
    let out = apsipic(&["presets"]);
    assert!(out.status.success());
    let names = String::from_utf8(out.stdout).unwrap();
    for name in ["fig1a", "fig2c", "fig4b", "fig5b", "dio-eps4", "dio-collisional"] {
        assert!(names.lines().any(|l| l == name), "{name} missing");
    }
}

#[test]
fn benchmark_preset_writes_tables() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("run");
    let out = apsipic(&["benchmark", "--preset", "fig1c", "--out", out_dir.to_str().unwrap(), "--threads", "1"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let errors = std::fs::read_to_string(out_dir.join("errors.csv")).unwrap();
    assert_eq!(errors.lines().next().unwrap(), "eps,dt,error1,error2,std_err1,std_err2,n_paths,m_xi");
    assert_eq!(errors.lines().count(), 11);
    assert!(out_dir.join("slopes.csv").exists());
}

#[test]
fn seed_override_changes_the_paths() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL_BENCHMARK);
    let run = |seed: &str, name: &str| {
        let o = dir.path().join(name);
        let out = apsipic(&["benchmark", "--config", &cfg, "--out", o.to_str().unwrap(), "--seed", seed]);
        assert!(out.status.success());
        std::fs::read(o.join("errors.csv")).unwrap()
    };
    assert_eq!(run("5", "a"), run("5", "b"));
    assert_ne!(run("5", "a"), run("6", "c"));
}

#[test]
fn negative_tau_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &SMALL_BENCHMARK.replace("\"tau\": 1.0", "\"tau\": -1.0"));
    let out = apsipic(&["benchmark", "--config", &cfg, "--out", dir.path().join("o").to_str().unwrap()]);
    let err = error_json(&out);
    assert_eq!(err["error"], "config");
    assert!(err["message"].as_str().unwrap().contains("tau"));
}

#[test]
fn malformed_json_reports_position() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "{\n  \"experiment\": \"benchmark\",\n  oops\n}");
    let out = apsipic(&["benchmark", "--config", &cfg, "--out", dir.path().join("o").to_str().unwrap()]);
    let err = error_json(&out);
    assert_eq!(err["error"], "parse");
    assert!(err["message"].as_str().unwrap().contains("line 3"));
}

#[test]
fn wrong_experiment_kind_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = apsipic(&["diocotron", "--preset", "fig1a", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(error_json(&out)["error"], "config");
    let out = apsipic(&["benchmark", "--preset", "no-such-preset", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(error_json(&out)["error"], "config");
}

#[test]
fn zero_threads_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = apsipic(&["benchmark", "--preset", "fig1a", "--out", dir.path().to_str().unwrap(), "--threads", "0"]);
    assert_eq!(error_json(&out)["error"], "config");
}

#[test]
fn missing_source_is_a_usage_error() {
    let out = apsipic(&["benchmark", "--out", "x"]);
    assert!(!out.status.success());
}

#[test]
fn small_diocotron_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{
  "experiment": "diocotron",
  "n_particles": 5000,
  "nx": 33,
  "ny": 33,
  "eps": 0.01,
  "sigma": 1.0,
  "tau": 1.0,
  "dt": 0.05,
  "t_final": 0.5,
  "snapshot_times": [0.0, 0.5],
  "seed": 1
}"#,
    );
    let o = dir.path().join("run");
    let out = apsipic(&["diocotron", "--config", &cfg, "--out", o.to_str().unwrap(), "--particles", "3000"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let series = std::fs::read_to_string(o.join("timeseries.csv")).unwrap();
    assert_eq!(series.lines().count(), 12);
    for f in ["rho_000.bin", "rho_000.json", "rho_001.bin", "manifest.json"] {
        assert!(o.join(f).exists(), "{f}");
    }
    let bytes = std::fs::metadata(o.join("rho_001.bin")).unwrap().len();
    assert_eq!(bytes, 33 * 33 * 8);
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(o.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["n_particles"], 3000);
}
