use serde_json::Value;
use std::path::Path;
use std::process::{Command, Output};
use std::time::Instant;

const BIN: &str = env!("CARGO_BIN_EXE_antiwindup");

fn cli(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn metrics(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("metrics.json")).unwrap()).unwrap()
}

fn budget(id: &str) -> f64 {
    let text = antiwindup_cli::scenario::bundled(id).unwrap();
    let v: Value = serde_json::from_str(text).unwrap();
    v["time_budget_s"].as_f64().unwrap()
}

/// Runs a bundled scenario, checking success and its time budget.
fn run_bundled(id: &str, dir: &Path) -> Value {
    let t0 = Instant::now();
    let out = cli(&["run", id, "--out", dir.to_str().unwrap()]);
    let elapsed = t0.elapsed().as_secs_f64();
    assert!(out.status.success(), "{id}: {}", String::from_utf8_lossy(&out.stderr));
    assert!(elapsed <= budget(id), "{id} took {elapsed:.1} s");
    metrics(dir)
}

fn energy(m: &Value, run: &str) -> f64 {
    m[run]["saturation_error_energy"].as_f64().unwrap()
}

#[test]
fn list_scenarios_names_every_bundled_scenario() {
    let out = cli(&["list-scenarios"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for (id, _) in antiwindup_cli::scenario::BUNDLED {
        assert!(text.lines().any(|l| l.starts_with(id)), "{id} missing");
    }
}

#[test]
fn example1a_writes_artifacts_and_reduces_saturation_error() {
    let tmp = tempfile::tempdir().unwrap();
    let m = run_bundled("example1a", tmp.path());
    for f in [
        "design.json",
        "trace_nominal.csv",
        "trace_compensated.csv",
        "metrics.json",
        "state_error_1.svg",
        "input_1.svg",
        "output_2.svg",
    ] {
        assert!(tmp.path().join(f).exists(), "{f}");
    }
    assert!(energy(&m, "compensated") < energy(&m, "nominal"));
    let csv = std::fs::read_to_string(tmp.path().join("trace_compensated.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 10_001);
    assert!(csv.starts_with("t,"));
}

#[test]
fn same_seed_gives_identical_metrics() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let out = cli(&["run", "example1a_const", "--out", d.path().to_str().unwrap(), "--seed", "7"]);
        assert!(out.status.success());
    }
    let read = |d: &tempfile::TempDir| std::fs::read(d.path().join("metrics.json")).unwrap();
    assert_eq!(read(&a), read(&b));
    assert_eq!(metrics(a.path())["seed"], 7);
}

#[test]
fn fixed_structure_keeps_the_input_near_its_bound() {
    let tmp = tempfile::tempdir().unwrap();
    let m = run_bundled("example1d_fixed", tmp.path());
    let peak = m["compensated"]["peak_abs_input"].as_f64().unwrap();
    assert!(peak <= 3.0 * 1.05, "{peak}");
    assert!(energy(&m, "compensated") < energy(&m, "nominal"));
}

#[test]
fn compare_reports_deltas() {
    let nom = tempfile::tempdir().unwrap();
    let st = tempfile::tempdir().unwrap();
    run_bundled("nominal", nom.path());
    run_bundled("static_lmi", st.path());
    let (a, b) = (nom.path().join("metrics.json"), st.path().join("metrics.json"));
    let (a, b) = (a.to_str().unwrap(), b.to_str().unwrap());

    let out = cli(&["compare", a, a, "--json"]);
    assert!(out.status.success());
    let rows: Vec<Value> = serde_json::from_slice(&out.stdout).unwrap();
    assert!(!rows.is_empty());
    assert!(rows.iter().all(|r| r["delta"].is_null() || r["delta"] == 0.0));

    let out = cli(&["compare", a, b, "--json"]);
    assert!(out.status.success());
    let rows: Vec<Value> = serde_json::from_slice(&out.stdout).unwrap();
    let row = rows
        .iter()
        .find(|r| r["metric"] == "compensated.saturation_error_energy")
        .unwrap();
    assert!(row["delta"].as_f64().unwrap() < 0.0);

    let out = cli(&["compare", a, b]);
    assert!(String::from_utf8(out.stdout).unwrap().contains("saturation_error_energy"));
}

#[test]
fn compare_rejects_different_signal_sets() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a.json");
    let b = tmp.path().join("b.json");
    std::fs::write(&a, r#"{"schema_version": 1, "nominal": {"e": 1.0, "v": [1.0, 2.0]}}"#).unwrap();
    std::fs::write(&b, r#"{"schema_version": 1, "nominal": {"e": 1.0, "v": [1.0]}}"#).unwrap();
    let out = cli(&["compare", a.to_str().unwrap(), b.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("differ"));
}

#[test]
fn malformed_scenario_names_the_missing_field() {
    let tmp = tempfile::tempdir().unwrap();
    let file = tmp.path().join("bad.json");
    std::fs::write(
        &file,
        r#"{"schema_version": 1, "id": "bad", "method": {"kind": "none"}}"#,
    )
    .unwrap();
    let out_dir = tmp.path().join("out");
    let out = cli(&["run", file.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("missing field `plant`"), "{err}");
    let diag = std::fs::read_to_string(out_dir.join("error.txt")).unwrap();
    assert!(diag.contains("plant"));
}

#[test]
fn synthesis_failure_exits_nonzero_with_diagnostic() {
    let tmp = tempfile::tempdir().unwrap();
    let file = tmp.path().join("bad.json");
    // alpha must be positive
    std::fs::write(
        &file,
        r#"{"schema_version": 1, "id": "bad", "plant": {"kind": "state_space", "a": [[0, 1], [-1, 0]], "b": [[1], [0]]},
            "controller": {"kind": "pid", "kp": 1, "ki": 0, "kd": 0},
            "method": {"kind": "static-lmi", "alpha": -1, "beta": 1, "gamma_uc": 1},
            "saturation": {"state": {"lower": [null, null], "upper": [1, 1]}},
            "simulation": {"horizon": 1, "step": 0.01, "reference": [0, 1]}}"#,
    )
    .unwrap();
    let out_dir = tmp.path().join("out");
    let out = cli(&["run", file.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(out_dir.join("error.txt").exists());
    assert!(!out_dir.join("metrics.json").exists());
}

#[test]
fn converter_scenario_limits_the_fault_current() {
    let tmp = tempfile::tempdir().unwrap();
    let m = run_bundled("vsc", tmp.path());
    let c = &m["converter"];
    let peak = |r: &str| c[r]["peak_grid_current"].as_f64().unwrap();
    assert!(peak("compensated") < peak("nominal"));
    assert!(c["compensated"]["peak_applied_modulation"].as_f64().unwrap() <= 1.0);
    assert!(c["compensated"]["recovery_time"].as_f64().unwrap() <= 0.1);
}

#[test]
fn remaining_bundled_scenarios_run_within_budget() {
    for id in ["dynamic_lmi", "full_matrix"] {
        let tmp = tempfile::tempdir().unwrap();
        let m = run_bundled(id, tmp.path());
        assert!(energy(&m, "compensated") < energy(&m, "nominal"), "{id}");
    }
}
