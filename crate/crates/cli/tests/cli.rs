use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_segment-bethe"));
    cmd.env_remove("SEGMENT_BETHE_PRECISION");
    cmd
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn strip_wall_times(mut v: Value) -> Value {
    for c in v["checks"].as_array_mut().unwrap() {
        c.as_object_mut().unwrap().remove("wall_time_ms");
    }
    v
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn spectrum_single_site_has_two_branches() {
    let out = run(&["spectrum", "--sites", "1"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r = json(&out);
    assert_eq!(r["passed"], true);
    assert_eq!(r["schema_version"], 1);
    let rows = r["spectra"][0]["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|row| row["agreement"].as_f64().unwrap() <= 1e-8));
}

#[test]
fn full_pipeline_passes() {
    let out = run(&["all", "--sites", "2", "--seed", "7"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r = json(&out);
    let checks = r["checks"].as_array().unwrap();
    assert!(checks.iter().all(|c| c["pass"] == true && c["anchor"].as_str().is_some_and(|a| !a.is_empty())));
    for suite in ["check-algebra", "exchange", "spectrum", "solve-bethe", "offshell", "slavnov", "norm", "n1"] {
        assert!(checks.iter().any(|c| c["suite"] == suite), "{suite} missing");
    }
}

#[test]
fn slavnov_twenty_draws() {
    let out = run(&["slavnov", "--sites", "3", "--seed", "1", "--draws", "20"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r = json(&out);
    let bra: Vec<&Value> = r["checks"].as_array().unwrap().iter().filter(|c| c["name"] == "slavnov_bra").collect();
    assert_eq!(bra.len(), 20);
    assert!(bra.iter().all(|c| c["residual"].as_f64().unwrap() <= 1e-8));
}

#[test]
fn reports_are_deterministic() {
    let a = strip_wall_times(json(&run(&["offshell", "--sites", "2", "--seed", "5", "--draws", "3"])));
    let b = strip_wall_times(json(&run(&["offshell", "--sites", "2", "--seed", "5", "--draws", "3"])));
    assert_eq!(a, b);
    let c = strip_wall_times(json(&run(&["offshell", "--sites", "2", "--seed", "6", "--draws", "3"])));
    assert_ne!(a, c);
}

#[test]
fn flags_override_config_and_precision_order() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "run.toml",
        "sites = 3\nseed = 9\nprecision = \"double\"\n[boundary]\np = [2.1, 0.2]\nq = [1.4, -0.3]\nxi_plus = [0.7, 0.2]\nxi_minus = [-0.5, 0.4]\n",
    );
    let out = run(&["check-algebra", "--config", &cfg, "--sites", "1"]);
    let r = json(&out);
    assert_eq!(r["config"]["sites"], 1);
    assert_eq!(r["seed"], 9);
    assert_eq!(r["config"]["boundary"]["p"][0], 2.1);

    let env = bin()
        .args(["check-algebra", "--config", &cfg])
        .env("SEGMENT_BETHE_PRECISION", "extended")
        .output()
        .unwrap();
    assert_eq!(json(&env)["config"]["precision"], "double");

    let env_only = bin().args(["check-algebra"]).env("SEGMENT_BETHE_PRECISION", "extended").output().unwrap();
    assert_eq!(json(&env_only)["config"]["precision"], "extended");

    let flag = bin()
        .args(["check-algebra", "--config", &cfg, "--precision", "extended"])
        .output()
        .unwrap();
    assert_eq!(json(&flag)["config"]["precision"], "extended");
}

#[test]
fn solve_bethe_prints_csv_and_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.json");
    let out = run(&["solve-bethe", "--sites", "2", "--seed", "4", "--out", path.to_str().unwrap()]);
    assert!(out.status.success());
    let csv = String::from_utf8(out.stdout).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "draw,set,branch,index,re,im,scaled_residual,abs_residual");
    // Generic boundaries: four sets of two roots each.
    assert_eq!(lines.count(), 8);
    let report: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    assert_eq!(report["command"], "solve-bethe");
    assert_eq!(report["roots"].as_array().unwrap().len(), 8);
}

#[test]
fn failing_check_sets_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "strict.toml", "[tolerances]\nybe = 1e-300\n");
    let out = run(&["check-algebra", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json(&out)["passed"], false);
    assert!(String::from_utf8_lossy(&out.stderr).contains("ybe"));
}

#[test]
fn bad_input_sets_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.toml", "sites = 2\nthetas = [[0.1, 0.0], [0.1, 0.0]]\n");
    assert_eq!(run(&["norm", "--config", &cfg]).status.code(), Some(2));
    assert_eq!(run(&["norm", "--sites", "0"]).status.code(), Some(2));
    let env = bin().args(["norm"]).env("SEGMENT_BETHE_PRECISION", "quad").output().unwrap();
    assert_eq!(env.status.code(), Some(2));
    assert_ne!(run(&["unknown"]).status.code(), Some(0));
}

#[test]
fn direct_product_cap_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "cap.toml", "sites = 2\ndirect_max_sites = 1\n");
    let out = run(&["slavnov", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(1));
    let r = json(&out);
    let bra = r["checks"].as_array().unwrap().iter().find(|c| c["name"] == "slavnov_bra").unwrap();
    assert!(bra["error"].as_str().unwrap().contains("exceeds"));
    assert!(bra["residual"].is_null());
}
