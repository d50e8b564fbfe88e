//! End-to-end checks of the `mrnav` binary: exit codes, file outputs, and
//! stdout/stderr contracts.

use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn mrnav(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mrnav"))
        .args(args)
        .output()
        .expect("spawn mrnav")
}

fn temp_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("mrnav-cli-{name}"));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn scenario(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name)
        .to_str()
        .unwrap()
        .to_string()
}

/// One robot, no humans, empty map.
fn write_degenerate_scenario(dir: &PathBuf) -> String {
    let path = dir.join("degenerate.json");
    fs::write(
        &path,
        r#"{
  "world": { "origin": [0.0, 0.0], "size": [15.0, 15.0] },
  "robots": [
    { "start": [0.75, 0.75], "goal": [12.75, 0.75],
      "teb": { "half_width_x": 0.3, "half_width_y": 0.3 }, "priority": 1 }
  ],
  "p_th": 0.05,
  "prediction": { "horizon_s": 2.0, "dt": 0.25, "resolution": 0.25, "beta_grid": [0.05, 0.5, 5.0, 50.0] },
  "planner": { "resolution": 1.5, "collision_check_step_m": 0.1, "v_max_plan": 1.0 },
  "sim": { "dt": 0.05, "seed": 0, "max_duration_s": 60.0 }
}"#,
    )
    .unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn run_degenerate_scenario_exits_zero_with_outputs() {
    let dir = temp_dir("degenerate");
    let scenario = write_degenerate_scenario(&dir);
    let out = dir.join("out");
    let r = mrnav(&[
        "run",
        "--scenario",
        &scenario,
        "--seed",
        "1",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(
        r.status.code(),
        Some(0),
        "stderr: {}",
        String::from_utf8_lossy(&r.stderr)
    );
    assert!(out.join("metrics.json").exists());
    assert!(out.join("trace.jsonl").exists());
    let metrics = fs::read_to_string(out.join("metrics.json")).unwrap();
    assert!(metrics.contains("\"completed\":true"));
    // No humans: infinite-distance sentinel serializes as null.
    assert!(metrics.contains("\"min_robot_human_distance\":null"));
}

#[test]
fn run_rejects_out_of_range_pth_naming_the_field() {
    let dir = temp_dir("badpth");
    let scenario = write_degenerate_scenario(&dir);
    let out = dir.join("out");
    let r = mrnav(&[
        "run",
        "--scenario",
        &scenario,
        "--seed",
        "1",
        "--out",
        out.to_str().unwrap(),
        "--pth",
        "1.5",
    ]);
    assert_eq!(r.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&r.stderr);
    assert!(stderr.contains("p_th"), "stderr was: {stderr}");
}

#[test]
fn run_times_out_with_exit_two() {
    let dir = temp_dir("timeout");
    let path = dir.join("slow.json");
    let text = fs::read_to_string(write_degenerate_scenario(&dir)).unwrap();
    fs::write(
        &path,
        text.replace("\"max_duration_s\": 60.0", "\"max_duration_s\": 1.0"),
    )
    .unwrap();
    let out = dir.join("out");
    let r = mrnav(&[
        "run",
        "--scenario",
        path.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(r.status.code(), Some(2));
    // Metrics still written for the incomplete run.
    assert!(out.join("metrics.json").exists());
}

#[test]
fn oracle_eq2_eq3_prints_discrepancy_and_exits_zero() {
    let r = mrnav(&["oracle", "eq2-eq3", "--grid", "5", "--humans", "3"]);
    assert_eq!(
        r.status.code(),
        Some(0),
        "stderr: {}",
        String::from_utf8_lossy(&r.stderr)
    );
    let stdout = String::from_utf8_lossy(&r.stdout);
    assert!(
        stdout.contains("max absolute discrepancy"),
        "stdout: {stdout}"
    );
    let value: f64 = stdout.trim().rsplit(' ').next().unwrap().parse().unwrap();
    assert!(value <= 1e-12);
}

#[test]
fn unknown_flags_print_usage_and_exit_one() {
    let r = mrnav(&["run", "--scenario", "x.json", "--out", "y", "--frobnicate"]);
    assert_eq!(r.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&r.stderr);
    assert!(stderr.to_lowercase().contains("usage"), "stderr: {stderr}");
}

#[test]
fn help_exits_zero() {
    let r = mrnav(&["--help"]);
    assert_eq!(r.status.code(), Some(0));
}

#[test]
fn validate_teb_reports_both_policies() {
    let dir = temp_dir("teb");
    let path = dir.join("params.json");
    fs::write(
        &path,
        r#"{ "teb": { "half_width_x": 0.3, "half_width_y": 0.3 }, "v_ref": 1.0, "steps": 10000, "seed": 7 }"#,
    )
    .unwrap();
    let r = mrnav(&["validate-teb", "--params", path.to_str().unwrap()]);
    assert_eq!(
        r.status.code(),
        Some(0),
        "stderr: {}",
        String::from_utf8_lossy(&r.stderr)
    );
    let stdout = String::from_utf8_lossy(&r.stdout);
    assert!(stdout.contains("\"contained\":true"), "stdout: {stdout}");
    assert!(stdout.contains("\"greedy\"") && stdout.contains("\"random\""));

    // A clearly undersized bound is a finding, not an error: still exit 0.
    fs::write(
        &path,
        r#"{ "teb": { "half_width_x": 0.05, "half_width_y": 0.05 }, "v_ref": 1.0, "steps": 10000, "seed": 7 }"#,
    )
    .unwrap();
    let r = mrnav(&["validate-teb", "--params", path.to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&r.stdout).contains("\"contained\":false"));
}

#[test]
fn plan_bench_reports_timing_stats() {
    let r = mrnav(&["plan-bench", "--scenario", &scenario("crossing.json")]);
    assert_eq!(
        r.status.code(),
        Some(0),
        "stderr: {}",
        String::from_utf8_lossy(&r.stderr)
    );
    let stdout = String::from_utf8_lossy(&r.stdout);
    assert!(stdout.contains("\"plan_time_stats\""));
    assert!(stdout.contains("\"median_s\""));
}
