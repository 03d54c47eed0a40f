//! End-to-end runs of the `hj` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use hj_core::{sup_diff, GridFunction};
use serde_json::Value;

fn hj(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hj"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("HJ_OUT_DIR")
        .output()
        .expect("failed to launch hj")
}

fn report(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("terminated by signal")
}

#[test]
fn c0_report_brackets_zero() {
    let dir = tempfile::tempdir().unwrap();
    let o = hj(&["c0", "--model", "e1", "--n", "128", "--iterations", "12", "--check"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let r = report(dir.path());
    assert_eq!(r["experiment"], "c0");
    let (lo, hi) = (r["c0_lo"].as_f64().unwrap(), r["c0_hi"].as_f64().unwrap());
    assert!(lo <= 0.0 && 0.0 <= hi + 1e-3, "[{lo}, {hi}]");
    assert_eq!(r["monotone"], true);
}

#[test]
fn flow_fixed_points_pass_check() {
    let dir = tempfile::tempdir().unwrap();
    let o = hj(&["flow", "--fixed-points", "--check"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let r = report(dir.path());
    let rows = r["fixed_points"].as_array().unwrap();
    assert_eq!(rows.len(), 4);
    for key in ["x", "u", "p", "eigen_re1", "eigen_im1", "eigen_re2", "eigen_im2", "class"] {
        assert!(rows[0].get(key).is_some(), "missing {key}");
    }
}

#[test]
fn flow_trajectory_is_written() {
    let dir = tempfile::tempdir().unwrap();
    let o = hj(&["flow", "--state", "1,-0.5,0.5", "--t-max", "2", "--check"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let csv = fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    assert!(csv.starts_with("t,x,u,p,H"));
}

#[test]
fn oracle_output_is_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [&a, &b] {
        assert_eq!(code(&hj(&["oracle", "--n", "256", "--emit-svg"], d.path())), 0);
    }
    for name in ["report.json", "oracle.csv", "oracle.svg"] {
        let x = fs::read(a.path().join(name)).unwrap();
        let y = fs::read(b.path().join(name)).unwrap();
        assert_eq!(x, y, "{name} differs between runs");
    }
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&hj(&["nonsense"], dir.path())), 1);
    assert_eq!(code(&hj(&["solve", "--n", "two"], dir.path())), 1);
    assert_eq!(code(&hj(&["solve", "--n", "2"], dir.path())), 1);
    assert_eq!(code(&hj(&["evolve", "--init", "sideways"], dir.path())), 1);
    let help = Command::new(env!("CARGO_BIN_EXE_hj")).arg("--help").output().unwrap();
    assert_eq!(code(&help), 0);
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "n = 64\niterations = 6\n[model]\nbuiltin = \"e1\"\nc = 0.0\n").unwrap();
    let out = dir.path().join("out");
    let o = hj(&["c0", "--config", cfg.to_str().unwrap(), "--n", "96"], &out);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(&out);
    assert_eq!(r["n"], 96);
    assert_eq!(r["iterations"], 6);
    assert_eq!(r["model"]["builtin"], "e1");
}

#[test]
fn env_var_sets_output_directory() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("from-env");
    let o = Command::new(env!("CARGO_BIN_EXE_hj"))
        .args(["flow", "--fixed-points"])
        .env("HJ_OUT_DIR", &target)
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    assert!(target.join("report.json").is_file());
}

#[test]
fn failed_assertion_exits_two() {
    // on a coarse grid the first-order error exceeds the oracle tolerance
    let dir = tempfile::tempdir().unwrap();
    let o = hj(&["solve", "--n", "256", "--check"], dir.path());
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stdout));
    let r = report(dir.path());
    assert_eq!(r["passed"], false);
    assert!(r["oracle_distance"].as_f64().unwrap() > 5e-2);
}

#[test]
fn below_critical_value_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let o = hj(&["solve", "--model", "e1", "--c", "-1", "--n", "64"], dir.path());
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn svg_and_csv_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let o = hj(&["solve", "--model", "e1", "--n", "64", "--emit-svg"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let svg = fs::read_to_string(dir.path().join("solution.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains("polyline"));
    let r = report(dir.path());
    let name = r["u_max_csv"].as_str().unwrap();
    let text = fs::read_to_string(dir.path().join(name)).unwrap();
    let u = GridFunction::from_csv(text.as_bytes(), std::f64::consts::TAU).unwrap();
    assert_eq!(u.len(), 64);
    let again = GridFunction::from_csv(u.to_csv().as_bytes(), std::f64::consts::TAU).unwrap();
    assert!(sup_diff(&u, &again).unwrap() <= 1e-11);
    assert!((u.values()[0] - r["u_max_at_0"].as_f64().unwrap()).abs() <= 1e-11);
}

#[test]
fn evolve_from_zero_converges() {
    let dir = tempfile::tempdir().unwrap();
    let o = hj(&["evolve", "--n", "64", "--init", "0"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(dir.path());
    assert_eq!(r["status"], "converged");
    assert!(dir.path().join("final.csv").is_file());
}
