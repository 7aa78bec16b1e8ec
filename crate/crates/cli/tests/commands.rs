use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use curriculum_lab_cli::commands::{RaceSummary, SweepRow};
use curriculum_lab_cli::suite::{CheckStatus, SuiteReport};
use serde_json::Value;
use tempfile::TempDir;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_curriculum-lab"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn with_config(text: &str) -> TempDir {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("lab.toml"), text).unwrap();
    dir
}

fn sweep_csv(dir: &Path) -> Vec<SweepRow> {
    csv::Reader::from_path(dir.join("out/sweep.csv")).unwrap().deserialize().map(|r| r.unwrap()).collect()
}

const HINGE_RIGHT_ANGLE: &str = "n = 20000
[problem]
kind = \"hinge_classification\"
eta = 0.001
norm = 1.0
[geometry]
theta = 1.5707963267948966
[grid]
psi = [0.3, 0.8]
upsilon = [0.2, 0.4, 0.6]
";

const SMALL_RACE: &str = "[race]
seeds = 30
steps = 1000
pool_size = 1000
";

#[test]
fn malformed_config_is_a_usage_error() {
    for text in ["seed = \"one\"", "[grid]\npsi = [-1.0]", "mystery = 3", "[problem\n"] {
        let dir = with_config(text);
        for cmd in ["verify", "sweep", "race", "counterexample"] {
            let o = run(dir.path(), &[cmd, "--config", "lab.toml"]);
            assert_eq!(code(&o), 2, "{cmd} with {text:?}");
            assert!(!o.stderr.is_empty());
        }
    }
    let dir = TempDir::new().unwrap();
    assert_eq!(code(&run(dir.path(), &["sweep", "--config", "missing.toml"])), 2);
    assert_eq!(code(&run(dir.path(), &["sweep", "--format", "xml"])), 2);
    assert_eq!(code(&run(dir.path(), &["sweep", "--jobs", "0"])), 2);
}

#[test]
fn one_point_grid_gives_one_row() {
    let dir = with_config("n = 5000\n[grid]\npsi = [0.75]\n");
    let o = run(dir.path(), &["sweep", "--config", "lab.toml"]);
    assert_eq!(code(&o), 0);
    let text = fs::read_to_string(dir.path().join("out/sweep.csv")).unwrap();
    let lines: Vec<&str> = text.split('\n').collect();
    assert_eq!(lines.len(), 3, "header, one row, trailing newline");
    assert_eq!(lines[0], "problem,psi,upsilon,lambda_or_theta,eta,n,delta_mc,delta_se,delta_closed,method");
    assert!(!text.contains('\r'));
    let rows = sweep_csv(dir.path());
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].psi, 0.75);
    assert_eq!(rows[0].upsilon, None);
}

#[test]
fn regression_sweep_closed_column_is_recomputable() {
    // With a single atom the moments are exact and Monte Carlo has no spread,
    // so both columns must agree to rounding.
    let dir = with_config(
        "n = 100\n[distribution]\nkind = \"point_mass\"\natoms = [{ features = [2.0, 1.0], weight = 1.0 }]\n\
         [geometry]\nlambda = 1.0\n[grid]\npsi = [0.0, 0.5, 1.0]\n",
    );
    let o = run(dir.path(), &["sweep", "--config", "lab.toml"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for row in sweep_csv(dir.path()) {
        assert!((row.delta_mc - row.delta_closed).abs() < 1e-12, "{row:?}");
        assert_eq!(row.delta_se, 0.0);
    }
}

#[test]
fn hinge_local_column_is_flat_at_right_angle() {
    let dir = with_config(HINGE_RIGHT_ANGLE);
    assert_eq!(code(&run(dir.path(), &["sweep", "--config", "lab.toml"])), 0);
    let rows = sweep_csv(dir.path());
    assert_eq!(rows.len(), 2 + 2 * 3);
    for psi in [0.3, 0.8] {
        let local: Vec<f64> =
            rows.iter().filter(|r| r.psi == psi && r.upsilon.is_some()).map(|r| r.delta_closed).collect();
        assert_eq!(local.len(), 3);
        assert!(local.iter().all(|v| *v == local[0]), "{local:?}");
    }
}

#[test]
fn sweep_as_json_carries_provenance() {
    let dir = with_config("n = 2000\n[grid]\npsi = [0.0, 1.0]\n");
    assert_eq!(code(&run(dir.path(), &["sweep", "--config", "lab.toml", "--format", "json", "--seed", "7"])), 0);
    let v: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("out/sweep.json")).unwrap()).unwrap();
    assert_eq!(v["seed"], 7);
    assert_eq!(v["config_hash"].as_str().unwrap().len(), 64);
    assert_eq!(v["rows"].as_array().unwrap().len(), 2);
}

#[test]
fn hinge_counterexample_guard() {
    let dir = with_config(
        "[problem]\nkind = \"hinge_classification\"\neta = 0.001\nnorm = 1.0\n\
         [counterexample]\nmode = \"hinge_low_psi\"\npsi1 = 0.1\npsi2 = 0.6\n",
    );
    let o = run(dir.path(), &["counterexample", "--config", "lab.toml"]);
    assert_eq!(code(&o), 2);
    assert!(!dir.path().join("out/counterexample.json").exists());
}

#[test]
fn default_counterexample_holds_and_round_trips() {
    let dir = TempDir::new().unwrap();
    let o = run(dir.path(), &["counterexample"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(dir.path().join("out/counterexample.json")).unwrap();
    let out: curriculum_lab_cli::commands::CounterexampleOutput = serde_json::from_str(&text).unwrap();
    assert!(out.report.verdict);
    let v: Value = serde_json::from_str(&text).unwrap();
    let delta = v["construction"]["delta"].as_f64().unwrap();
    assert!(delta > 0.0 && delta <= 1.0);
    assert_eq!(serde_json::to_string_pretty(&out).unwrap() + "\n", text);
}

#[test]
fn identical_invocations_write_identical_bytes() {
    let dir = with_config(SMALL_RACE);
    for (cmd, files) in [
        ("race", &["trajectories.csv", "race_summary.json"][..]),
        ("sweep", &["sweep.csv"][..]),
        ("counterexample", &["counterexample.json"][..]),
    ] {
        let a = run(dir.path(), &[cmd, "--config", "lab.toml", "--out", "a", "--jobs", "1"]);
        let b = run(dir.path(), &[cmd, "--config", "lab.toml", "--out", "b", "--jobs", "3"]);
        assert_eq!((code(&a), code(&b)), (0, 0), "{cmd}");
        for f in files {
            let x = fs::read(dir.path().join("a").join(f)).unwrap();
            let y = fs::read(dir.path().join("b").join(f)).unwrap();
            assert!(x == y, "{cmd}: {f} differs");
        }
    }
}

#[test]
fn race_reports_early_advantage() {
    let dir = with_config(SMALL_RACE);
    assert_eq!(code(&run(dir.path(), &["race", "--config", "lab.toml"])), 0);
    let s: RaceSummary =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/race_summary.json")).unwrap()).unwrap();
    assert_eq!(s.early_step, 100);
    assert_eq!(s.comparisons.len(), 1);
    assert!(s.comparisons[0].early_advantage, "{:?}", s.comparisons[0]);
    let rows = fs::read_to_string(dir.path().join("out/trajectories.csv")).unwrap();
    assert_eq!(rows.lines().count(), 1 + 30 * 2 * 11);
}

#[test]
fn single_policy_race_has_no_comparisons() {
    let dir = with_config(&format!("{SMALL_RACE}policies = [\"uniform\"]\n"));
    assert_eq!(code(&run(dir.path(), &["race", "--config", "lab.toml"])), 0);
    let v: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/race_summary.json")).unwrap()).unwrap();
    assert!(v.get("comparisons").is_none());
    assert!(dir.path().join("out/trajectories.csv").exists());
}

#[test]
fn step_size_above_bound_is_an_expected_violation() {
    let dir = with_config(
        "[problem]\nkind = \"regression\"\neta = 1.0\n\
         [verify]\nn = 4000\nslope_n = 20000\nnabla_tuples = 200\nrace_pool = 200\nrace_steps = 200\nrace_seeds = 12\n",
    );
    let o = run(dir.path(), &["verify", "--config", "lab.toml"]);
    let report: SuiteReport =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/verify.json")).unwrap()).unwrap();
    let clause = report.checks.iter().find(|c| c.id == "configured_lambda_clause").unwrap();
    assert_eq!(clause.status, CheckStatus::ExpectedViolation, "{}", clause.detail);
    let numbered_ok = report.checks.iter().filter(|c| c.criterion.is_some()).all(|c| c.status.is_ok());
    assert_eq!(report.passed, numbered_ok);
    assert_eq!(code(&o), if report.passed { 0 } else { 1 });
    assert_eq!(report.checks.iter().filter(|c| c.criterion.is_some()).count(), 12);
}
