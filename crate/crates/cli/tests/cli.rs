use std::path::Path;
use std::process::{Command, Output};

use rta_core::eval::Report;

fn rta(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rta"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_owned()
}

const TWO_STATE: &str = r#"{
  "states": ["a", "b", "bad"],
  "initial": "a",
  "actions": ["S", "U"],
  "transitions": [["a", "S", "a"], ["a", "U", "b"], ["b", "S", "a"], ["b", "U", "bad"],
                  ["bad", "S", "bad"], ["bad", "U", "bad"]],
  "unsafe": ["bad"],
  "reward": [["a", "U", 1.0], ["b", "U", 1.0]],
  "gamma": 0.5
}"#;

#[test]
fn demo_left_shows_the_unsafe_lookahead_run() {
    let o = rta(&["demo", "--fixture", "fig2-left"]);
    assert_eq!(code(&o), 0);
    let out = stdout(&o);
    assert!(out.contains("q0,U,q1,S,qB"), "{out}");
    assert!(out.contains("recoverable-set lookahead run: q0,S,q0"), "{out}");
}

#[test]
fn demo_right_and_goal_run() {
    let o = rta(&["demo", "--fixture", "fig2-right"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("largest recoverable set: {q0}"));
    let o = rta(&["demo", "--fixture", "sec6-goal"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("goal-reaching stationary"));
}

#[test]
fn synthesize_writes_a_certified_policy() {
    let dir = tempfile::tempdir().unwrap();
    let plant = write(dir.path(), "plant.json", TWO_STATE);
    let out = dir.path().join("policy.json");
    let o = rta(&["synthesize", "--plant", &plant, "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["verdict"], "SafeExists");
    assert_eq!(v["policy"]["a"], "U");
    assert_eq!(v["policy"]["b"], "S");
    // a -U-> b -S-> a ...: 1 + 0.5^2 + 0.5^4 + ... = 4/3
    assert!((v["value"].as_f64().unwrap() - 4.0 / 3.0).abs() < 1e-12);
}

#[test]
fn recoverable_prints_the_set() {
    let dir = tempfile::tempdir().unwrap();
    let plant = write(dir.path(), "plant.json", TWO_STATE);
    let o = rta(&["recoverable", "--plant", &plant]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("recoverable set: {a, b}"), "{}", stdout(&o));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("r.json");
    let report = report.to_str().unwrap();
    let missing = rta(&["recoverable", "--plant", "/nonexistent/plant.json"]);
    assert_eq!(code(&missing), 2);
    let bad = write(dir.path(), "bad.json", r#"{"scenario":"acc","gains":{"c":20}}"#);
    let o = rta(&["evaluate", "--config", &bad, "--rta", "sim", "--episodes", "1", "--seed", "1", "--report", report]);
    assert_eq!(code(&o), 2);
    let o = rta(&["evaluate", "--config", "acc-var1", "--rta", "qtable", "--episodes", "1", "--seed", "1", "--report", report]);
    assert_eq!(code(&o), 3);
    let negative = write(dir.path(), "neg.json", &TWO_STATE.replace("1.0]]", "-1.0]]"));
    let o = rta(&["synthesize", "--plant", &negative, "--out", report]);
    assert_eq!(code(&o), 3);
    let o = rta(&["evaluate", "--config", "acc-var1", "--rta", "bogus", "--episodes", "1", "--seed", "1", "--report", report]);
    assert_eq!(code(&o), 2);
}

#[test]
fn train_then_evaluate_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("table.json");
    let report = dir.path().join("report.json");
    let export = dir.path().join("runs");
    let o = rta(&["train", "--config", "acc-var1", "--episodes", "300", "--seed", "3", "--out", table.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let o = rta(&[
        "evaluate", "--config", "acc-var1", "--rta", "qtable", "--table", table.to_str().unwrap(),
        "--episodes", "4", "--seed", "9", "--report", report.to_str().unwrap(),
        "--export-dir", export.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = Report::from_json(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(r.episodes.len(), 4);
    assert!(r.is_consistent());
    assert_eq!(std::fs::read_dir(&export).unwrap().count(), 4);
}
