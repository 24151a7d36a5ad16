#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use common::tail_oracle::{nominal_optimum, plan_cost};
use common::{fixture_dir, t1};
use reparo_core::tail::TailPlan;
use serde_json::{json, Value};

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

fn reparo(args: &[&str]) -> Run {
    let out = Command::new(env!("CARGO_BIN_EXE_reparo")).args(args).output().unwrap();
    Run {
        code: out.status.code().unwrap(),
        stdout: String::from_utf8(out.stdout).unwrap(),
        stderr: String::from_utf8(out.stderr).unwrap(),
    }
}

fn fx(name: &str) -> String {
    fixture_dir().join(name).to_str().unwrap().to_string()
}

fn write(dir: &Path, name: &str, v: &Value) -> String {
    let p: PathBuf = dir.join(name);
    fs::write(&p, v.to_string()).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn plan_on_t1_matches_the_enumerated_optimum() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("plan.json");
    let r = reparo(&["plan", "--domain", "tail", "--instance", &fx("t1.json"), "--out", out.to_str().unwrap()]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let doc: Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    let plan: TailPlan = serde_json::from_value(doc["plan"].clone()).unwrap();
    let (_, best) = nominal_optimum(&t1()).unwrap();
    assert_eq!(doc["objective"].as_f64().unwrap(), best);
    assert_eq!(plan_cost(&t1(), &plan), Some(best));
}

#[test]
fn malformed_input_exits_3_with_a_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{ \"flights\": [ ").unwrap();
    let r = reparo(&["validate", "--instance", bad.to_str().unwrap()]);
    assert_eq!(r.code, 3);
    assert!(r.stderr.contains("error"), "{}", r.stderr);
    assert!(r.stdout.is_empty());

    assert_eq!(reparo(&["validate", "--instance", "/no/such/file.json"]).code, 3);
    assert_eq!(reparo(&["plan", "--bogus-flag"]).code, 3);
    assert_eq!(reparo(&["--help"]).code, 0);
}

#[test]
fn validate_reports_plan_violations() {
    let ok = reparo(&["validate", "--instance", &fx("t1.json"), "--plan", &fx("t1_plan.json")]);
    assert_eq!(ok.code, 0);
    assert_eq!(serde_json::from_str::<Value>(&ok.stdout).unwrap()["valid"], true);

    let dir = tempfile::tempdir().unwrap();
    let broken = write(dir.path(), "p.json", &json!({ "routes": { "ac1": ["f1", "f3"], "ac2": ["f2", "f4"] } }));
    let r = reparo(&["validate", "--instance", &fx("t1.json"), "--plan", &broken]);
    assert_eq!(r.code, 2);
    let doc: Value = serde_json::from_str(&r.stdout).unwrap();
    assert_eq!(doc["valid"], false);
    assert!(!doc["violations"].as_array().unwrap().is_empty());
}

#[test]
fn repeated_seeded_repairs_write_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let r = reparo(&[
            "repair", "--instance", &fx("t1.json"), "--incumbent", &fx("t1_plan.json"),
            "--scenario", &fx("t1_delay.json"), "--spec", &fx("spec_default.json"),
            "--method", "vns", "--seed", "17", "--out", out.to_str().unwrap(),
        ]);
        assert_eq!(r.code, 0, "{}", r.stderr);
        fs::read(out).unwrap()
    };
    let (a, b) = (run("a.json"), run("b.json"));
    assert_eq!(a, b);
    let doc: Value = serde_json::from_slice(&a).unwrap();
    assert!((doc["result"]["kpis"]["repair_objective"].as_f64().unwrap() - 10052.0).abs() < 1e-6, "{doc}");
}

#[test]
fn repair_accepts_plan_output_as_incumbent() {
    let dir = tempfile::tempdir().unwrap();
    let plan = dir.path().join("plan.json");
    assert_eq!(reparo(&["plan", "--instance", &fx("t1.json"), "--out", plan.to_str().unwrap()]).code, 0);
    let log = dir.path().join("log.jsonl");
    let r = reparo(&[
        "repair", "--instance", &fx("t1.json"), "--incumbent", plan.to_str().unwrap(),
        "--scenario", &fx("t1_cancel.json"), "--method", "vns", "--trajectory-log", log.to_str().unwrap(),
    ]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let doc: Value = serde_json::from_str(&r.stdout).unwrap();
    assert_eq!(doc["scenario"], "cancel-f3");
    let lines = fs::read_to_string(log).unwrap();
    assert_eq!(lines.lines().count(), doc["result"]["trajectory"].as_array().unwrap().len());
}

#[test]
fn infeasible_instance_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    // Nobody can reach C, so f9 cannot be covered.
    let mut tt: Value = serde_json::from_str(&fs::read_to_string(fx("t1.json")).unwrap()).unwrap();
    tt["flights"].as_array_mut().unwrap().push(json!({ "id": "f9", "origin": "C", "destination": "A", "dep": 900, "arr": 960 }));
    let inst = write(dir.path(), "inf.json", &tt);
    let r = reparo(&["plan", "--instance", &inst]);
    assert_eq!(r.code, 2, "{}", r.stderr);
    assert_eq!(serde_json::from_str::<Value>(&r.stdout).unwrap()["status"], "Infeasible");
}

#[test]
fn node_limit_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    // Whole units only and a hard order for 15.5: the root relaxation is
    // fractional, so one node finds no incumbent.
    let mut p: Value = serde_json::from_str(&fs::read_to_string(fx("p1.json")).unwrap()).unwrap();
    p["integral_production"] = json!(true);
    p["orders"][0]["quantity"] = json!(15.5);
    let inst = write(dir.path(), "p.json", &p);
    let r = reparo(&["plan", "--instance", &inst, "--node-limit", "1"]);
    assert_eq!(r.code, 4, "{}{}", r.stdout, r.stderr);
    // Unlimited: make 6 then 10 and hold the spare half unit, 16 + 0.5 * 6.5.
    let full = reparo(&["plan", "--instance", &inst]);
    assert_eq!(full.code, 0, "{}", full.stderr);
    assert!((serde_json::from_str::<Value>(&full.stdout).unwrap()["objective"].as_f64().unwrap() - 19.25).abs() < 1e-6);
}

#[test]
fn evaluate_and_robust_on_t1() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("r.csv");
    let r = reparo(&[
        "evaluate", "--instance", &fx("t1.json"), "--plan", &fx("t1_plan.json"),
        "--scenarios", &fx("t1_scenarios.json"), "--csv", "--out", csv.to_str().unwrap(),
    ]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let text = fs::read_to_string(csv).unwrap();
    assert_eq!(text.lines().next().unwrap(), "scenario,weight,status,repair_objective,recovery_price");
    assert_eq!(text.lines().count(), 3);

    for mode in ["simultaneous", "separate"] {
        let r = reparo(&["robust", "--instance", &fx("t1.json"), "--scenarios", &fx("t1_scenarios.json"), "--alpha", "0.5", "--mode", mode]);
        assert_eq!(r.code, 0, "{}", r.stderr);
        let doc: Value = serde_json::from_str(&r.stdout).unwrap();
        assert_eq!(doc["mode"], mode);
        assert!(doc["total"].as_f64().unwrap() >= 75.0);
    }
    let bad = reparo(&["robust", "--instance", &fx("t1.json"), "--scenarios", &fx("t1_scenarios.json"), "--alpha", "-1"]);
    assert_eq!(bad.code, 3);
}
