use std::path::Path;
use std::process::{Command, Output};

use lotsizing::instgen::{read_instance, solution_from_json, solution_to_json};

fn run(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lotsizing"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str], dir: &Path) -> String {
    let out = run(args, dir);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn generate_solve_validate_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["generate", "--num-retailers", "4", "--num-warehouses", "2", "--horizon", "4", "--plant-capacity-factor", "2.0", "--seed", "3", "-o", "inst.json"], d);
    ok(&["solve", "--instance", "inst.json", "--total-budget-seconds", "2", "--output", "sol.json", "--report", "run.json"], d);
    ok(&["validate", "--instance", "inst.json", "--solution", "sol.json"], d);
    assert!(d.join("run.json").exists());

    let inst = read_instance(&d.join("inst.json")).unwrap();
    let mut sol = solution_from_json(&inst, &std::fs::read_to_string(d.join("sol.json")).unwrap()).unwrap();
    let last = inst.num_facilities() - 1;
    sol.s[last][0] += 1.0;
    std::fs::write(d.join("bad.json"), solution_to_json(&inst, &sol)).unwrap();
    let out = run(&["validate", "--instance", "inst.json", "--solution", "bad.json"], d);
    assert_eq!(out.status.code(), Some(2), "broken solution should be rejected");
}

#[test]
fn export_lp_writes_model() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["generate", "--num-retailers", "2", "--num-warehouses", "1", "--horizon", "2", "-o", "inst.json"], d);
    ok(&["solve", "--instance", "inst.json", "--method", "mip-std", "--export-lp", "model.lp"], d);
    let text = std::fs::read_to_string(d.join("model.lp")).unwrap();
    assert!(text.to_lowercase().contains("minimize"), "LP file lacks an objective section");
}

#[test]
fn bench_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["generate", "--num-retailers", "3", "--num-warehouses", "1", "--horizon", "3", "-o", "a.json"], d);
    ok(&["generate", "--num-retailers", "2", "--num-warehouses", "2", "--horizon", "3", "--seed", "5", "-o", "b.json"], d);
    ok(&["bench", "--instances", "a.json", "b.json", "--methods", "rffo,mip-std", "--budget-seconds", "1", "--output-dir", "out"], d);
    let csv = std::fs::read_to_string(d.join("out/results.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5, "header plus two instances times two methods:\n{csv}");
    assert!(d.join("out/config.json").exists());
    let summary = ok(&["report", "--results", "out/results.csv", "--reference", "mip-std"], d);
    assert!(!summary.trim().is_empty());
}

#[test]
fn bad_arguments_fail() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["solve", "--instance", "missing.json"], dir.path());
    assert!(!out.status.success());
    let out = run(&["bench", "--budget-seconds", "-1", "--instances", "x.json"], dir.path());
    assert!(!out.status.success());
}
