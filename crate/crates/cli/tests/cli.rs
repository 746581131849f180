use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn capfl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_capfl")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stdout).expect("json output")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn gen_then_solve_gap5() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("gap5.json");
    let gen = capfl(&["gen", "--gap", "5", "--out", path(&inst)]);
    assert!(gen.status.success());
    let out = capfl(&["solve", "--instance", path(&inst)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report = json(&out);
    assert_eq!(report["schema_version"], 1);
    assert_eq!(report["status"], "solved");
    assert_eq!(report["cost"]["value"], "1");
    assert_eq!(report["lower_bound"]["value"], "1");
    assert!(report["cuts_added"].as_u64().unwrap() >= 1);
}

#[test]
fn standard_lp_gap5() {
    let out = capfl(&["standard-lp", "--gap", "5"]);
    assert!(out.status.success());
    assert_eq!(json(&out)["value"]["value"], "1/5");
}

#[test]
fn exact_knapsack() {
    let out = capfl(&["exact", "--knapsack", "3,2,2", "1,1,1", "4"]);
    assert!(out.status.success());
    assert_eq!(json(&out)["value"]["value"], "2");
}

#[test]
fn verify_flags_overload() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("gap5.json");
    assert!(capfl(&["gen", "--gap", "5", "--out", path(&inst)]).status.success());
    let sol = dir.path().join("sol.json");
    let assign: Vec<String> = (1..=6).map(|j| format!("\"j{j}\":\"i1\"")).collect();
    fs::write(&sol, format!("{{\"open\":[\"i1\"],\"assign\":{{{}}}}}", assign.join(","))).unwrap();
    let out = capfl(&["verify", "--instance", path(&inst), "--solution", path(&sol)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stdout(&out).contains("capacity violation: facility i1"), "{}", stdout(&out));

    let good = dir.path().join("good.json");
    let mut assign: Vec<String> = (1..=5).map(|j| format!("\"j{j}\":\"i1\"")).collect();
    assign.push("\"j6\":\"i2\"".into());
    fs::write(&good, format!("{{\"open\":[\"i1\",\"i2\"],\"assign\":{{{}}}}}", assign.join(","))).unwrap();
    let out = capfl(&["verify", "--instance", path(&inst), "--solution", path(&good)]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("cost 1"));
}

#[test]
fn verify_rejects_invalid_instance() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("bad.json");
    fs::write(
        &inst,
        r#"{"facilities":[{"id":"a","open_cost":"1","capacity":1}],"clients":["p"],"metric":[["0","1"],["2","0"]]}"#,
    )
    .unwrap();
    let out = capfl(&["verify", "--instance", path(&inst)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stdout(&out).contains("invalid instance"));
    // Loading it for solving is a fault.
    assert_eq!(capfl(&["solve", "--instance", path(&inst)]).status.code(), Some(1));
}

#[test]
fn faults_exit_one() {
    assert_eq!(capfl(&["solve", "--instance", "/nonexistent/file.json"]).status.code(), Some(1));
    assert_eq!(capfl(&["gen", "--random", "1,2"]).status.code(), Some(1));
    assert_eq!(capfl(&["gen", "--knapsack", "1,1", "1,1", "5"]).status.code(), Some(1));
}

#[test]
fn identical_config_is_byte_identical() {
    let a = capfl(&["solve", "--random", "7,3,6", "--softcap", "greedy"]);
    let b = capfl(&["solve", "--random", "7,3,6", "--softcap", "greedy"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let g1 = capfl(&["gen", "--random", "11,4,8"]);
    let g2 = capfl(&["gen", "--random", "11,4,8"]);
    assert_eq!(g1.stdout, g2.stdout);
}

#[test]
fn suite_prints_table() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("suite.json");
    let out = capfl(&["suite", "--out", path(&report)]);
    let table = stdout(&out);
    assert_eq!(table.lines().filter(|l| l.starts_with("PASS") || l.starts_with("FAIL")).count(), 9);
    let parsed: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    let all_passed = parsed["criteria"].as_array().unwrap().iter().all(|c| c["passed"] == true);
    assert_eq!(out.status.code(), Some(if all_passed { 0 } else { 2 }));
}
