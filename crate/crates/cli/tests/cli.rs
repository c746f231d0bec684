use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value as Json;

fn fixture(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name).to_str().unwrap().to_owned()
}

fn pqk(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pqk")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn check_prints_typing() {
    let o = pqk(&["check", &fixture("ok.pqk")]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).trim(), "(_, Bit * Bit)");
}

#[test]
fn linearity_violation_is_a_user_error() {
    let o = pqk(&["check", &fixture("dup-label.pqk")]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("type error at 2:13"), "{}", stderr(&o));
    assert!(stderr(&o).contains("used more than once"));

    let o = pqk(&["check", &fixture("dup-label.pqk"), "--json"]);
    assert_eq!(o.status.code(), Some(1));
    let j: Json = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(j["error"]["line"], 2);
    assert_eq!(j["error"]["rule"], "label");
}

#[test]
fn missing_file_and_bad_flags_exit_1() {
    assert_eq!(pqk(&["check", "/no/such/file.pqk"]).status.code(), Some(1));
    assert_eq!(pqk(&["run", &fixture("ok.pqk"), "--bogus"]).status.code(), Some(1));
    assert_eq!(pqk(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(pqk(&["--help"]).status.code(), Some(0));
}

#[test]
fn one_way_run_reports_both_branches() {
    let o = pqk(&["run", &fixture("one-way.pqk"), "--json"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let j: Json = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(j["typing"]["typing"], "(<u ? _ | _>, <u ? Qubit | Bit>)");
    let paths = j["paths"].as_array().unwrap();
    assert_eq!(paths.len(), 2);
    assert_eq!(paths[0]["path"]["u"], 0);
    assert_eq!(paths[0]["value"], "@a0");
    assert_eq!(paths[1]["path"]["u"], 1);
    let instrs = j["circuit"]["circuit"]["instructions"].as_array().unwrap();
    assert_eq!(instrs.last().unwrap()["cond"]["u"], 1);
}

#[test]
fn fuel_exhaustion_is_a_user_error() {
    let o = pqk(&["run", &fixture("teleport.pqk"), "--fuel", "3"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("no result within 3 steps"));
}

#[test]
fn circuit_emits_crl_and_dot() {
    let o = pqk(&["circuit", &fixture("alice.pqk")]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("Meas2("));

    let dot = std::env::temp_dir().join(format!("pqk-cli-test-{}.dot", std::process::id()));
    let o = pqk(&["circuit", &fixture("teleport.pqk"), "--dot", dot.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = std::fs::read_to_string(&dot).unwrap();
    std::fs::remove_file(&dot).ok();
    assert!(text.starts_with("digraph"));
}

#[test]
fn sim_distribution_sums_to_shots() {
    let o = pqk(&["sim", &fixture("teleport.pqk"), "--shots", "400", "--seed", "1", "--json"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let j: Json = serde_json::from_str(&stdout(&o)).unwrap();
    let dist = j["distribution"].as_array().unwrap();
    // With every input at |0>, the CNOT leaves `a` alone, so only s=0 occurs.
    assert_eq!(dist.len(), 2);
    assert!(dist.iter().all(|d| d["path"]["s"] == 0));
    let total: u64 = dist.iter().map(|d| d["count"].as_u64().unwrap()).sum();
    assert_eq!(total, 400);
}

#[test]
fn fuzz_is_clean_and_mutation_is_caught() {
    let o = pqk(&["fuzz", "--count", "50", "--seed", "4"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("0 stuck"));

    let o = pqk(&["fuzz", "--count", "50", "--seed", "4", "--mutate"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).contains("subject reduction violated"));
}
