use std::fs;
use std::process::{Command, Output};

use serde_json::Value;

fn orbitkit() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_orbitkit"));
    c.env_remove("ORBITKIT_CACHE");
    c
}

fn run(args: &[&str]) -> Output {
    orbitkit().args(args).output().unwrap()
}

fn json(args: &[&str]) -> Value {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn census_args(k: &str) -> Vec<String> {
    ["census", "--k", k, "--lo", "1", "--hi", "10", "--block", "10"].map(String::from).to_vec()
}

#[test]
fn census_labels_for_minus_one() {
    let v = json(&["census", "--k", "-1", "--lo", "1", "--hi", "10", "--block", "10"]);
    let labels: Vec<&str> = v["labels"].as_array().unwrap().iter().map(|l| l.as_str().unwrap()).collect();
    assert_eq!(labels, ["1", "1", "1", "1", "5", "1", "5", "1", "5", "5"]);
    let block = &v["blocks"][0];
    assert_eq!(block["counts"]["1"], 6);
    assert_eq!(block["counts"]["5"], 4);
    assert_eq!(block["alternations"], 5);
}

#[test]
fn census_csv_header() {
    let out = run(&["census", "--k", "-1", "--lo", "1", "--hi", "3", "--block", "2", "--format", "csv"]);
    assert!(out.status.success());
    assert_eq!(String::from_utf8(out.stdout).unwrap(), "n,label,block\n1,1,0\n2,1,0\n3,1,1\n");
}

#[test]
fn census_output_is_byte_identical_across_runs_and_modes() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    let args = ["census", "--k", "5", "--lo", "-500", "--hi", "500", "--block", "100"];
    assert!(orbitkit().args(args).arg("--out").arg(&a).status().unwrap().success());
    assert!(orbitkit().args(args).args(["--sequential", "--out"]).arg(&b).status().unwrap().success());
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn cache_round_trip_and_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("census.cache");
    let first = orbitkit().args(census_args("-1")).arg("--cache").arg(&cache).output().unwrap();
    assert!(first.status.success());
    assert!(cache.exists());
    let again = orbitkit().args(census_args("-1")).arg("--cache").arg(&cache).output().unwrap();
    assert_eq!(first.stdout, again.stdout);

    let other = orbitkit().args(census_args("1")).arg("--cache").arg(&cache).output().unwrap();
    assert_eq!(other.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&other.stderr).contains("cache"));
}

#[test]
fn cache_env_overrides_flag() {
    let dir = tempfile::tempdir().unwrap();
    let from_env = dir.path().join("env.cache");
    let from_flag = dir.path().join("flag.cache");
    let out = orbitkit()
        .args(census_args("-1"))
        .arg("--cache")
        .arg(&from_flag)
        .env("ORBITKIT_CACHE", &from_env)
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(from_env.exists());
    assert!(!from_flag.exists());
}

#[test]
fn corrupted_cache_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("census.cache");
    assert!(orbitkit().args(census_args("-1")).arg("--cache").arg(&cache).status().unwrap().success());
    let text = fs::read_to_string(&cache).unwrap();
    fs::write(&cache, &text[..text.len() - 7]).unwrap();
    let out = orbitkit().args(census_args("-1")).arg("--cache").arg(&cache).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn exit_codes() {
    assert_eq!(run(&["--k", "3", "cycles"]).status.code(), Some(1));
    assert_eq!(run(&["cycles", "--bogus"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&["genfun-iterate", "--m", "17"]).status.code(), Some(1));

    let capped = ["classify", "27", "--max-steps", "5"];
    assert_eq!(run(&capped).status.code(), Some(0));
    let mut strict = capped.to_vec();
    strict.push("--strict");
    assert_eq!(run(&strict).status.code(), Some(2));
    assert_eq!(run(&["classify", "27", "--strict"]).status.code(), Some(0));
}

#[test]
fn certify_and_trichotomy_report_witnesses() {
    let v = json(&["certify", "--k", "1", "--m", "3"]);
    assert_eq!(v[0]["status"], "Certificate");
    assert_eq!(v[0]["partner"], "7");
    let v = json(&["trichotomy", "--k", "1", "--m1", "5", "--m2", "16"]);
    assert_eq!(v["relation"], "disjoint");
    assert!(v["witness"].as_str().unwrap().starts_with("O+(5) = 5 8 4 2 1"));
    let v = json(&["trichotomy", "--k", "1", "--m1", "5", "--m2", "8"]);
    assert_eq!(v["relation"], "nested_first_in_second");
}

#[test]
fn generating_function_outputs() {
    let v = json(&["genfun-forward", "--k", "-1", "--n", "5"]);
    assert_eq!(v["display"], "(5 + 7w + 10w^2)/(1 - w^3)");
    let v = json(&["genfun-iterate", "--k", "1", "--m", "1"]);
    assert_eq!(v["den_pow"], serde_json::json!({"P": 2, "e": 2}));
    assert_eq!(v["num"], serde_json::json!(["0", "2", "1", "1"]));
}

#[test]
fn residues_partition() {
    let v = json(&["residues", "--k", "5"]);
    assert_eq!(v["modulus"], 5);
    assert_eq!(v["components"][0], serde_json::json!([0]));
    assert_eq!(v["components"].as_array().unwrap().len(), 2);
}
