use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn models() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../models")
}

fn pta(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pta"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn model(name: &str) -> String {
    models().join(name).to_string_lossy().into_owned()
}

#[test]
fn encode_is_byte_identical_across_invocations() {
    let dir = tempfile::tempdir().unwrap();
    let paths: Vec<_> = (0..2).map(|i| dir.path().join(format!("q{i}.smt2"))).collect();
    for p in &paths {
        let out = pta(&["encode", &model("handshake.json"), "-o", p.to_str().unwrap()]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let a = std::fs::read(&paths[0]).unwrap();
    assert!(!a.is_empty());
    assert_eq!(a, std::fs::read(&paths[1]).unwrap());
}

#[test]
fn encode_matches_frozen_script() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("rate2.smt2");
    let out = pta(&["encode", &model("rate2.json"), "-o", p.to_str().unwrap()]);
    assert!(out.status.success());
    let golden = include_str!("golden/rate2.smt2");
    assert_eq!(std::fs::read_to_string(&p).unwrap(), golden);
    assert_eq!(json(&out)["logic"], "QF_LRA");
}

#[test]
fn check_reports_witness_cost() {
    let out = pta(&["check", &model("rate2.json")]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert_eq!(v["verdict"], "yes");
    assert_eq!(v["witness"]["cost"], 7);
    assert_eq!(v["input_sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn check_honours_step_override() {
    let out = pta(&["check", &model("rate2.json"), "-N", "1"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["verdict"], "no");
}

#[test]
fn simulate_rejects_split_delays() {
    let out = pta(&["simulate", &model("rate2.json"), &model("noncanonical_run.json")]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("consecutive delay steps"));
}

#[test]
fn simulate_prices_canonical_run() {
    let out = pta(&["simulate", &model("rate2.json"), &model("rate2_run.json")]);
    assert!(out.status.success());
    assert_eq!(json(&out)["cost"], 7);
}

#[test]
fn validate_points_at_broken_field() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.json");
    let text = std::fs::read_to_string(models().join("rate2.json"))
        .unwrap()
        .replace(r#""to": "goal""#, r#""to": "nowhere""#);
    std::fs::write(&p, text).unwrap();
    let out = pta(&["validate", p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let v = json(&out);
    let paths: Vec<&str> = v["diagnostics"]
        .as_array()
        .unwrap()
        .iter()
        .map(|d| d["path"].as_str().unwrap())
        .collect();
    assert!(paths.contains(&"automata[0].edges[0].to"), "{paths:?}");
}

#[test]
fn missing_solver_is_a_solver_error() {
    let out = pta(&["check", &model("rate2.json"), "--solver", "/nonexistent/z3"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn oracle_agrees_with_optimize_on_handshake() {
    let q = ["--from", "S.idle,R.wait", "--to", "R.got", "-N", "2"];
    let m = &model("handshake.json");
    let o = json(&pta(&[&["oracle", m][..], &q].concat()));
    let m = pta(&[&["optimize", m, "--hi", "20"][..], &q].concat());
    assert!(m.status.success());
    let m = json(&m);
    assert_eq!(m["status"], "optimal");
    assert_eq!(o["optimum"], m["upper"]);
}

#[test]
fn transform_writes_image_and_map() {
    let dir = tempfile::tempdir().unwrap();
    let img = dir.path().join("image.json");
    let map = dir.path().join("map.json");
    let out = pta(&[
        "transform",
        &model("piecewise.json"),
        "-o",
        img.to_str().unwrap(),
        "--map",
        map.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = pta(&["validate", img.to_str().unwrap()]);
    assert!(v.status.success());
    let m: Value = serde_json::from_str(&std::fs::read_to_string(map).unwrap()).unwrap();
    assert_eq!(m["theta"]["warmup"].as_array().unwrap().len(), 4);
}

#[test]
fn generators_emit_valid_models() {
    let dir = tempfile::tempdir().unwrap();
    let alp = dir.path().join("alp.json");
    let tcm = dir.path().join("tcm.json");
    assert!(
        pta(&["gen-alp", "--desk", "2", "--runways", "1", "-o", alp.to_str().unwrap()])
            .status
            .success()
    );
    assert!(
        pta(&["gen-2cm", &model("inc_inc_dec.2cm"), "-o", tcm.to_str().unwrap()])
            .status
            .success()
    );
    for p in [alp, tcm] {
        let out = pta(&["validate", p.to_str().unwrap()]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    }
}
