use std::path::PathBuf;
use std::process::{Command, Output};

fn ncstoch(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ncstoch"))
        .args(args)
        .env_remove("NCSTOCH_SEED")
        .output()
        .expect("binary runs")
}

fn fixture(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
        .display()
        .to_string()
}

fn report(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("stdout is json")
}

#[test]
fn passing_run_exits_zero() {
    let out = ncstoch(&["thm1", "--n", "2", "--k", "1", "--trials", "2", "--degree", "4"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(&out);
    assert_eq!(r["command"], "thm1");
    assert_eq!(r["seed"], 42);
}

#[test]
fn broken_row_exits_one() {
    let out = ncstoch(&["thm1", "--n", "2", "--k", "1", "--trials", "2", "--degree", "4", "--break-row", "1"]);
    assert_eq!(out.status.code(), Some(1));
    let r = report(&out);
    assert!(r["checks"].as_array().unwrap().iter().any(|c| c["status"] == "fail"));
}

#[test]
fn bad_input_exits_two() {
    assert_eq!(ncstoch(&["thm1", "--n", "0"]).status.code(), Some(2));
    assert_eq!(ncstoch(&["thm1", "--n", "2", "--break-row", "3"]).status.code(), Some(2));
    assert_eq!(ncstoch(&["prop1", "--automaton", "/nonexistent.aut"]).status.code(), Some(2));
    assert_eq!(ncstoch(&["thm1", "--assignment", &fixture("example2.aut")]).status.code(), Some(2));
}

#[test]
fn reports_are_byte_identical() {
    let args = ["quasidet", "--n", "2", "--trials", "3", "--seed", "7"];
    let a = ncstoch(&args);
    let b = ncstoch(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn report_file_matches_stdout() {
    let dir = std::env::temp_dir().join(format!("ncstoch-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("r.json");
    let out = ncstoch(&["appendix1", "--n", "3", "--trials", "2", "--report", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let written = std::fs::read(&path).unwrap();
    assert_eq!(written, ncstoch(&["appendix1", "--n", "3", "--trials", "2"]).stdout);
    std::fs::remove_dir_all(dir).ok();
}

#[test]
fn example2_automaton_from_file() {
    let path = fixture("example2.aut");
    let out = ncstoch(&["prop1", "--automaton", &path]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert_eq!(r["parameters"]["max_rows"], serde_json::json!(["010", "101"]));
    let out = ncstoch(&["thm2", "--automaton", &path, "--degree", "4", "--k", "1", "--trials", "2"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn scalar_assignment_reports_stationary_vector() {
    let out = ncstoch(&["thm1", "--n", "2", "--k", "1", "--trials", "1", "--degree", "3", "--assignment", &fixture("example1.json")]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(report(&out)["parameters"]["point_P_inverse"], serde_json::json!(["2/5", "3/5"]));
}
