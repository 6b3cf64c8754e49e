use std::path::PathBuf;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gauge-forge"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn fixture(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

#[test]
fn table_lists_every_check_with_its_equation() {
    let out = run(&["verify", &fixture("su2_shift.json")]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("L3KG-invariance") && text.contains("Eq. (hd-kg3)"));
    assert!(text.contains("overall: PASS"));
}

#[test]
fn quiet_prints_nothing() {
    let out = run(&["verify", &fixture("identity.json"), "--quiet"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
}

#[test]
fn points_flag_overrides_the_scenario() {
    let out = run(&[
        "random", "--n", "1", "--seed", "2", "--points", "3", "--json",
    ]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let row = v["rows"]
        .as_array()
        .unwrap()
        .iter()
        .find(|r| r["id"] == "L3KG-invariance")
        .unwrap();
    assert_eq!(row["points"], 3);
}

#[test]
fn impossible_tolerance_fails_with_exit_one() {
    let out = run(&["random", "--n", "2", "--seed", "1", "--tol", "0", "--quiet"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn same_seed_gives_identical_json() {
    let strip = |o: Output| {
        let mut v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
        v["runtime_ms"] = serde_json::Value::Null;
        v
    };
    let a = strip(run(&[
        "random", "--n", "3", "--seed", "5", "--points", "4", "--json",
    ]));
    let b = strip(run(&[
        "random", "--n", "3", "--seed", "5", "--points", "4", "--json",
    ]));
    assert_eq!(a, b);
}

#[test]
fn explain_known_and_unknown_ids() {
    let out = run(&["explain", "F2-divergence-identity"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8(out.stdout)
        .unwrap()
        .contains("Eq. (H-deri-expl-inhom)"));
    let out = run(&["explain", "F2-divergence-identity", "--json"]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["default_tolerance"], 1e-9);
    assert_eq!(run(&["explain", "no-such-check"]).status.code(), Some(2));
}

#[test]
fn usage_and_io_errors_exit_two() {
    assert_eq!(run(&[]).status.code(), Some(2));
    assert_eq!(run(&["random", "--n", "4"]).status.code(), Some(2));
    assert_eq!(
        run(&["random", "--n", "1", "--points", "0"]).status.code(),
        Some(2)
    );
    let out = run(&["verify", "/nonexistent/scenario.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8(out.stderr)
        .unwrap()
        .contains("cannot read"));
}

#[test]
fn malformed_fixture_names_the_field() {
    let out = run(&["verify", &fixture("bad.json")]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("/phi/0") && err.contains("byte"), "{err}");
}
