use std::path::Path;
use std::process::{Command, Output};

fn popver(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_popver"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn list_names_the_corpus() {
    let o = popver(&["list"]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    for name in popver_core::corpus::NAMES {
        assert!(text.contains(name), "{name}");
    }
}

#[test]
fn equality_verifies() {
    let o = popver(&["verify", "eq_pp", "--pred", "x0=0||x1=0", "--max-agents", "4"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    assert!(stdout(&o).ends_with("PASS (exact up to the agent bound)\n"));
}

#[test]
fn unreliable_parity_fails_with_a_trace() {
    let dir = tempfile::tempdir().unwrap();
    let tbl = dir.path().join("parity.tbl");
    std::fs::write(&tbl, popver::format_table(&popver_core::corpus::parity_table(4))).unwrap();
    let o = popver(&[
        "verify",
        "parity",
        "--unreliable",
        "--table",
        path(&tbl),
        "--max-agents",
        "2",
    ]);
    assert_eq!(code(&o), 1);
    let text = stdout(&o);
    assert!(text.contains("counterexample for [2]"), "{text}");
    assert!(text.contains("# lasso"));

    let o = popver(&["verify", "parity", "--table", path(&tbl), "--max-agents", "4"]);
    assert_eq!(code(&o), 0);
}

#[test]
fn queued_runs_are_labelled() {
    let o = popver(&["verify", "eq_qt", "--max-agents", "2"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("bounded-packets approximation"));
}

#[test]
fn synth_writes_a_valid_protocol() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("proto.json");
    let o = popver(&["synth", "x0 >= 1 && x1 <= 1", "--sigma", "0,1", "-o", path(&file)]);
    assert_eq!(code(&o), 0);
    assert_eq!(code(&popver(&["validate", path(&file)])), 0);
    let o = popver(&[
        "verify",
        path(&file),
        "--pred",
        "x0 >= 1 && x1 <= 1",
        "--max-agents",
        "4",
    ]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
}

#[test]
fn validate_reports_schema_and_class_problems() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("bad.json");
    std::fs::write(
        &file,
        r#"{"name": "x", "kind": "population", "sigma": ["0"], "states": ["a"]}"#,
    )
    .unwrap();
    let o = popver(&["validate", path(&file), "--json"]);
    assert_eq!(code(&o), 1);
    let v: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert_eq!(v["valid"], false);

    let mut spec = popver_core::corpus::eq_io();
    spec.transitions = popver_core::corpus::eq_pp().transitions;
    std::fs::write(&file, popver::protocol_to_json(&spec)).unwrap();
    let o = popver(&["validate", path(&file)]);
    assert_eq!(code(&o), 1);
    assert!(stdout(&o).contains("immediate_observation"));
    // Other commands refuse the file outright.
    assert_eq!(code(&popver(&["verify", path(&file)])), 2);
}

#[test]
fn usage_and_resource_errors() {
    assert_eq!(code(&popver(&["verify"])), 2);
    assert_eq!(code(&popver(&["frobnicate"])), 2);
    assert_eq!(code(&popver(&["verify", "no_such_protocol"])), 2);
    assert_eq!(code(&popver(&["graph", "eq_pp", "--input", "1"])), 2);
    let o = popver(&["verify", "eq_pp", "--max-agents", "5", "--budget-nodes", "2"]);
    assert_eq!(code(&o), 3);
    assert_eq!(code(&popver(&["--help"])), 0);
}

#[test]
fn json_reports_are_stable() {
    for args in [
        &[
            "simulate", "eq_qt", "--input", "2,1", "--seed", "7", "--steps", "40", "--json",
        ][..],
        &["verify", "eq_bcast", "--max-agents", "3", "--json"][..],
        &["truncate", "eq_pp", "--bound", "4", "--json"][..],
    ] {
        let a = popver(args);
        let b = popver(args);
        assert_eq!(code(&a), 0);
        assert_eq!(a.stdout, b.stdout);
        for line in stdout(&a).lines() {
            serde_json::from_str::<serde_json::Value>(line).unwrap();
        }
    }
    let a = popver(&["simulate", "eq_qt", "--input", "2,1", "--seed", "7", "--json"]);
    let b = popver(&["simulate", "eq_qt", "--input", "2,1", "--seed", "8", "--json"]);
    assert_ne!(a.stdout, b.stdout);
}

#[test]
fn graph_export() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("g.dot");
    let o = popver(&["graph", "eq_pp", "--input", "1,1", "-o", path(&file)]);
    assert_eq!(code(&o), 0);
    let dot = std::fs::read_to_string(&file).unwrap();
    assert!(dot.contains("subgraph cluster_"));
    assert!(dot.contains("n0 -> n1;"));
}

#[test]
fn shadow_commands() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("shadow.txt");
    let o = popver(&["shadow", "eq_io", "--unreliable", "--agents", "2", "-o", path(&file)]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    let text = std::fs::read_to_string(&file).unwrap();
    assert!(text.contains("### input [1, 1]"));
    assert!(text.contains("## agent 1 shadow 0 as agent 2"));

    assert_eq!(code(&popver(&["shadow", "plusminus", "--oracle", "--max-len", "8"])), 1);
    assert_eq!(code(&popver(&["shadow", "plusminus", "--unreliable", "--oracle"])), 0);
    assert_eq!(code(&popver(&["shadow", "plusminus"])), 2);
}

#[test]
fn truncation_commands() {
    let o = popver(&["truncate", "threshold(2)", "--bound", "6", "--json"]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert_eq!(v["k"], 3);
    assert_eq!(
        code(&popver(&["truncate", "threshold(2)", "--bound", "6", "--k", "0"])),
        1
    );
}

#[test]
fn careful_and_two_agents() {
    let o = popver(&[
        "careful",
        "qt_atleast2",
        "--toy-F",
        "4,1",
        "--packet-cap",
        "8",
        "--json",
    ]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert_eq!(v["value"], true);
    assert_eq!(v["expendable"], serde_json::json!(["m"]));

    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("joint.txt");
    let o = popver(&[
        "twoagent",
        "qt_atleast2",
        "--toy-F",
        "4,1",
        "--packet-cap",
        "8",
        "-o",
        path(&file),
    ]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("both settle on true"));
    assert!(std::fs::read_to_string(&file).unwrap().contains("# mark target_moment"));

    assert_eq!(
        code(&popver(&["twoagent", "threshold(2)", "--unreliable", "--toy-F", "4,1"])),
        2
    );
    assert_eq!(code(&popver(&["careful", "qt_atleast2", "--toy-F", "4"])), 2);
}
