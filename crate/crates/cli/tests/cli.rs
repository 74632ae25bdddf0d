//! End-to-end checks of the command-line surface and its exit codes.

use std::io::Write;
use std::process::{Command, Output};

fn websym(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_websym"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_tmp(name: &str, content: &str) -> std::path::PathBuf {
    let dir = std::env::temp_dir().join("websym-cli-tests");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join(name);
    let mut f = std::fs::File::create(&path).unwrap();
    f.write_all(content.as_bytes()).unwrap();
    path
}

#[test]
fn analyze_reports_dimension_four() {
    let web = write_tmp(
        "lin3.json",
        r#"{"n": 3, "f": "x1 + x2 + x3", "base": [0, 0, 0], "order": 8}"#,
    );
    let out = websym(&["analyze", web.to_str().unwrap()]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["solver"]["dim"], 4);
    assert_eq!(v["parallelizability"]["verdict"], "parallelizable-to-order-8");
}

#[test]
fn missing_input_is_usage_error() {
    let out = websym(&["analyze", "/nonexistent/missing.json"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn bad_flags_are_usage_errors() {
    let out = websym(&["analyze"]);
    assert_eq!(out.status.code(), Some(1));
    let out = websym(&["no-such-command"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn invalid_web_exits_two() {
    // d/dx2 of f vanishes at the base point
    let web = write_tmp(
        "bad.json",
        r#"{"n": 3, "f": "x1 + x2*x3", "base": [0, 0, 0], "order": 8}"#,
    );
    let out = websym(&["analyze", web.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn verify_field_certificate() {
    let web = write_tmp(
        "lin2.json",
        r#"{"n": 2, "f": "x1 + x2", "base": [0, 0], "order": 6}"#,
    );
    let field = write_tmp("f2.json", r#"{"components": [[1], [1]]}"#);
    let out = websym(&[
        "verify-field",
        web.to_str().unwrap(),
        field.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["passed"], true);
    assert_eq!(v["exact"], true);
}

#[test]
fn atlas_list_and_single_verify() {
    let out = websym(&["atlas", "list"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v.as_array().unwrap().len() >= 10);

    let out = websym(&["atlas", "verify", "parallelizable-n3"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["status"], "confirmed");
    assert_eq!(v["solver_dim"], 4);

    let out = websym(&["atlas", "verify", "no-such-entry"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn reports_are_byte_identical_across_runs() {
    let web = write_tmp(
        "det.json",
        r#"{"n": 3, "f": "x1 + (x2 - x3) + (x2 - x3)^3", "base": [0, 0, 0], "order": 8}"#,
    );
    let a = websym(&["analyze", web.to_str().unwrap()]);
    let b = websym(&["analyze", web.to_str().unwrap()]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn out_flag_writes_file() {
    let web = write_tmp(
        "lin2b.json",
        r#"{"n": 2, "f": "x1 + x2", "base": [0, 0], "order": 6}"#,
    );
    let out_path = std::env::temp_dir().join("websym-cli-tests/out.json");
    let out = websym(&[
        "normal-form",
        web.to_str().unwrap(),
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out_path).unwrap()).unwrap();
    assert_eq!(v["linear_to_order"], 6);
}
