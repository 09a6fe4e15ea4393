use std::process::{Command, Output};

fn verify(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_verify")).args(args).output().unwrap()
}

fn code(args: &[&str]) -> i32 {
    verify(args).status.code().unwrap()
}

#[test]
fn exit_codes() {
    assert_eq!(code(&["warped-line"]), 0);
    assert_eq!(code(&["cws-incompatible"]), 0);
    assert_eq!(code(&["no-such-scenario"]), 2);
    assert_eq!(code(&["warped-line", "--no-such-flag"]), 2);
    assert_eq!(code(&[]), 2);
    assert_eq!(code(&["warped-line", "--samples", "0"]), 2);
    assert_eq!(code(&["sphere-warped", "--tolerance-scale", "1e-12"]), 1);
}

#[test]
fn list_prints_catalog() {
    let out = verify(&["--list"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 9);
    assert!(text.lines().next().unwrap().starts_with("paper-example-r4"));
}

#[test]
fn text_report() {
    let out = verify(&["cws-constant-dilation", "--report", "text"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("scenario cws-constant-dilation [PASS]"));
    assert!(text.contains("cws.theorem.item1.factor_grad"));
    assert!(text.trim_end().ends_with("overall PASS"));
}

#[test]
fn out_file_matches_stdout() {
    let dir = std::env::temp_dir().join(format!("verify-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("report.json");
    let status = verify(&["heisenberg", "--out", path.to_str().unwrap()]);
    assert!(status.status.success());
    assert!(status.stdout.is_empty());
    let stdout = verify(&["heisenberg"]).stdout;
    assert_eq!(std::fs::read(&path).unwrap(), stdout);
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn same_seed_same_bytes() {
    let a = verify(&["vertical-dilation", "--seed", "7"]).stdout;
    let b = verify(&["vertical-dilation", "--seed", "7"]).stdout;
    let c = verify(&["vertical-dilation", "--seed", "8"]).stdout;
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn options_are_echoed() {
    let out = verify(&["warped-line", "--scheme", "central4", "--fd-step", "1e-4", "--samples", "5"]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let config = &v["reports"][0]["config"];
    assert_eq!(config["scheme"], "central4");
    assert_eq!(config["fd_step"], 1e-4);
    assert_eq!(config["samples"], 5);
}
