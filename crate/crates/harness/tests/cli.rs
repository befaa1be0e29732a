use std::path::Path;
use std::process::Command;

fn mkdv(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_mkdv")).args(args).output().expect("spawn mkdv")
}

fn config(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

#[test]
fn same_spec_and_seed_give_identical_reports() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let spec = config("identities.json");
    for d in [&a, &b] {
        let out = mkdv(&["run", &spec, "--out", d.path().to_str().unwrap(), "--seed", "7"]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let ra = std::fs::read(a.path().join("report.json")).unwrap();
    let rb = std::fs::read(b.path().join("report.json")).unwrap();
    assert_eq!(ra, rb);
    assert!(a.path().join("timing.json").exists());
    assert!(a.path().join("identities.csv").exists());
    let report: serde_json::Value = serde_json::from_slice(&ra).unwrap();
    assert_eq!(report["seed"], 7);
    assert_eq!(report["passed"], true);
}

#[test]
fn different_seeds_draw_different_functions() {
    let spec = config("identities.json");
    let a = mkdv(&["run", &spec, "--seed", "1"]);
    let b = mkdv(&["run", &spec, "--seed", "2"]);
    assert_ne!(a.stdout, b.stdout);
}

#[test]
fn exit_code_reflects_the_checks() {
    let dir = tempfile::tempdir().unwrap();
    let params = dir.path().join("bug.json");
    std::fs::write(&params, r#"{"samples": 5, "inject_sign_bug": true}"#).unwrap();
    let out = mkdv(&["identities", params.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("FAIL summation_by_parts"), "{stderr}");

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"kind": "gamma", "params": {"depth": 12, "bogus": 1}}"#).unwrap();
    assert_eq!(mkdv(&["run", bad.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(mkdv(&["run", "/nonexistent/spec.json"]).status.code(), Some(2));
}

#[test]
fn subcommands_run_with_defaults() {
    let out = mkdv(&["gamma", "--threads", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["experiment"], "gamma");
}
