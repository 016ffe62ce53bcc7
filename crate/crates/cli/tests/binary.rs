use std::path::Path;
use std::process::{Command, Output};

fn run(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_configbounds"))
        .arg("--out")
        .arg(out)
        .args(args)
        .env_remove("CONFIGBOUNDS_THREADS")
        .output()
        .unwrap()
}

#[test]
fn end_to_end_through_the_binary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    let ok = |o: Output| assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    ok(run(
        out,
        &["gen", "--instances", "3", "--goods", "6", "--bids", "10"],
    ));
    ok(run(out, &["duals", "--rules", "L,S", "--grid-eps", "1e-3"]));
    let bounds = run(
        out,
        &[
            "bounds",
            "--j-range",
            "1..8",
            "--schedule",
            "100,1000,10000",
        ],
    );
    ok(bounds.clone());
    assert_eq!(String::from_utf8_lossy(&bounds.stdout).lines().count(), 3);
    assert!(out.join("bounds.csv").exists());
    let fit = run(
        out,
        &[
            "fit",
            out.join("duals/dual_0000.json").to_str().unwrap(),
            "-k",
            "2",
        ],
    );
    ok(fit.clone());
    let v: serde_json::Value = serde_json::from_slice(&fit.stdout).unwrap();
    assert!(v["error"].as_f64().unwrap() >= 0.0);
}

#[test]
fn exit_codes_follow_error_class() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    assert_eq!(run(out, &["duals"]).status.code(), Some(2));
    assert_eq!(
        run(out, &["counterexample", "--gammas", "0.3"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        run(out, &["duals", "--kappa", "zero"]).status.code(),
        Some(2)
    );
    let missing = out.join("nope.json");
    assert_eq!(
        run(out, &["fit", missing.to_str().unwrap(), "-k", "1"])
            .status
            .code(),
        Some(3)
    );
    std::fs::write(out.join("bad.json"), "{").unwrap();
    let bad = out.join("bad.json");
    assert_eq!(
        run(out, &["fit", bad.to_str().unwrap(), "-k", "1"])
            .status
            .code(),
        Some(3)
    );
}

#[test]
fn bad_thread_env_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_configbounds"))
        .arg("--out")
        .arg(dir.path())
        .args(["gen", "--instances", "1"])
        .env("CONFIGBOUNDS_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}
