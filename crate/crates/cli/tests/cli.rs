use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_neckglue"))
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn report(args: &[&str], dir: &Path, name: &str) -> (Output, serde_json::Value) {
    let path = dir.join(name);
    let mut all: Vec<&str> = args.to_vec();
    let p = path.to_str().unwrap().to_string();
    all.extend(["--report", &p]);
    let out = run(&all);
    let text = std::fs::read_to_string(&path).expect("report written");
    (out, serde_json::from_str(&text).expect("report is JSON"))
}

#[test]
fn validate_flagship() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture("flagship.json");
    let (out, r) = report(&["validate", cfg.to_str().unwrap()], dir.path(), "v.json");
    assert_eq!(out.status.code(), Some(0));
    let alpha = r["sections"]["interaction"]["alpha"].as_array().unwrap();
    assert!((alpha[0].as_f64().unwrap() - 4.0).abs() < 1e-12);
    assert!((alpha[1].as_f64().unwrap() - 12.0).abs() < 1e-12);
    assert_eq!(r["config_digest"].as_str().unwrap().len(), 64);
}

#[test]
fn bad_config_exits_2() {
    let out = run(&["validate", fixture("bad_epsilon.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 9"), "{err}");
    let missing = run(&["validate", "/nonexistent/config.json"]);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn spectrum_roots() {
    let dir = tempfile::tempdir().unwrap();
    let (out, r) = report(&["spectrum", "--n", "3", "--k", "1"], dir.path(), "s.json");
    assert_eq!(out.status.code(), Some(0));
    let t = &r["sections"]["indicial_roots"];
    assert_eq!(t["exact_mu"]["plus"].as_f64(), Some(2.5));
    assert_eq!(t["exact_nu"]["minus"].as_f64(), Some(-0.5));
    assert!(r["checks"]
        .as_array()
        .unwrap()
        .iter()
        .all(|c| c["passed"] == true));
}

#[test]
fn dtn_and_neck_pass() {
    assert_eq!(run(&["dtn", "--degree", "6"]).status.code(), Some(0));
    assert_eq!(
        run(&["neck", "--n", "3", "--grid", "0.2"]).status.code(),
        Some(0)
    );
    assert_eq!(run(&["dtn", "--degree", "0"]).status.code(), Some(2));
}

#[test]
fn glue_export_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture("flagship.json");
    let ply = dir.path().join("s.ply");
    let args = [
        "glue",
        cfg.to_str().unwrap(),
        "--eps",
        "3e-4",
        "--export",
        ply.to_str().unwrap(),
        "--seed",
        "5",
        "--no-timings",
    ];
    let (out, r) = report(&args, dir.path(), "a.json");
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stdout)
    );
    let points = r["sections"]["export"]["points"].as_u64().unwrap();
    let text = std::fs::read_to_string(&ply).unwrap();
    assert!(text.starts_with("ply\nformat ascii 1.0\n"));
    let body = text.split("end_header\n").nth(1).unwrap();
    assert_eq!(body.lines().count() as u64, points);
    assert_eq!(r["seed"].as_u64(), Some(5));

    let first = std::fs::read(dir.path().join("a.json")).unwrap();
    let (_, _) = report(&args, dir.path(), "b.json");
    let second = std::fs::read(dir.path().join("b.json")).unwrap();
    assert_eq!(first, second);
}
