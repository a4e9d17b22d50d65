use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn signlod(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_signlod")).args(args).output().unwrap()
}

fn small_run(out: &Path, extra: &[&str]) -> Output {
    let out = out.to_str().unwrap();
    let mut args = vec![
        "run", "--scenario", "circle", "--fine-level", "4", "--coarse-levels", "1..2", "--m", "1,2", "--out", out,
        "--no-timings",
    ];
    args.extend_from_slice(extra);
    signlod(&args)
}

#[test]
fn run_writes_reproducible_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let first = small_run(&a, &["--decay-element", "3", "--decay-level", "2", "--probe-coercivity", "4"]);
    assert!(first.status.success(), "{}", String::from_utf8_lossy(&first.stderr));
    assert!(small_run(&b, &[]).status.success());

    let csv = fs::read_to_string(a.join("circle.csv")).unwrap();
    assert_eq!(csv, fs::read_to_string(b.join("circle.csv")).unwrap());
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "scenario,coarse_level,m,h1_lod,l2_macro,l2_fem,l2_bestapprox,eoc_h1_lod,eoc_l2_macro,eoc_l2_bestapprox,assembly_s,solve_s"
    );
    assert_eq!(lines.count(), 4);

    let sidecar: serde_json::Value = serde_json::from_str(&fs::read_to_string(a.join("circle.json")).unwrap()).unwrap();
    assert_eq!(sidecar["pattern"], "crisscross");
    assert_eq!(sidecar["config"]["fine_level"], 4);
    assert!(a.join("circle_m1.dat").exists() && a.join("circle_m2.dat").exists());
    assert!(fs::read_to_string(a.join("circle_decay.csv")).unwrap().starts_with("element_id,m,tail_h1,fit_slope"));
    assert!(a.join("circle_probe.json").exists());
    let stdout = String::from_utf8_lossy(&first.stdout);
    assert!(stdout.contains("mean EOC") && stdout.contains("coercivity probe"));
}

#[test]
fn rejects_bad_arguments() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert!(!signlod(&["run", "--scenario", "hexagon", "--out", out]).status.success());
    let r = signlod(&["run", "--scenario", "flat2", "--fine-level", "3", "--coarse-levels", "1..3", "--out", out]);
    assert!(!r.status.success());
    assert!(String::from_utf8_lossy(&r.stderr).contains("must exceed"));
}

#[test]
fn prints_reference_constants() {
    let out = signlod(&["constants"]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("C_norm = 10.246950765") && text.contains("C_inv  = 8.485281374"));
}
