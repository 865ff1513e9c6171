use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const DET: &str = r#"{"n":3,"initialLoads":["0","1","3"],"mode":"continuous","tau":"0.5","k":"0",
 "adversary":{"name":"static","graph":"path"},"algorithm":"deterministic","seed":3,
 "checks":["conservation","potentialDrop"],"traceLevel":"full","trials":4}"#;

fn dynbal(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dynbal")).args(args).env("DYNBAL_THREADS", "1").output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn run_writes_trace_to_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "det.json", DET);
    let out = dynbal(&["run", &cfg]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    let mut lines = stdout.lines();
    assert_eq!(lines.next(), Some("round,phi,max_gap,d_r,connections,converged,conservation,potential_drop"));
    assert_eq!(lines.next(), Some("0,6,3,0,0,false,,"));
    assert!(String::from_utf8_lossy(&out.stderr).contains("converged at round"));
}

#[test]
fn run_is_reproducible_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let text = r#"{"n":6,"initialLoads":{"name":"singleSource","total":"40"},"mode":"integral","tau":"1",
     "k":"0.5","adversary":"sortingLine","algorithm":"smoothedBalance","seed":9}"#;
    let cfg = write(dir.path(), "s.json", text);
    let a = dynbal(&["run", &cfg, "--seed", "5"]);
    let b = dynbal(&["run", &cfg, "--seed", "5"]);
    assert_eq!(a.status.code(), Some(0), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn experiment_writes_tables() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "det.json", DET);
    let out_dir = dir.path().join("out");
    let out = dynbal(&["experiment", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let trials = fs::read_to_string(out_dir.join("trials.csv")).unwrap();
    assert_eq!(trials.lines().count(), 5);
    for seed in 3..7 {
        assert!(out_dir.join(format!("trial_{seed}.csv")).exists());
    }
    let agg = fs::read_to_string(out_dir.join("aggregate.csv")).unwrap();
    assert!(agg.contains("converged,4"), "{agg}");
}

#[test]
fn invalid_config_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.json", &DET.replace(r#""continuous""#, r#""integral""#));
    let out = dynbal(&["run", &cfg]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("integral mode requires integer tau"));
    assert_eq!(dynbal(&["run", "/nonexistent.json"]).status.code(), Some(1));
    assert_eq!(dynbal(&["frobnicate"]).status.code(), Some(1));
}

#[test]
fn rejection_exhaustion_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let text = r#"{"n":4,"initialLoads":["4","0","0","0"],"mode":"integral","tau":"1","k":"1",
     "adversary":"sortingLine","algorithm":"smoothedBalance","seed":1,"maxRejections":1}"#;
    let cfg = write(dir.path(), "rej.json", text);
    let codes: Vec<Option<i32>> = (0..20).map(|s| dynbal(&["run", &cfg, "--seed", &s.to_string()]).status.code()).collect();
    assert!(codes.contains(&Some(3)), "{codes:?}");
    assert!(codes.iter().all(|c| matches!(c, Some(0) | Some(3))), "{codes:?}");
}

#[test]
fn verify_empty_dir_reports_no_scenarios() {
    let dir = tempfile::tempdir().unwrap();
    let out = dynbal(&["verify", "--dir", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no scenarios found"));
}

#[test]
fn verify_dir_runs_each_scenario() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "a.json", DET);
    write(dir.path(), "notes.txt", "ignored");
    let out = dynbal(&["verify", "--dir", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert_eq!(stdout.lines().count(), 1);
    assert!(stdout.starts_with("PASS [a.json]"), "{stdout}");
}

#[test]
fn smoothing_test_reports_total_variation() {
    let out = dynbal(&["smoothing-test", "--n", "4", "--graph", "cycle", "--radius", "1", "--samples", "20000"]);
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("ball size 7") && stdout.contains("outside ball 0"), "{stdout}");
}

#[test]
fn calibrate_prints_constant() {
    let out = dynbal(&["calibrate-c1", "--n", "8", "--k", "1", "--samples", "2000"]);
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.starts_with("base,set_size,hits,samples,constant"));
    let c1: f64 = stdout.lines().last().unwrap().strip_prefix("c1 ").unwrap().parse().unwrap();
    assert!(c1 > 0.5 && c1 < 10.0, "{c1}");
}

#[test]
fn verify_fast_passes() {
    let out = dynbal(&["verify", "--fast"]);
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert_eq!(out.status.code(), Some(0), "{stdout}");
    assert_eq!(stdout.lines().filter(|l| l.starts_with("PASS")).count(), 7, "{stdout}");
}

#[test]
fn shipped_scenarios_pass() {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/../../scenarios");
    let out = dynbal(&["verify", "--dir", dir]);
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert_eq!(out.status.code(), Some(0), "{stdout}");
    assert_eq!(stdout.lines().filter(|l| l.starts_with("PASS")).count(), 3, "{stdout}");
}
