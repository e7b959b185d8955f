use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_stir-orbits"));
    c.env_remove("STIR_ORBITS_WORKERS");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

const SMALL: &str = "seed = 5\n[orbit-stats]\ndim = 2\nn = 3, 6\np = 0.5\nsamples = 3000\n[jensen]\ndim = 3\nn = 4\nsamples = 3000\n";

#[test]
fn selftest_passes_and_detects_faults() {
    let ok = run(&["selftest"]);
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stdout));
    let bad = run(&["selftest", "--inject-fault"]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("ringstore-consistency"));
}

#[test]
fn decompose_path() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "p.edges", "vertices 4\n0 1\n1 2\n2 3\n");
    let out = run(&["decompose", &f]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(String::from_utf8(out.stdout).unwrap(), "class,u,v\n1,0,1\n1,2,3\n2,1,2\n");
}

#[test]
fn empty_config_gives_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "e.conf", "# nothing\nseed = 1\n");
    let out = run(&["run", &f]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(String::from_utf8(out.stdout).unwrap(), format!("{}\n", stir_core::estimators::CSV_HEADER));
}

#[test]
fn parse_errors_exit_2_with_position() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "bad.conf", "seed = 1\n[escape]\ndim = 3\nsamples = many\n");
    let out = run(&["run", &f]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 4, column 11"), "{err}");
    let f = write(dir.path(), "typo.conf", "[escape]\ndim = 3\nsampels = 10\n");
    assert_eq!(run(&["run", &f]).status.code(), Some(2));
    assert_eq!(run(&["run", "/nonexistent/x.conf"]).status.code(), Some(2));
}

#[test]
fn oracle_size_limit_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "big.conf", "[oracle-suite]\ngraph = path\nvertices = 8\n");
    let out = run(&["run", &f]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn violated_expectation_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(
        dir.path(),
        "c.conf",
        "[classify]\ndim = 3\nhorizons = 10, 20, 40\nradii = 2, 4, 8\nsamples = 500\nexpect = recurrent\n",
    );
    let out = run(&["run", &f]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("classify-expectation"));
}

#[test]
fn csv_is_reproducible_across_runs_and_workers() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "s.conf", SMALL);
    let a = run(&["run", &f, "--workers", "1"]);
    let b = run(&["run", &f, "--workers", "4"]);
    let c = bin().args(["run", &f]).env("STIR_ORBITS_WORKERS", "2").output().unwrap();
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(a.stdout, c.stdout);
    let d = run(&["run", &f, "--seed", "6"]);
    assert_ne!(a.stdout, d.stdout);
}

#[test]
fn out_dir_receives_files() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "s.conf", SMALL);
    let out_dir = dir.path().join("res");
    let out = run(&["run", &f, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let csv = std::fs::read_to_string(out_dir.join("results.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 2 * 2 + 1);
    assert!(std::fs::read_to_string(out_dir.join("summary.txt")).unwrap().contains("jensen-lower"));
}
