use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use pclm_harness::metrics::{CERTIFICATE_HEADER, METRICS_HEADER};

fn pclm(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pclm"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) {
    fs::write(dir.join(name), text).unwrap();
}

const SMALL_QP: &str = "problem = qp\nn = 6\nl = 3\nseed = 5\nbeta = 1\niters = 300\n";

#[test]
fn run_writes_expected_headers() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "small.cfg", SMALL_QP);
    let out = pclm(&["run", "small.cfg", "--out", "res"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let metrics = fs::read_to_string(dir.path().join("res/small_metrics.csv")).unwrap();
    assert_eq!(metrics.lines().next().unwrap(), METRICS_HEADER.join(","));
    assert_eq!(metrics.lines().count(), 301);
    let certs = fs::read_to_string(dir.path().join("res/small_certificates.csv")).unwrap();
    assert_eq!(certs.lines().next().unwrap(), CERTIFICATE_HEADER.join(","));
    assert_eq!(certs.lines().count(), 301);
    let summary = fs::read_to_string(dir.path().join("res/small_summary.txt")).unwrap();
    assert!(summary.contains("PASS"));
    assert!(!summary.contains("FAIL"));
}

#[test]
fn same_seed_gives_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "det.cfg", "problem = two_block_qp\nn1 = 5\nn2 = 4\nl = 3\nseed = 9\nbeta = 1\niters = 200\n");
    for out in ["a", "b"] {
        let res = pclm(&["run", "det.cfg", "--out", out], dir.path());
        assert_eq!(res.status.code(), Some(0));
    }
    for file in ["det_metrics.csv", "det_certificates.csv", "det_summary.txt"] {
        let a = fs::read(dir.path().join("a").join(file)).unwrap();
        let b = fs::read(dir.path().join("b").join(file)).unwrap();
        assert_eq!(a, b, "{file} differs");
    }
    // a different seed is a different instance
    let res = pclm(&["run", "det.cfg", "--out", "c", "--seed", "10"], dir.path());
    assert_eq!(res.status.code(), Some(0));
    let a = fs::read(dir.path().join("a/det_metrics.csv")).unwrap();
    let c = fs::read(dir.path().join("c/det_metrics.csv")).unwrap();
    assert_ne!(a, c);
}

#[test]
fn missing_beta_is_a_configuration_error() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "nobeta.cfg", "problem = qp\niters = 10\n");
    let out = pclm(&["run", "nobeta.cfg"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("beta"));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn unknown_key_is_a_configuration_error() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "typo.cfg", "problem = qp\nbeta = 1\nbetta = 2\n");
    assert_eq!(pclm(&["validate", "typo.cfg"], dir.path()).status.code(), Some(2));
}

#[test]
fn validate_reports_violated_conditions() {
    let dir = tempfile::tempdir().unwrap();
    // zero strong convexity with the scaled metric breaks the O(1/k²) growth condition
    write(dir.path(), "bad.cfg", "problem = qp\nn = 4\nl = 2\nbeta = 1\nrate = k2\nmetric = scaled_identity\n");
    let out = pclm(&["validate", "bad.cfg"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stdout).contains("scaled-metric-growth"));
    // and the run refuses it unless overridden
    assert_eq!(pclm(&["run", "bad.cfg", "--iters", "20"], dir.path()).status.code(), Some(2));
    let forced = pclm(&["run", "bad.cfg", "--iters", "20", "--override-validation"], dir.path());
    assert_ne!(forced.status.code(), Some(2));

    write(dir.path(), "good.cfg", SMALL_QP);
    assert_eq!(pclm(&["validate", "good.cfg"], dir.path()).status.code(), Some(0));
}

#[test]
fn failed_expectation_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "hope.cfg", &format!("{SMALL_QP}expect_slope = -5\n"));
    let out = pclm(&["run", "hope.cfg"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL"));
}

#[test]
fn compare_twice_with_penalty() {
    let dir = tempfile::tempdir().unwrap();
    let base = "problem = two_block_qp\nn1 = 5\nn2 = 5\nl = 4\nseed = 2\nbeta = 1\n";
    write(dir.path(), "twice.cfg", &format!("{base}variant = twice\n"));
    write(dir.path(), "penalty.cfg", &format!("{base}variant = penalty\n"));
    write(dir.path(), "once.cfg", &format!("{base}variant = once\n"));
    let out = pclm(&["compare", "twice.cfg", "penalty.cfg"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    assert!(String::from_utf8_lossy(&out.stdout).contains("PASS"));
    let out = pclm(&["compare", "twice.cfg", "once.cfg", "--iters", "50"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn concurrent_runs_match_single_runs() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "one.cfg", SMALL_QP);
    write(dir.path(), "two.cfg", "problem = chain_qp\nm = 3\ndim = 3\nl = 2\nbeta = 1\niters = 200\n");
    assert_eq!(pclm(&["run", "one.cfg", "two.cfg", "--out", "both"], dir.path()).status.code(), Some(0));
    assert_eq!(pclm(&["run", "two.cfg", "--out", "single"], dir.path()).status.code(), Some(0));
    let a = fs::read(dir.path().join("both/two_metrics.csv")).unwrap();
    let b = fs::read(dir.path().join("single/two_metrics.csv")).unwrap();
    assert_eq!(a, b);
}
