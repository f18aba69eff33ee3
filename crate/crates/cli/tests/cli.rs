//! End-to-end checks of the phrc binary: exit codes, emitted files, and the
//! printed summaries.

use std::path::Path;
use std::process::{Command, Output};

fn phrc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_phrc"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn svg_count(dir: &Path) -> usize {
    std::fs::read_dir(dir)
        .unwrap()
        .filter(|e| {
            e.as_ref()
                .unwrap()
                .path()
                .extension()
                .is_some_and(|x| x == "svg")
        })
        .count()
}

#[test]
fn run_exports_a_trace_and_its_plots() {
    let dir = tempfile::tempdir().unwrap();
    let out = phrc(&[
        "run",
        "--horizon",
        "2",
        "--out",
        dir.path().to_str().unwrap(),
        "--stem",
        "t",
    ]);
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("rmse"), "summary missing rmse: {text}");
    assert!(dir.path().join("t.csv").is_file());
    assert_eq!(svg_count(dir.path()), 4);
}

#[test]
fn config_file_drives_the_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("s.toml");
    std::fs::write(&cfg, "horizon = 3.0\n").unwrap();
    let out = phrc(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    assert!(stdout(&out).contains("over 3.000 s"));
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "horizn = 3.0\n").unwrap();
    let out = phrc(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("error"));
}

#[test]
fn strict_breach_exits_with_code_two() {
    // The static-bound baseline without the model rides into its constraint
    // during the startup transient.
    let dir = tempfile::tempdir().unwrap();
    let out = phrc(&[
        "run",
        "--variant",
        "iblf",
        "--model-free",
        "--strict",
        "--horizon",
        "5",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2), "stderr: {}", stderr(&out));
    assert!(stderr(&out).contains("constraint"), "stderr: {}", stderr(&out));
}

#[test]
fn tolerant_mode_finishes_and_reports_breaches() {
    let dir = tempfile::tempdir().unwrap();
    let out = phrc(&[
        "run",
        "--variant",
        "iblf",
        "--model-free",
        "--tolerant",
        "--horizon",
        "5",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    assert!(stdout(&out).contains("tolerated breach steps"));
}

#[test]
fn compare_emits_the_full_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let out = phrc(&["compare", "--horizon", "4", "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let text = stdout(&out);
    for needle in ["iblf", "tviblf", "fxt-tviblf"] {
        assert!(text.contains(needle), "table missing {needle}: {text}");
    }
    assert!(dir.path().join("comparison.csv").is_file());
    // Four plots for each of the six rows.
    assert_eq!(svg_count(dir.path()), 24);
}

#[test]
fn check_runs_the_property_suites() {
    let out = phrc(&[
        "check",
        "--seed",
        "7",
        "--samples",
        "50",
        "--lemma-samples",
        "200",
        "--ode-samples",
        "20",
    ]);
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    assert!(stdout(&out).contains("property suites passed"));
}

#[test]
fn bound_prints_the_settling_budget() {
    let out = phrc(&["bound"]);
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("model-based"));
    assert!(text.contains("settling bound"));
}
