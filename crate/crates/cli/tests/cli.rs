use std::path::Path;
use std::process::{Command, Output};

fn bench(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_crouting-bench"))
        .args(args)
        .env_remove("ANN_SEED")
        .output()
        .unwrap()
}

fn ok(args: &[&str]) {
    let out = bench(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn p(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_string()
}

#[test]
fn pipeline_writes_one_row_per_mode_and_efs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let (base, queries, gt, index, csv, report) = (
        p(d, "base.fvecs"),
        p(d, "q.fvecs"),
        p(d, "gt.ivecs"),
        p(d, "a.idx"),
        p(d, "sweep.csv"),
        p(d, "angles.csv"),
    );
    ok(&[
        "synth", "--n", "1500", "--d", "16", "--seed", "1", "--out", &base,
    ]);
    ok(&[
        "synth", "--n", "30", "--d", "16", "--seed", "2", "--out", &queries,
    ]);
    ok(&[
        "ground-truth",
        "--base",
        &base,
        "--queries",
        &queries,
        "--k",
        "10",
        "--out",
        &gt,
    ]);
    ok(&[
        "build", "--base", &base, "--M", "8", "--efc", "40", "--out", &index,
    ]);

    let early = bench(&[
        "sweep",
        "--index",
        &index,
        "--base",
        &base,
        "--queries",
        &queries,
        "--gt",
        &gt,
        "--modes",
        "baseline,crouting",
        "--out",
        &csv,
    ]);
    assert!(!early.status.success());
    assert!(String::from_utf8_lossy(&early.stderr).contains("profile"));

    ok(&["profile", "--index", &index, "--base", &base, "--seed", "3"]);
    ok(&[
        "sweep",
        "--index",
        &index,
        "--base",
        &base,
        "--queries",
        &queries,
        "--gt",
        &gt,
        "--efs",
        "10,20,40",
        "--modes",
        "baseline,crouting,crouting_o",
        "--reps",
        "1",
        "--out",
        &csv,
    ]);
    let text = std::fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], crouting::bench::CSV_HEADER);
    assert_eq!(lines.len(), 1 + 3 * 3);
    for line in &lines[1..4] {
        assert!(line.starts_with("baseline,"));
        assert_eq!(line.split(',').nth(6), Some("1.000000"));
    }

    ok(&[
        "angle-report",
        "--index",
        &index,
        "--base",
        &base,
        "--out",
        &report,
    ]);
    let report = std::fs::read_to_string(&report).unwrap();
    assert_eq!(report.lines().count(), 1 + crouting::profile::PROFILE_BINS);
}

#[test]
fn env_seed_overrides_flag() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b, c) = (p(dir.path(), "a"), p(dir.path(), "b"), p(dir.path(), "c"));
    ok(&["synth", "--n", "10", "--d", "4", "--seed", "5", "--out", &a]);
    let out = Command::new(env!("CARGO_BIN_EXE_crouting-bench"))
        .args(["synth", "--n", "10", "--d", "4", "--seed", "9", "--out", &b])
        .env("ANN_SEED", "5")
        .output()
        .unwrap();
    assert!(out.status.success());
    ok(&["synth", "--n", "10", "--d", "4", "--seed", "9", "--out", &c]);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_ne!(std::fs::read(&a).unwrap(), std::fs::read(&c).unwrap());
}

#[test]
fn bad_input_exits_nonzero_with_diagnostic() {
    let out = bench(&["build", "--no-such-flag"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));

    let out = bench(&[
        "build",
        "--base",
        "/nonexistent.fvecs",
        "--out",
        "/tmp/x.idx",
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));

    let out = bench(&[
        "synth", "--n", "10", "--d", "4", "--metric", "l2", "--out", "/tmp/x",
    ]);
    assert!(!out.status.success());
}
