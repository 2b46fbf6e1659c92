//! End-to-end checks of the command-line surface: exit codes, run-directory
//! handling, stage commands, report idempotence, and the cross-validation
//! export.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hullopt"))
}

fn fresh_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("hullopt_cli_{name}"));
    let _ = fs::remove_dir_all(&dir);
    dir
}

/// init a small quick run directory
fn init_small(dir: &Path) {
    let out = bin()
        .args([
            "--run-dir",
            dir.to_str().unwrap(),
            "--seed",
            "5",
            "init",
            "--quick",
            "--nx",
            "16",
        ])
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

/// shrink the quick config further so CLI tests stay fast
fn shrink_budgets(dir: &Path) {
    let path = dir.join("pipeline.toml");
    let text = fs::read_to_string(&path).unwrap();
    let text = text
        .replace("initial_count = 21", "initial_count = 8")
        .replace("pop_size = 300", "pop_size = 80")
        .replace("generations = 6", "generations = 3")
        .replace("max_rounds = 2", "max_rounds = 1")
        .replace("max_rounds = 3", "max_rounds = 1")
        .replace("infill_count = 9", "infill_count = 4")
        .replace("max_iters = 40", "max_iters = 8")
        .replace("y_crit = 200", "y_crit = 30")
        .replace("b_crit = 200", "b_crit = 30")
        .replace("schedule = [10]", "schedule = [7]")
        .replace("resample_count = 20", "resample_count = 6")
        .replace("resample_trials = 25", "resample_trials = 8");
    fs::write(&path, text).unwrap();
}

#[test]
fn init_creates_the_run_directory() {
    let dir = fresh_dir("init");
    init_small(&dir);
    assert!(dir.join("hullopt.json").exists());
    assert!(dir.join("model.toml").exists());
    assert!(dir.join("pipeline.toml").exists());
}

#[test]
fn double_init_fails_with_exit_1() {
    let dir = fresh_dir("double_init");
    init_small(&dir);
    let out = bin()
        .args(["--run-dir", dir.to_str().unwrap(), "init", "--quick"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn unknown_flag_prints_usage_and_exits_1() {
    let out = bin().args(["--no-such-flag"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let text = format!(
        "{}{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(
        text.to_lowercase().contains("usage"),
        "no usage text in: {text}"
    );
}

#[test]
fn missing_run_dir_is_a_user_error() {
    let dir = fresh_dir("missing");
    let out = bin()
        .args(["--run-dir", dir.to_str().unwrap(), "sample"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn solve_prints_qois_and_json_parses() {
    let dir = fresh_dir("solve");
    init_small(&dir);
    let out = bin()
        .args([
            "--run-dir",
            dir.to_str().unwrap(),
            "--json",
            "solve",
            "--config",
            "14,8,9,10,7.5",
        ])
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["mass_t"].as_f64().unwrap() > 0.0);
    assert!(v["n_y"].as_u64().is_some());

    // a non-member thickness is a domain error: exit 1
    let out = bin()
        .args([
            "--run-dir",
            dir.to_str().unwrap(),
            "solve",
            "--config",
            "14,8,9,10,7.6",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn lock_file_blocks_concurrent_invocations() {
    let dir = fresh_dir("lock");
    init_small(&dir);
    fs::write(dir.join(".lock"), "12345\n").unwrap();
    let out = bin()
        .args(["--run-dir", dir.to_str().unwrap(), "sample"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    fs::remove_file(dir.join(".lock")).unwrap();
    let out = bin()
        .args(["--run-dir", dir.to_str().unwrap(), "sample"])
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(!dir.join(".lock").exists(), "lock not released");
}

#[test]
fn staged_commands_then_idempotent_report() {
    let dir = fresh_dir("staged");
    init_small(&dir);
    shrink_budgets(&dir);
    let run = |args: &[&str]| {
        let out = bin()
            .args(["--run-dir", dir.to_str().unwrap()])
            .args(args)
            .output()
            .unwrap();
        assert!(
            out.status.success(),
            "command {args:?} failed: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        String::from_utf8_lossy(&out.stdout).into_owned()
    };
    run(&["sample"]);
    run(&["fit"]);
    assert!(dir.join("surrogates/current/manifest.json").exists());
    run(&["moo"]);
    run(&["bo"]);
    run(&["pds"]);
    run(&["reparam"]);
    let summary = run(&["--json", "report"]);
    assert!(summary.contains("penalized"));
    assert!(dir.join("reports/hf_history.csv").exists());
    assert!(dir.join("reports/incumbent_stages.csv").exists());

    // rerunning report is bit-identical
    let first = fs::read(dir.join("reports/hf_history.csv")).unwrap();
    run(&["report", "--svg"]);
    assert_eq!(first, fs::read(dir.join("reports/hf_history.csv")).unwrap());
    assert!(dir.join("reports/hf_history.svg").exists());

    // crossval emits the distribution table
    run(&["crossval", "--folds", "4", "--ranks", "2,4"]);
    let cv = fs::read_to_string(dir.join("reports/crossval.csv")).unwrap();
    assert!(cv.lines().count() > 1);
    assert!(cv.starts_with("rank,qoi,n,min,q1,median,q3,max"));
}
