use std::path::Path;
use std::process::{Command, Output};

fn cep_place(args: &[&str]) -> Output {
    let out = Command::new(env!("CARGO_BIN_EXE_cep-place")).args(args).output().unwrap();
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn suite_solve_run_and_complexity() {
    let dir = tempfile::tempdir().unwrap();
    let suite = dir.path().join("suite");
    cep_place(&["generate-suite", "--out", s(&suite), "--max-vertices", "8", "--seed", "3"]);
    assert!(suite.join("manifest.json").exists());
    assert!(suite.join("8_1_3.json").exists());
    assert!(!suite.join("10_1_1.json").exists());

    let dag = suite.join("6_1_2.json");
    let trace = dir.path().join("trace.csv");
    let out = cep_place(&[
        "solve", "--dag", s(&dag), "--solver", "ga", "--min-generations", "300", "--seed", "9",
        "--trace", s(&trace), "--headroom",
    ]);
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["solver"], "ga");
    let generations = report["stats"]["generations"].as_u64().unwrap();
    assert!(generations >= 300);
    let rows = std::fs::read_to_string(&trace).unwrap();
    assert_eq!(rows.lines().next(), Some("generation,best_fitness"));
    assert_eq!(rows.lines().count() as u64, generations + 2);

    let bf = cep_place(&["solve", "--dag", s(&dag), "--solver", "bf", "--setup", "conservative"]);
    let bf: serde_json::Value = serde_json::from_slice(&bf.stdout).unwrap();
    let exhaustive = cep_place(&["solve", "--dag", s(&dag), "--solver", "bf", "--setup", "conservative", "--exhaustive"]);
    let exhaustive: serde_json::Value = serde_json::from_slice(&exhaustive.stdout).unwrap();
    assert_eq!(bf["makespan_ms"], exhaustive["makespan_ms"]);

    let config = dir.path().join("study.json");
    std::fs::write(
        &config,
        r#"{"suite_manifest": "suite/manifest.json", "sizes": [4, 6], "datasets": ["campus-lan"],
            "rates": [1000], "ga": {"min_generations": 200}, "random_trials": 300}"#,
    )
    .unwrap();
    let results = dir.path().join("out");
    let summary = cep_place(&["run", "--config", s(&config), "--out", s(&results)]);
    let summary = String::from_utf8(summary.stdout).unwrap();
    assert_eq!(summary.lines().count(), 4);
    assert!(results.join("runs.csv").exists());

    let fit = cep_place(&["complexity", "--runs", s(&results.join("runs.csv")), "--solver", "random"]);
    let fit: serde_json::Value = serde_json::from_slice(&fit.stdout).unwrap();
    assert!(fit["slope"].is_number());
}

#[test]
fn bad_input_fails_cleanly() {
    let out = Command::new(env!("CARGO_BIN_EXE_cep-place"))
        .args(["solve", "--dag", "/nonexistent.json"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}
