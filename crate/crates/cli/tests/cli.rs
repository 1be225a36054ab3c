use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use avsup_cli::exit_code;
use avsup_cli::export::{read_csv, CSV_COLUMNS};

fn avsup(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_avsup"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("GOOGLE_API_KEY")
        .output()
        .expect("binary runs")
}

fn workspace_file(rel: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../..")
        .join(rel)
        .display()
        .to_string()
}

#[test]
fn help_succeeds() {
    let out = Command::new(env!("CARGO_BIN_EXE_avsup"))
        .arg("--help")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(exit_code::OK));
    assert!(String::from_utf8_lossy(&out.stdout).contains("--paper-scenario"));
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["--paper-scenario", "--period", "0.25", "--dt", "0.1"][..],
        &["--backend", "oracle"],
        &["--paper-scenario", "--backend", "nope"],
        &["--paper-scenario", "--backend", "replay"],
    ] {
        let out = avsup(args, dir.path());
        assert_eq!(out.status.code(), Some(exit_code::USAGE), "{args:?}");
    }
}

#[test]
fn clean_run_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = avsup(
        &["--paper-scenario", "--period", "0.5", "--plots", "--record-transcript"],
        dir.path(),
    );
    assert_eq!(
        out.status.code(),
        Some(exit_code::OK),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = fs::read_to_string(dir.path().join("run.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), CSV_COLUMNS.join(","));
    let rows = read_csv(&dir.path().join("run.csv")).unwrap();
    assert!(rows.iter().any(|r| r.req_id == 2));
    assert!(rows.iter().all(|r| r.collision_flag == 0));
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["csv_schema_version"], 1);
    assert_eq!(summary["summary"]["collided"], false);
    for f in ["speed.svg", "lateral.svg", "topdown.svg", "transcript.jsonl"] {
        assert!(dir.path().join(f).is_file(), "{f}");
    }
}

#[test]
fn replay_reproduces_recorded_run() {
    let rec = tempfile::tempdir().unwrap();
    let out = avsup(&["--paper-scenario", "--record-transcript"], rec.path());
    assert_eq!(out.status.code(), Some(exit_code::OK));
    let transcript = rec.path().join("transcript.jsonl");

    let rep = tempfile::tempdir().unwrap();
    let out = avsup(
        &[
            "--paper-scenario",
            "--backend",
            "replay",
            "--transcript",
            transcript.to_str().unwrap(),
        ],
        rep.path(),
    );
    assert_eq!(
        out.status.code(),
        Some(exit_code::OK),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_eq!(
        fs::read(rec.path().join("run.csv")).unwrap(),
        fs::read(rep.path().join("run.csv")).unwrap()
    );
}

#[test]
fn replay_mismatch_is_backend_failure_with_partial_log() {
    let rec = tempfile::tempdir().unwrap();
    avsup(&["--paper-scenario", "--record-transcript"], rec.path());
    let transcript = rec.path().join("transcript.jsonl");
    let rep = tempfile::tempdir().unwrap();
    let out = avsup(
        &[
            "--paper-scenario",
            "--period",
            "0.25",
            "--backend",
            "replay",
            "--transcript",
            transcript.to_str().unwrap(),
        ],
        rep.path(),
    );
    assert_eq!(out.status.code(), Some(exit_code::BACKEND));
    assert!(rep.path().join("run.csv").is_file());
}

#[test]
fn llm_without_key_exits_four() {
    let dir = tempfile::tempdir().unwrap();
    let out = avsup(&["--paper-scenario", "--backend", "llm"], dir.path());
    assert_eq!(out.status.code(), Some(exit_code::BACKEND));
    assert!(String::from_utf8_lossy(&out.stderr).contains("GOOGLE_API_KEY"));
}

#[test]
fn checked_in_scenario_file_runs() {
    let dir = tempfile::tempdir().unwrap();
    let out = avsup(&["--scenario", &workspace_file("scenarios/reference.json")], dir.path());
    assert_eq!(out.status.code(), Some(exit_code::OK));
    let out = avsup(
        &[
            "--scenario",
            &workspace_file("scenarios/reference.json"),
            "--period",
            "2",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(exit_code::COLLISION));
}

#[test]
fn malformed_scenario_file_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{\"pedestrians\": 3}").unwrap();
    let out = avsup(&["--scenario", bad.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(exit_code::USAGE));
}

#[test]
fn sweep_reports_each_period() {
    let dir = tempfile::tempdir().unwrap();
    let out = avsup(&["--paper-scenario", "--sweep-periods", "0.1,0.25,0.5,2"], dir.path());
    assert_eq!(out.status.code(), Some(exit_code::OK));
    let table = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let collided: Vec<&str> = table.lines().skip(1).map(|l| l.split(',').nth(1).unwrap()).collect();
    assert_eq!(collided, ["0", "0", "0", "1"]);
}
