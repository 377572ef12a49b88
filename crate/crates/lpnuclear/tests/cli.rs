//! End-to-end checks of the binary: exit codes, output formats, determinism,
//! and the environment override.

use std::path::PathBuf;
use std::process::{Command, Output};

use lpnuclear::{find_entry, parse_spec, serialize_spec};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_lpnuclear"))
}

fn write_entry(dir: &tempfile::TempDir, name: &str) -> PathBuf {
    let entry = find_entry(name).expect("gallery name");
    let path = dir.path().join(format!("{name}.json"));
    std::fs::write(&path, entry.source).unwrap();
    path
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("binary runs")
}

#[test]
fn verdicts_become_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let nuclear = write_entry(&dir, "equal-shift");
    let rejected = write_entry(&dir, "equal-diverge");

    let out = run(bin().arg("analyze").arg(&nuclear));
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("verdict        Nuclear"));
    assert!(text.contains("certified bound"));

    let out = run(bin().arg("analyze").arg(&rejected));
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8(out.stdout).unwrap().contains("verdict        NotNuclear"));
}

#[test]
fn usage_errors_stay_out_of_the_verdict_range() {
    let out = run(bin().arg("analyze"));
    assert_eq!(out.status.code(), Some(3));

    let out = run(bin().arg("no-such-command"));
    assert_eq!(out.status.code(), Some(3));

    let out = run(bin().arg("analyze").arg("/definitely/not/here.json"));
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8(out.stderr).unwrap().contains("cannot read"));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{ not json").unwrap();
    let out = run(bin().arg("analyze").arg(&bad));
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(run(bin().arg("--help")).status.code(), Some(0));
    assert_eq!(run(bin().arg("--version")).status.code(), Some(0));
    assert_eq!(run(bin().args(["analyze", "--help"])).status.code(), Some(0));
}

#[test]
fn json_reports_are_deterministic_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_entry(&dir, "comp-shift-qlessp");
    let args = ["--oracle", "--seed", "11", "--format", "json"];
    let first = run(bin().arg("analyze").arg(&path).args(args));
    let second = run(bin().arg("analyze").arg(&path).args(args));
    assert_eq!(first.status.code(), Some(0));
    assert_eq!(first.stdout, second.stdout, "equal seeds must give identical bytes");

    let parsed: serde_json::Value = serde_json::from_slice(&first.stdout).unwrap();
    assert_eq!(parsed["verdict"], "nuclear");
    assert!(parsed["oracle"].is_object());

    // A different seed still reports the same verdict.
    let other = run(bin().arg("analyze").arg(&path).args(["--oracle", "--seed", "12"]));
    assert_eq!(other.status.code(), Some(0));
}

#[test]
fn truncation_resolves_flag_over_env_over_default() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_entry(&dir, "equal-shift");

    let out = run(bin().arg("analyze").arg(&path));
    assert!(String::from_utf8(out.stdout).unwrap().contains("truncation 64"));

    let out = run(bin().arg("analyze").arg(&path).env("LPNUCLEAR_TRUNCATION", "16"));
    assert!(String::from_utf8(out.stdout).unwrap().contains("truncation 16"));

    let out = run(bin()
        .arg("analyze")
        .arg(&path)
        .env("LPNUCLEAR_TRUNCATION", "16")
        .args(["--truncation", "24"]));
    assert!(String::from_utf8(out.stdout).unwrap().contains("truncation 24"));
}

#[test]
fn gallery_lists_and_reruns_clean() {
    let out = run(bin().arg("gallery"));
    assert_eq!(out.status.code(), Some(0));
    let listing = String::from_utf8(out.stdout).unwrap();
    assert!(listing.lines().count() >= 18);
    assert!(listing.contains("equal-shift"));

    let out = run(bin().args(["gallery", "--run"]));
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let report = String::from_utf8(out.stdout).unwrap();
    assert!(report.contains("all 18 entries match their recorded outcomes"));
    assert!(!report.contains("FAIL"));
}

#[test]
fn witness_prints_the_family_or_refuses() {
    let dir = tempfile::tempdir().unwrap();
    let block = write_entry(&dir, "nonatomic-block");
    let out = run(bin().arg("witness").arg(&block));
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("certified ratio floor"));
    assert!(text.lines().filter(|l| l.starts_with("level")).count() == 10);

    // No non-atomic support: the witness construction must refuse.
    let tail_only = write_entry(&dir, "equal-shift");
    let out = run(bin().arg("witness").arg(&tail_only));
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn spec_files_round_trip_through_the_parser() {
    for name in ["equal-shift", "mixed-fan-shift", "nonatomic-mapped-blocks", "zero-op"] {
        let entry = find_entry(name).unwrap();
        let spec = parse_spec(entry.source).unwrap();
        let rendered = serialize_spec(&spec);
        let reparsed = parse_spec(&rendered).unwrap();
        assert_eq!(spec, reparsed, "{name} drifts through serialize/parse");
    }
}
