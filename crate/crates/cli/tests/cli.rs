use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_channelwave"))
}

fn only_dir(out: &Path) -> std::path::PathBuf {
    let mut dirs: Vec<_> = std::fs::read_dir(out).unwrap().map(|e| e.unwrap().path()).collect();
    assert_eq!(dirs.len(), 1, "{dirs:?}");
    dirs.pop().unwrap()
}

#[test]
fn missing_config_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let st = bin().args(["free-decay", "--config", "/does/not/exist.json", "--out"]).arg(tmp.path()).status().unwrap();
    assert_eq!(st.code(), Some(2));
}

#[test]
fn bad_overrides_and_keys_are_usage_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let st = bin().args(["oracle-validate", "nonsense", "--out"]).arg(tmp.path()).status().unwrap();
    assert_eq!(st.code(), Some(2));
    let st = bin().args(["oracle-validate", "colour=blue", "--out"]).arg(tmp.path()).status().unwrap();
    assert_eq!(st.code(), Some(2));
    let st = bin().args(["no-such-command"]).status().unwrap();
    assert_eq!(st.code(), Some(2));
}

#[test]
fn oracle_validate_prints_order_table_and_is_idempotent() {
    let tmp = tempfile::tempdir().unwrap();
    let run = || bin().args(["oracle-validate", "--d", "5", "--out"]).arg(tmp.path()).output().unwrap();
    let first = run();
    assert_eq!(first.status.code(), Some(0), "{}", String::from_utf8_lossy(&first.stderr));
    let text = String::from_utf8(first.stdout).unwrap();
    assert!(text.contains("cells") && text.contains("order"), "{text}");
    let dir = only_dir(tmp.path());
    let summary = std::fs::read(dir.join("summary.json")).unwrap();
    let rows = std::fs::read(dir.join("rows.csv")).unwrap();
    let log = std::fs::read_to_string(dir.join("run.log")).unwrap();
    assert!(log.contains("done"));
    let second = run();
    assert_eq!(second.status.code(), Some(0));
    assert_eq!(only_dir(tmp.path()), dir);
    assert_eq!(std::fs::read(dir.join("summary.json")).unwrap(), summary);
    assert_eq!(std::fs::read(dir.join("rows.csv")).unwrap(), rows);
    let v: serde_json::Value = serde_json::from_slice(&summary).unwrap();
    assert_eq!(v["config"]["d"], 5);
    assert_eq!(v["config"]["command"], "oracle-validate");
    assert_eq!(v["passed"], true);
}

#[test]
fn config_file_flags_and_failing_assertion() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("cfg.json");
    // a single coarse grid pair cannot reach the error target
    std::fs::write(&cfg, r#"{"d": 3, "cells": [64, 128, 256], "t_final": 1.0}"#).unwrap();
    let out = tmp.path().join("out");
    let o = bin().args(["oracle-validate", "--config"]).arg(&cfg).arg("--out").arg(&out).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("failed: relative L2 error"));
    let dir = only_dir(&out);
    assert!(dir.file_name().unwrap().to_str().unwrap().starts_with("oracle-validate-"));
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.join("summary.json")).unwrap()).unwrap();
    assert_eq!(v["config"]["cells"], serde_json::json!([64, 128, 256]));
    assert!(dir.join("fig_oracle_d3.dat").exists());
}

#[test]
fn forcing_decay_rejects_channels_above_the_forcing() {
    let tmp = tempfile::tempdir().unwrap();
    let st = bin().args(["forcing-decay", "--jmin=-4", "--jmax", "2", "--out"]).arg(tmp.path()).status().unwrap();
    assert_eq!(st.code(), Some(2));
}

#[test]
fn free_decay_end_to_end() {
    let tmp = tempfile::tempdir().unwrap();
    let o = bin()
        .args(["free-decay", "--d", "3", "--beta", "0.75", "--jmin=-8", "--jmax", "8", "--out"])
        .arg(tmp.path())
        .env("CHANNELWAVE_THREADS", "2")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let dir = only_dir(tmp.path());
    let rows = std::fs::read_to_string(dir.join("rows.csv")).unwrap();
    assert_eq!(rows.lines().count(), 18);
    assert!(dir.join("fig_channel.dat").exists());
}

#[test]
fn thread_variable_is_validated() {
    let st = bin().args(["oracle-validate"]).env("CHANNELWAVE_THREADS", "zero").status().unwrap();
    assert_eq!(st.code(), Some(2));
}
