//! Batch front end for the channelwave experiments.

pub mod commands;
pub mod config;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde_json::json;

use channelwave::experiments::input_hash;

pub use commands::{execute, Assertion, Outcome};
pub use config::{Command, ConfigError, RunConfig};

/// Process exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass = 0,
    Fail = 1,
    Usage = 2,
}

pub struct RunResult {
    pub dir: PathBuf,
    pub outcome: Outcome,
    pub table: String,
}

/// `<out>/<command>-<input hash>` for a resolved config.
pub fn run_dir(out: &Path, cfg: &RunConfig) -> PathBuf {
    let name = cfg.command.map(|c| c.name()).unwrap_or("run");
    out.join(format!("{name}-{}", input_hash(cfg)))
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

/// Executes the command and writes summary.json, rows.csv, fig_*.dat,
/// command-specific files and run.log into [`run_dir`].
pub fn run(cfg: &RunConfig, out: &Path) -> channelwave::Result<RunResult> {
    let dir = run_dir(out, cfg);
    let mut log = format!("{} start {}\n", now(), dir.display());
    let started = std::time::Instant::now();
    let outcome = execute(cfg)?;
    std::fs::create_dir_all(&dir)?;
    let mut files = vec!["summary.json".to_string(), "rows.csv".to_string()];
    outcome.report.write_rows_csv(&dir.join("rows.csv"))?;
    files.extend(outcome.report.write_dat_files(&dir)?);
    for a in &outcome.artifacts {
        files.extend(a.write(&dir)?);
    }
    let summary = json!({
        "config": cfg,
        "passed": outcome.passed(),
        "assertions": outcome.assertions,
        "summary": outcome.report.summary,
        "provenance": outcome.report.provenance,
        "extra": outcome.extra,
        "files": files,
    });
    std::fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&summary)? + "\n")?;
    for line in &outcome.log {
        let _ = writeln!(log, "{} {line}", now());
    }
    let _ = writeln!(
        log,
        "{} done in {:.3} s, {}",
        now(),
        started.elapsed().as_secs_f64(),
        if outcome.passed() { "pass" } else { "FAIL" }
    );
    std::fs::write(dir.join("run.log"), log)?;
    let table = summary_table(cfg, &outcome);
    Ok(RunResult { dir, outcome, table })
}

fn fmt(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.4e}")).unwrap_or_else(|| "-".into())
}

/// One-screen text summary.
pub fn summary_table(cfg: &RunConfig, o: &Outcome) -> String {
    let mut s = String::new();
    let name = cfg.command.map(|c| c.name()).unwrap_or("?");
    let _ = writeln!(s, "{name}  d={} beta={} seed={} count={}", cfg.d, cfg.beta, cfg.seed, cfg.count());
    let groups = &o.report.summary.groups;
    if !groups.is_empty() {
        let _ = writeln!(s, "{:<28} {:>5} {:>11} {:>11} {:>11}", "group", "n", "max", "q90", "mean");
        for g in groups.iter().take(24) {
            let _ = writeln!(s, "{:<28} {:>5} {:>11} {:>11} {:>11}", g.group, g.count, fmt(g.max), fmt(g.q90), fmt(g.mean));
        }
        if groups.len() > 24 {
            let _ = writeln!(s, "... {} more groups in summary.json", groups.len() - 24);
        }
    }
    for f in &o.report.summary.fits {
        let _ = writeln!(
            s,
            "fit {:<24} slope {:+.4} ± {:.4} (pred {:+.4} ± {}) {}",
            f.name,
            f.slope,
            f.half_width,
            f.predicted,
            f.tolerance,
            if f.pass { "ok" } else { "off" }
        );
    }
    if let Some(conv) = o.extra.get("convergence") {
        let _ = writeln!(s, "{:>8} {:>12} {:>8}", "cells", "rel. error", "order");
        let cells = conv["cells"].as_array().cloned().unwrap_or_default();
        let errs = conv["errors"].as_array().cloned().unwrap_or_default();
        let ords = conv["pairwise_orders"].as_array().cloned().unwrap_or_default();
        for (i, (c, e)) in cells.iter().zip(&errs).enumerate() {
            let ord = if i == 0 { "-".to_string() } else { format!("{:.3}", ords[i - 1].as_f64().unwrap_or(f64::NAN)) };
            let _ = writeln!(s, "{:>8} {:>12.4e} {:>8}", c.as_u64().unwrap_or(0), e.as_f64().unwrap_or(f64::NAN), ord);
        }
    }
    for a in &o.assertions {
        let _ = writeln!(
            s,
            "[{}] {}: {:.4e} {} {}",
            if a.pass { "pass" } else { "FAIL" },
            a.name,
            a.value,
            a.relation,
            a.threshold
        );
    }
    s
}
