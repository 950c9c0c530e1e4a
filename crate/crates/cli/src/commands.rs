//! One function per subcommand; each returns the report, its assertions
//! and any extra artifacts.

use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};

use channelwave::channel::{ChannelQuadrature, ExponentSet};
use channelwave::error::{Error, Result};
use channelwave::experiments::{
    estimate_constant, forcing_decay, isometry_sweep, lemma_sweeps, oracle_study, single_channel_decay, DecayOptions,
    EnsembleSpec, ExperimentReport, ReportRow, SweepOptions,
};
use channelwave::exterior::{
    calibration_family, free_exterior_norm, lipschitz_check, perturbed, picard_solve, PicardOptions, PicardTrace,
};

use crate::config::{Command, RunConfig};

/// A checked condition; the run exits 1 if any fails.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Assertion {
    pub name: String,
    pub value: f64,
    /// `<=` or `>=`
    pub relation: String,
    pub threshold: f64,
    pub pass: bool,
}

impl Assertion {
    pub fn at_most(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self { name: name.into(), value, relation: "<=".into(), threshold, pass: value <= threshold }
    }

    pub fn at_least(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self { name: name.into(), value, relation: ">=".into(), threshold, pass: value >= threshold }
    }

    pub fn holds(name: impl Into<String>, ok: bool) -> Self {
        Self { name: name.into(), value: ok as u8 as f64, relation: ">=".into(), threshold: 1.0, pass: ok }
    }
}

pub enum Artifact {
    Json(&'static str, Value),
    Picard(Box<channelwave::exterior::ExteriorSolution>, PicardTrace),
}

pub struct Outcome {
    pub report: ExperimentReport,
    pub assertions: Vec<Assertion>,
    /// Deterministic extra fields for summary.json.
    pub extra: Value,
    /// Non-deterministic notes for run.log.
    pub log: Vec<String>,
    pub artifacts: Vec<Artifact>,
}

impl Outcome {
    fn new(report: ExperimentReport, assertions: Vec<Assertion>) -> Self {
        Self { report, assertions, extra: Value::Null, log: Vec::new(), artifacts: Vec::new() }
    }

    pub fn passed(&self) -> bool {
        self.assertions.iter().all(|a| a.pass)
    }
}

impl Artifact {
    pub fn write(&self, dir: &Path) -> Result<Vec<String>> {
        match self {
            Artifact::Json(name, v) => {
                std::fs::write(dir.join(name), serde_json::to_string_pretty(v)? + "\n")?;
                Ok(vec![name.to_string()])
            }
            Artifact::Picard(sol, trace) => {
                trace.write_json(&dir.join("trace.json"))?;
                sol.field.write_csv(&dir.join("solution.csv"))?;
                Ok(vec!["trace.json".into(), "solution.csv".into()])
            }
        }
    }
}

pub fn execute(cfg: &RunConfig) -> Result<Outcome> {
    let cmd = cfg.command.ok_or_else(|| Error::Config("no command".into()))?;
    match cmd {
        Command::FreeDecay => free_decay(cfg),
        Command::ForcingDecay => forcing(cfg),
        Command::MainConstant => main_constant(cfg),
        Command::LemmaSweeps => sweeps(cfg),
        Command::Isometry => isometry(cfg),
        Command::Picard => picard(cfg),
        Command::OracleValidate => oracle(cfg),
    }
}

fn decay_options(cfg: &RunConfig) -> DecayOptions {
    DecayOptions { resolution: cfg.resolution(), ..DecayOptions::default() }
}

fn fit_assertions(report: &ExperimentReport) -> Vec<Assertion> {
    report
        .summary
        .fits
        .iter()
        .map(|f| Assertion::at_most(format!("fit {}: |slope - {:.4}|", f.name, f.predicted), (f.slope - f.predicted).abs(), f.tolerance))
        .collect()
}

fn free_decay(cfg: &RunConfig) -> Result<Outcome> {
    let e = ExponentSet::standard(cfg.d, cfg.beta)?;
    let report = single_channel_decay(&e, cfg.k, cfg.offsets(), &decay_options(cfg))?;
    let mut a = fit_assertions(&report);
    if a.is_empty() {
        a.push(Assertion::holds("offset range long enough for a fit", false));
    }
    Ok(Outcome::new(report, a))
}

fn forcing(cfg: &RunConfig) -> Result<Outcome> {
    let e = ExponentSet::standard(cfg.d, cfg.beta)?;
    let report = forcing_decay(&e, cfg.k, cfg.offsets(), &decay_options(cfg))?;
    let mut a = fit_assertions(&report);
    if a.is_empty() {
        a.push(Assertion::holds("offset range long enough for a fit", false));
    }
    Ok(Outcome::new(report, a))
}

fn main_constant(cfg: &RunConfig) -> Result<Outcome> {
    let mut spec = EnsembleSpec::new(cfg.seed, cfg.count(), cfg.family, cfg.d, cfg.beta)?;
    spec.resolution = cfg.resolution();
    let report = estimate_constant(&spec)?;
    let m = |n: &str| report.metric(n).unwrap_or(f64::INFINITY);
    let a = vec![
        Assertion::at_most("max ratio change under ensemble doubling", m("count_doubling"), 0.10),
        Assertion::at_most("max ratio change under resolution doubling", m("resolution_doubling"), 0.10),
    ];
    Ok(Outcome::new(report, a))
}

/// `max(other) / max(base)` of two groups.
pub fn max_ratio(report: &ExperimentReport, base: &str, other: &str) -> f64 {
    let get = |g: &str| report.stats(g).and_then(|s| s.max).unwrap_or(f64::NAN);
    get(other) / get(base)
}

fn within_factor(name: String, x: f64, factor: f64) -> Assertion {
    let spread = if x > 0.0 { x.max(1.0 / x) } else { f64::INFINITY };
    Assertion::at_most(name, spread, factor)
}

fn sweeps(cfg: &RunConfig) -> Result<Outcome> {
    let opts = SweepOptions {
        seed: cfg.seed,
        profiles: cfg.count(),
        resolution: cfg.resolution(),
        ..SweepOptions::default()
    };
    let report = lemma_sweeps(&opts)?;
    Ok(Outcome::new(report.clone(), sweep_assertions(&report, &opts)))
}

pub fn sweep_assertions(report: &ExperimentReport, opts: &SweepOptions) -> Vec<Assertion> {
    let mut a = Vec::new();
    for &gamma in &opts.gammas {
        for kind in ["sharp", "smooth", "cutoff"] {
            let g0 = format!("{kind}/{gamma}/0");
            let max = report.stats(&g0).and_then(|s| s.max).unwrap_or(f64::INFINITY);
            a.push(Assertion::holds(format!("{g0}: ratios bounded (max {max:.4})"), max.is_finite()));
            let what = if kind == "cutoff" { "enlarged family" } else { "resolution doubling" };
            let x = max_ratio(report, &g0, &format!("{kind}/{gamma}/1"));
            a.push(within_factor(format!("{kind}/{gamma}: max ratio factor under {what}"), x, 2.0));
        }
    }
    a.extend(fit_assertions(report));
    for d in [3, 5] {
        for q in [2.0f64, 4.0] {
            let g0 = format!("shell/d{d}/q{q}/0");
            let max = report.stats(&g0).and_then(|s| s.max).unwrap_or(f64::INFINITY);
            a.push(Assertion::holds(format!("{g0}: ratios bounded (max {max:.4})"), max.is_finite()));
            let m = report.metric(&format!("shell/d{d}/q{q}/refinement")).unwrap_or(f64::INFINITY);
            a.push(Assertion::at_most(format!("shell/d{d}/q{q}: change under sample refinement"), m, 0.10));
        }
    }
    a
}

fn isometry(cfg: &RunConfig) -> Result<Outcome> {
    let report = isometry_sweep(cfg.d, cfg.beta, cfg.count(), cfg.seed, cfg.resolution())?;
    let max = report.summary.groups.iter().filter_map(|g| g.max).fold(0.0, f64::max);
    Ok(Outcome::new(report, vec![Assertion::at_most("max isometry defect", max, 1e-2)]))
}

fn oracle(cfg: &RunConfig) -> Result<Outcome> {
    let (report, study) = oracle_study(cfg.d, &cfg.cells, cfg.t_final)?;
    let finest = *study.order.errors.last().unwrap_or(&f64::INFINITY);
    let order = if study.order.flagged { f64::NEG_INFINITY } else { study.order.order };
    let mut out = Outcome::new(
        report,
        vec![
            Assertion::at_most("relative L2 error on the finest grid", finest, 1e-3),
            Assertion::at_least("observed convergence order", order, 1.8),
        ],
    );
    out.extra = json!({"convergence": {
        "cells": study.cells,
        "errors": study.order.errors,
        "pairwise_orders": study.order.pairwise,
        "order": study.order.order,
        "energy_drift": study.energy_drift,
        "warning": study.order.warning,
    }});
    out.log = study.cells.iter().zip(&study.seconds).map(|(n, s)| format!("{n} cells: {s:.3} s")).collect();
    Ok(out)
}

fn picard(cfg: &RunConfig) -> Result<Outcome> {
    let delta = cfg
        .delta
        .ok_or_else(|| Error::Config(format!("no calibrated smallness threshold for d = {}; set `delta`", cfg.d)))?;
    let opts = PicardOptions {
        max_iter: cfg.max_iter,
        tol: cfg.tol,
        threshold: delta,
        spacing: cfg.spacing,
        quadrature: ChannelQuadrature::default(),
    };
    let mut base = calibration_family(cfg.d)?;
    base.sign = cfg.sign;
    let unit = free_exterior_norm(&base, &opts)?;
    let prob = base.scaled(cfg.fraction * delta / unit);
    let (sol, trace) = picard_solve(&prob, &opts)?;
    let mut rows = Vec::new();
    for (i, d) in trace.differences.iter().enumerate() {
        rows.push(ReportRow::new(i, "difference", (i + 1) as f64, String::new(), *d, trace.free_norm));
    }
    for (i, (z, b)) in trace.z_norms.iter().zip(&trace.z_bounds).enumerate() {
        rows.push(ReportRow::new(i, "nonlinear", i as f64, String::new(), *z, *b));
    }
    let mut lip = Vec::new();
    for i in 0..cfg.count() {
        let sign = if i % 2 == 0 { cfg.sign } else { -cfg.sign };
        let a = channelwave::exterior::ExteriorProblem { sign, ..prob.clone() };
        let b = perturbed(&a, i, cfg.perturbation)?;
        let ratio = lipschitz_check(&a, &b, &opts)?;
        lip.push(ratio);
        rows.push(ReportRow::new(i, "lipschitz", i as f64, String::new(), ratio, 1.0));
    }
    let n = rows.len();
    for (i, r) in rows.iter_mut().enumerate().take(n) {
        r.index = i;
    }
    let prov = channelwave::experiments::Provenance {
        experiment: "picard".into(),
        seed: None,
        exponents: None,
        norm_convention: channelwave::channel::NORM_CONVENTION.into(),
        grid: serde_json::to_value(opts)?,
        fit_specs: Vec::new(),
        metric_specs: Vec::new(),
    };
    let report = ExperimentReport::build(rows, prov)?;
    let mut a = vec![
        Assertion::holds(format!("converged in {} iterations", trace.iterations), trace.converged),
        Assertion::at_most("iterations", trace.iterations as f64, 12.0),
        Assertion::at_most("fixed-point residual / tol", trace.residual / cfg.tol, 2.0),
        Assertion::holds("Z-norm of the nonlinearity within its Y bound on every iterate", trace.nonlinear_bound_holds()),
    ];
    if !lip.is_empty() {
        a.push(Assertion::at_most("max Lipschitz ratio", lip.iter().copied().fold(0.0, f64::max), 2.2));
    }
    let mut out = Outcome::new(report, a);
    out.extra = json!({"delta": delta, "free_norm": trace.free_norm, "unit_free_norm": unit, "lipschitz": lip});
    out.artifacts.push(Artifact::Picard(Box::new(sol), trace));
    Ok(out)
}
