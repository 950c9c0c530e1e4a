//! Run configuration: a JSON document, `key=value` overrides and flags,
//! resolved into one record that every artifact embeds.

use std::path::Path;

use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use channelwave::experiments::ProfileFamily;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    FreeDecay,
    ForcingDecay,
    MainConstant,
    LemmaSweeps,
    Isometry,
    Picard,
    OracleValidate,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::FreeDecay => "free-decay",
            Command::ForcingDecay => "forcing-decay",
            Command::MainConstant => "main-constant",
            Command::LemmaSweeps => "lemma-sweeps",
            Command::Isometry => "isometry",
            Command::Picard => "picard",
            Command::OracleValidate => "oracle-validate",
        }
    }
}

/// Fully resolved configuration. Options left `None` in a config file are
/// filled with the command's defaults by [`RunConfig::resolve`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub command: Option<Command>,
    pub seed: u64,
    pub d: usize,
    pub beta: f64,
    pub count: Option<usize>,
    pub jmin: Option<i32>,
    pub jmax: Option<i32>,
    pub resolution: Option<usize>,
    /// Channel of the decay experiments.
    pub k: i32,
    pub family: ProfileFamily,
    /// Cell counts of the nested finite-difference grids.
    pub cells: Vec<usize>,
    pub t_final: f64,
    /// Free Y-norm of the Picard data as a fraction of the threshold.
    pub fraction: f64,
    /// Smallness threshold; the calibrated value when absent.
    pub delta: Option<f64>,
    pub sign: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub spacing: f64,
    /// Height of the Lipschitz perturbations.
    pub perturbation: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            command: None,
            seed: 1,
            d: 3,
            beta: 1.0,
            count: None,
            jmin: None,
            jmax: None,
            resolution: None,
            k: 0,
            family: ProfileFamily::MultiScaleSum,
            cells: vec![400, 800, 1600],
            t_final: 2.0,
            fraction: 0.9,
            delta: None,
            sign: -1.0,
            tol: 1e-8,
            max_iter: 12,
            spacing: 1.0 / 16.0,
            perturbation: 0.02,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {msg}")]
    Read { path: String, msg: String },
    #[error("malformed config: {0}")]
    Parse(String),
    #[error("override `{0}` is not of the form key=value")]
    Override(String),
    #[error("no command given")]
    NoCommand,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Value, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Read { path: path.display().to_string(), msg: e.to_string() })?;
        let v: Value = serde_json::from_str(&text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        if !v.is_object() {
            return Err(ConfigError::Parse("the config must be a JSON object".into()));
        }
        Ok(v)
    }

    /// Applies `key=value` pairs; values are read as JSON, else as strings.
    pub fn apply_overrides(doc: &mut Value, overrides: &[String]) -> Result<(), ConfigError> {
        let map = doc.as_object_mut().expect("config document is an object");
        for o in overrides {
            let (k, v) = o.split_once('=').ok_or_else(|| ConfigError::Override(o.clone()))?;
            let k = k.trim();
            if k.is_empty() {
                return Err(ConfigError::Override(o.clone()));
            }
            let value = serde_json::from_str(v).unwrap_or_else(|_| Value::String(v.to_string()));
            map.insert(k.replace('-', "_"), value);
        }
        Ok(())
    }

    pub fn from_value(doc: Value) -> Result<Self, ConfigError> {
        serde_json::from_value(doc).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    /// Fills the per-command defaults.
    pub fn resolve(mut self) -> Result<Self, ConfigError> {
        let cmd = self.command.ok_or(ConfigError::NoCommand)?;
        let (count, jmin, jmax, res) = match cmd {
            Command::FreeDecay => (1, self.k - 8, self.k + 8, 32),
            Command::ForcingDecay => (1, self.k - 8, self.k - 1, 32),
            Command::MainConstant => (50, 0, 0, 16),
            Command::LemmaSweeps => (100, 0, 0, 32),
            Command::Isometry => (20, 0, 0, 256),
            Command::Picard => (10, 0, 0, 0),
            Command::OracleValidate => (1, 0, 0, 0),
        };
        self.count.get_or_insert(count);
        self.jmin.get_or_insert(jmin);
        self.jmax.get_or_insert(jmax);
        self.resolution.get_or_insert(res);
        if cmd == Command::Picard && self.delta.is_none() {
            self.delta = channelwave::exterior::PicardOptions::for_dimension(self.d).ok().map(|o| o.threshold);
        }
        Ok(self)
    }

    pub fn count(&self) -> usize {
        self.count.unwrap_or(1)
    }

    pub fn resolution(&self) -> usize {
        self.resolution.unwrap_or(32)
    }

    pub fn offsets(&self) -> (i32, i32) {
        (self.jmin.unwrap_or(self.k) - self.k, self.jmax.unwrap_or(self.k) - self.k)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_parse_json_values() {
        let mut doc = serde_json::json!({"d": 5});
        RunConfig::apply_overrides(&mut doc, &["beta=0.75".into(), "family=dyadic-bump".into(), "max-iter=8".into()])
            .unwrap();
        let c = RunConfig::from_value(doc).unwrap();
        assert_eq!((c.d, c.beta, c.max_iter), (5, 0.75, 8));
        assert_eq!(c.family, ProfileFamily::DyadicBump);
        assert!(RunConfig::apply_overrides(&mut serde_json::json!({}), &["beta".into()]).is_err());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::from_value(serde_json::json!({"bta": 1.0})).is_err());
    }

    #[test]
    fn resolution_fills_command_defaults() {
        let c = RunConfig { command: Some(Command::ForcingDecay), k: 2, ..Default::default() }.resolve().unwrap();
        assert_eq!(c.offsets(), (-8, -1));
        assert_eq!(c.resolution(), 32);
        let c = RunConfig { command: Some(Command::Picard), ..Default::default() }.resolve().unwrap();
        assert!(c.delta.unwrap() > 0.0);
        assert!(RunConfig::default().resolve().is_err());
    }
}
