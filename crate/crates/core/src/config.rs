//! `key = value` run configuration shared by the command-line subcommands.
//!
//! A config file holds one `key = value` pair per line; `#` starts a
//! comment and blank lines are ignored. Every key must appear in [`SCHEMA`]
//! and every value must parse as the key's kind. Later assignments replace
//! earlier ones, which is how command-line flags override the file.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::model::{Optimizer, TrainConfig};
use crate::navctl::NavConfig;
use crate::pipeline::PipelineConfig;
use crate::rfsim::TrialConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValueKind {
    Path,
    Integer,
    Float,
    /// Comma-separated strings.
    List,
    /// `sgd` or `adam`.
    Optimizer,
    /// `model`, `oracle` or `gaussian`.
    Localizer,
}

impl ValueKind {
    fn name(self) -> &'static str {
        match self {
            ValueKind::Path => "path",
            ValueKind::Integer => "integer",
            ValueKind::Float => "number",
            ValueKind::List => "list",
            ValueKind::Optimizer => "sgd|adam",
            ValueKind::Localizer => "model|oracle|gaussian",
        }
    }

    fn check(self, value: &str) -> Result<(), String> {
        match self {
            ValueKind::Path | ValueKind::List => Ok(()),
            ValueKind::Integer => value.parse::<u64>().map(|_| ()).map_err(|e| e.to_string()),
            ValueKind::Float => match value.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(()),
                Ok(_) => Err("value must be finite".into()),
                Err(e) => Err(e.to_string()),
            },
            ValueKind::Optimizer => Optimizer::parse(value)
                .map(|_| ())
                .ok_or_else(|| "expected sgd or adam".into()),
            ValueKind::Localizer => LocalizerKind::parse(value)
                .map(|_| ())
                .ok_or_else(|| "expected model, oracle or gaussian".into()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConfigKey {
    pub name: &'static str,
    pub kind: ValueKind,
    pub help: &'static str,
}

const fn key(name: &'static str, kind: ValueKind, help: &'static str) -> ConfigKey {
    ConfigKey { name, kind, help }
}

/// Every accepted configuration key.
pub const SCHEMA: &[ConfigKey] = &[
    key("dataset", ValueKind::Path, "fingerprint dataset CSV"),
    key("model", ValueKind::Path, "model file"),
    key("world", ValueKind::Path, "simulated world file (default: built-in reference world)"),
    key("map", ValueKind::Path, "grid map file for planning"),
    key("seed", ValueKind::Integer, "seed for splits, initialization, shuffles and trials (default 0)"),
    key("ssid_allowlist", ValueKind::List, "comma-separated SSIDs to keep (default: keep all)"),
    key("resamples", ValueKind::Integer, "scans aggregated per simulated location (default 3)"),
    key("threshold", ValueKind::Float, "minimum |PCC| with x or y to keep a column (default 0.24)"),
    key("min_coverage", ValueKind::Float, "minimum fraction of rows where a column is non-zero (default: off)"),
    key("train_ratio", ValueKind::Float, "fraction of rows used for training (default 0.75)"),
    key("epochs", ValueKind::Integer, "training epochs (default 700)"),
    key("batch_size", ValueKind::Integer, "mini-batch size (default 16)"),
    key("learning_rate", ValueKind::Float, "optimizer step size (default 0.001)"),
    key("validation_split", ValueKind::Float, "fraction of training rows held out for validation (default 0.2)"),
    key("optimizer", ValueKind::Optimizer, "sgd or adam (default adam)"),
    key("step_distance", ValueKind::Float, "feet per forward command (default 2)"),
    key("checkpoint_radius", ValueKind::Float, "fix distance in feet that counts as reaching a checkpoint (default 1.5)"),
    key("max_misses", ValueKind::Integer, "consecutive missing fixes tolerated before aborting (default 10)"),
    key("forward_speed", ValueKind::Float, "wheel speed for straight driving (default 1)"),
    key("turn_speed", ValueKind::Float, "wheel speed for pivot turns (default 0.5)"),
    key("success_radius", ValueKind::Float, "final distance in feet to the goal that counts as success (default 2)"),
    key("max_fixes", ValueKind::Integer, "fix budget per trial (default 500)"),
    key("scan_latency", ValueKind::Float, "seconds per scan (default 2)"),
    key("clearance", ValueKind::Integer, "planning clearance from walls in cells (default 0)"),
    key("trials", ValueKind::Integer, "number of simulated trials (default 100)"),
    key("noise_sigma", ValueKind::Float, "override every access point's shadowing sigma in dB"),
    key("localizer", ValueKind::Localizer, "position source during simulation (default model)"),
    key("gaussian_sigma", ValueKind::Float, "per-axis error in feet for the gaussian localizer (default 1.2)"),
];

/// Help text listing the schema, used by `--help`.
pub fn schema_help() -> String {
    let mut out = String::from("Config keys (file lines `key = value`, `#` comments; flags override the file):\n");
    for k in SCHEMA {
        let _ = writeln!(out, "  {:<18} <{}>  {}", k.name, k.kind.name(), k.help);
    }
    out
}

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("unknown config key `{key}`")]
    UnknownKey { key: String },
    #[error("config key `{key}`: {reason}")]
    BadValue { key: String, reason: String },
    #[error("cannot read config file {path}: {reason}")]
    Io { path: PathBuf, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LocalizerKind {
    Model,
    Oracle,
    Gaussian,
}

impl LocalizerKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "model" => Some(Self::Model),
            "oracle" => Some(Self::Oracle),
            "gaussian" => Some(Self::Gaussian),
            _ => None,
        }
    }
}

pub const DEFAULT_TRIALS: usize = 100;
pub const DEFAULT_RESAMPLES: usize = 3;
pub const DEFAULT_GAUSSIAN_SIGMA_FT: f64 = 1.2;

/// Validated key/value settings.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
}

impl RunConfig {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or(ConfigError::Syntax { line: i + 1 })?;
            cfg.set(k.trim(), v.trim())?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        Self::parse(&text)
    }

    /// Validates and stores one setting, replacing any earlier value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let spec = SCHEMA
            .iter()
            .find(|k| k.name == key)
            .ok_or_else(|| ConfigError::UnknownKey { key: key.to_string() })?;
        spec.kind.check(value).map_err(|reason| ConfigError::BadValue {
            key: key.to_string(),
            reason,
        })?;
        self.values.insert(key.to_string(), value.to_string());
        Ok(())
    }

    /// Parses `key=value` (as given to `--set`).
    pub fn set_pair(&mut self, pair: &str) -> Result<(), ConfigError> {
        let (k, v) = pair.split_once('=').ok_or(ConfigError::Syntax { line: 0 })?;
        self.set(k.trim(), v.trim())
    }

    /// Applies every value of `overrides` on top of this configuration.
    pub fn merge(&mut self, overrides: &RunConfig) {
        for (k, v) in &overrides.values {
            self.values.insert(k.clone(), v.clone());
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn path(&self, key: &str) -> Option<PathBuf> {
        self.get(key).map(PathBuf::from)
    }

    // Values were validated on insertion, so the parses below cannot fail.
    pub fn float(&self, key: &str) -> Option<f64> {
        self.get(key).map(|v| v.parse().expect("validated float"))
    }

    pub fn integer(&self, key: &str) -> Option<u64> {
        self.get(key).map(|v| v.parse().expect("validated integer"))
    }

    pub fn list(&self, key: &str) -> Option<BTreeSet<String>> {
        self.get(key).map(|v| {
            v.split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(str::to_string)
                .collect()
        })
    }

    pub fn seed(&self) -> u64 {
        self.integer("seed").unwrap_or(0)
    }

    pub fn localizer(&self) -> LocalizerKind {
        self.get("localizer")
            .and_then(LocalizerKind::parse)
            .unwrap_or(LocalizerKind::Model)
    }

    pub fn trials(&self) -> usize {
        self.integer("trials").map_or(DEFAULT_TRIALS, |v| v as usize)
    }

    pub fn resamples(&self) -> usize {
        self.integer("resamples").map_or(DEFAULT_RESAMPLES, |v| v as usize)
    }

    pub fn gaussian_sigma(&self) -> f64 {
        self.float("gaussian_sigma").unwrap_or(DEFAULT_GAUSSIAN_SIGMA_FT)
    }

    pub fn train_config(&self) -> TrainConfig<f64> {
        let mut t = TrainConfig::<f64>::default();
        t.seed = self.seed();
        if let Some(v) = self.integer("epochs") {
            t.epochs = v as usize;
        }
        if let Some(v) = self.integer("batch_size") {
            t.batch_size = v as usize;
        }
        if let Some(v) = self.float("learning_rate") {
            t.learning_rate = v;
        }
        if let Some(v) = self.float("validation_split") {
            t.validation_split = v;
        }
        if let Some(v) = self.get("optimizer").and_then(Optimizer::parse) {
            t.optimizer = v;
        }
        t
    }

    pub fn pipeline_config(&self) -> PipelineConfig<f64> {
        let mut p = PipelineConfig::<f64>::default();
        p.seed = self.seed();
        if let Some(v) = self.float("threshold") {
            p.threshold = v;
        }
        p.min_coverage = self.float("min_coverage");
        if let Some(v) = self.float("train_ratio") {
            p.train_ratio = v;
        }
        p.train = self.train_config();
        p
    }

    pub fn nav_config(&self) -> NavConfig<f64> {
        let mut n = NavConfig::<f64>::default();
        if let Some(v) = self.float("step_distance") {
            n.step_distance = v;
        }
        if let Some(v) = self.float("checkpoint_radius") {
            n.checkpoint_radius = v;
        }
        if let Some(v) = self.integer("max_misses") {
            n.max_consecutive_misses = u32::try_from(v).unwrap_or(u32::MAX);
        }
        if let Some(v) = self.float("forward_speed") {
            n.forward_speed = v;
        }
        n
    }

    pub fn trial_config(&self) -> TrialConfig<f64> {
        let mut t = TrialConfig::<f64>::default();
        t.nav = self.nav_config();
        if let Some(v) = self.float("success_radius") {
            t.success_radius = v;
        }
        if let Some(v) = self.integer("max_fixes") {
            t.max_fixes = v as usize;
        }
        if let Some(v) = self.float("scan_latency") {
            t.scan_latency = v;
        }
        if let Some(v) = self.float("turn_speed") {
            t.turn_speed = v;
        }
        if let Some(v) = self.integer("clearance") {
            t.clearance_cells = u32::try_from(v).unwrap_or(u32::MAX);
        }
        t.ssid_allowlist = self.list("ssid_allowlist");
        t
    }

    /// Settings as `key = value` lines, sorted by key.
    pub fn to_text(&self) -> String {
        self.values.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_blank_lines() {
        let cfg = RunConfig::parse("# training\nepochs = 12\n\nthreshold=0.3 # inline\n").unwrap();
        assert_eq!(cfg.integer("epochs"), Some(12));
        assert_eq!(cfg.float("threshold"), Some(0.3));
        assert_eq!(cfg.pipeline_config().train.epochs, 12);
    }

    #[test]
    fn unknown_key_is_an_error() {
        assert_eq!(
            RunConfig::parse("epoch = 5").unwrap_err(),
            ConfigError::UnknownKey { key: "epoch".into() }
        );
    }

    #[test]
    fn bad_values_are_rejected() {
        assert!(matches!(RunConfig::parse("epochs = -1"), Err(ConfigError::BadValue { .. })));
        assert!(matches!(RunConfig::parse("optimizer = rmsprop"), Err(ConfigError::BadValue { .. })));
        assert!(matches!(RunConfig::parse("threshold = nan"), Err(ConfigError::BadValue { .. })));
        assert_eq!(RunConfig::parse("just words").unwrap_err(), ConfigError::Syntax { line: 1 });
    }

    #[test]
    fn overrides_win() {
        let mut base = RunConfig::parse("seed = 1\nepochs = 3").unwrap();
        let mut flags = RunConfig::new();
        flags.set("seed", "7").unwrap();
        base.merge(&flags);
        assert_eq!(base.seed(), 7);
        assert_eq!(base.integer("epochs"), Some(3));
    }

    #[test]
    fn round_trips_through_text() {
        let cfg = RunConfig::parse("ssid_allowlist = CSU Net, CSU Visitor\nclearance = 2").unwrap();
        assert_eq!(RunConfig::parse(&cfg.to_text()).unwrap(), cfg);
        assert_eq!(cfg.trial_config().clearance_cells, 2);
        assert_eq!(cfg.list("ssid_allowlist").unwrap().len(), 2);
    }

    #[test]
    fn schema_help_lists_every_key() {
        let help = schema_help();
        for k in SCHEMA {
            assert!(help.contains(k.name));
        }
    }
}
