//! Declarative experiment configuration (TOML) with flag overrides.
//!
//! ```toml
//! [dataset]
//! source = "synthetic"      # or "idx" with `images` / `labels` paths
//! classes = 10
//! dim = 20
//! per_class = 600
//! separation = 4.0
//!
//! [partition]
//! clients = 5
//! private_size = 1000
//!
//! [federation]
//! rounds = 10
//!
//! [sweep]
//! strategies = ["average", "uwa", "meta"]
//! k = [2, 5, 8]
//! seeds = [0, 1, 2]
//!
//! [output]
//! dir = "fedlogit-out"
//! ```
//!
//! Every key is optional. Precedence: flags, then the file, then (for the
//! output directory only) `FEDLOGIT_OUT`, then built-in defaults.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::aggregation::Strategy;
use crate::data::{DatasetSource, PartitionSpec};
use crate::error::{Error, Result};
use crate::federation::FederationConfig;
use crate::report::{CellConfig, CONVERGENCE_THRESHOLD};

/// Environment variable naming the default output directory.
pub const OUTPUT_ENV: &str = "FEDLOGIT_OUT";
pub const DEFAULT_OUTPUT_DIR: &str = "fedlogit-out";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub strategies: Vec<Strategy>,
    pub k: Vec<usize>,
    pub seeds: Vec<u64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            strategies: vec![Strategy::Average],
            k: vec![2],
            seeds: vec![0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReportConfig {
    pub convergence_threshold: f64,
}

impl Default for ReportConfig {
    fn default() -> Self {
        Self {
            convergence_threshold: CONVERGENCE_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Also write each cell's last-round public logits, densities and meta aggregator.
    pub dump_artifacts: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from(DEFAULT_OUTPUT_DIR),
            dump_artifacts: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub dataset: DatasetSource,
    /// `classes_per_client` and `seed` come from the sweep.
    pub partition: PartitionSpec,
    /// `strategy` and `seed` come from the sweep.
    pub federation: FederationConfig,
    pub sweep: SweepConfig,
    pub report: ReportConfig,
    pub output: OutputConfig,
}

/// Flag values layered over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub dataset: Option<String>,
    pub strategies: Option<Vec<String>>,
    pub k: Option<Vec<usize>>,
    pub clients: Option<usize>,
    pub rounds: Option<usize>,
    pub seeds: Option<Vec<u64>>,
    pub out: Option<PathBuf>,
    /// Generic `section.key=value` assignments; values parse as TOML, else as strings.
    pub set: Vec<String>,
}

/// Keys the sweep owns; setting them directly would be silently overwritten.
const SWEEP_OWNED: &[(&str, &str, &str)] = &[
    ("partition", "classes_per_client", "sweep.k"),
    ("partition", "seed", "sweep.seeds"),
    ("federation", "strategy", "sweep.strategies"),
    ("federation", "seed", "sweep.seeds"),
];

fn table_mut<'a>(root: &'a mut Table, section: &str) -> Result<&'a mut Table> {
    root.entry(section.to_owned())
        .or_insert_with(|| Value::Table(Table::new()))
        .as_table_mut()
        .ok_or_else(|| Error::config(format!("`{section}` must be a table")))
}

fn set_path(root: &mut Table, path: &str, value: Value) -> Result<()> {
    let mut parts: Vec<&str> = path.split('.').collect();
    let leaf = parts
        .pop()
        .filter(|l| !l.is_empty())
        .ok_or_else(|| Error::config(format!("bad key `{path}`")))?;
    let mut t = root;
    for p in parts {
        t = table_mut(t, p)?;
    }
    t.insert(leaf.to_owned(), value);
    Ok(())
}

fn parse_scalar(raw: &str) -> Value {
    toml::from_str::<Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_owned()))
}

fn apply_overrides(root: &mut Table, o: &Overrides) -> Result<()> {
    if let Some(d) = &o.dataset {
        set_path(root, "dataset.source", Value::String(d.clone()))?;
    }
    if let Some(s) = &o.strategies {
        let list = s.iter().map(|v| Value::String(v.trim().to_owned())).collect();
        set_path(root, "sweep.strategies", Value::Array(list))?;
    }
    if let Some(k) = &o.k {
        set_path(root, "sweep.k", Value::Array(k.iter().map(|&v| Value::Integer(v as i64)).collect()))?;
    }
    if let Some(c) = o.clients {
        set_path(root, "partition.clients", Value::Integer(c as i64))?;
    }
    if let Some(r) = o.rounds {
        set_path(root, "federation.rounds", Value::Integer(r as i64))?;
    }
    if let Some(s) = &o.seeds {
        set_path(root, "sweep.seeds", Value::Array(s.iter().map(|&v| Value::Integer(v as i64)).collect()))?;
    }
    if let Some(out) = &o.out {
        set_path(root, "output.dir", Value::String(out.display().to_string()))?;
    }
    for assignment in &o.set {
        let (key, raw) = assignment
            .split_once('=')
            .ok_or_else(|| Error::config(format!("`--set {assignment}` is not key=value")))?;
        set_path(root, key.trim(), parse_scalar(raw.trim()))?;
    }
    Ok(())
}

/// Reads `path` (if any), applies `overrides`, fills defaults and validates.
pub fn parse_config(path: Option<&Path>, overrides: &Overrides) -> Result<ExperimentConfig> {
    let text = match path {
        Some(p) => std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?,
        None => String::new(),
    };
    parse_config_str(&text, overrides)
}

pub fn parse_config_str(text: &str, overrides: &Overrides) -> Result<ExperimentConfig> {
    let mut root: Table = toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
    let file_sets_output = root.get("output").and_then(|o| o.get("dir")).is_some();
    apply_overrides(&mut root, overrides)?;
    for (section, key, owner) in SWEEP_OWNED {
        if root.get(*section).and_then(|s| s.get(*key)).is_some() {
            return Err(Error::config(format!(
                "`{section}.{key}` is set per sweep cell; use `{owner}` instead"
            )));
        }
    }
    if let Some(Value::Table(dataset)) = root.get_mut("dataset") {
        dataset.entry("source").or_insert_with(|| Value::String("synthetic".into()));
    }
    if !file_sets_output && overrides.out.is_none() {
        if let Ok(dir) = std::env::var(OUTPUT_ENV) {
            set_path(&mut root, "output.dir", Value::String(dir))?;
        }
    }
    let cfg: ExperimentConfig = Value::Table(root)
        .try_into()
        .map_err(|e: toml::de::Error| Error::config(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let named = |key: &str, e: Error| match e {
            Error::Config(m) => Error::config(format!("{key}: {m}")),
            other => other,
        };
        if self.sweep.strategies.is_empty() {
            return Err(Error::config("sweep.strategies: at least one strategy is required"));
        }
        if self.sweep.k.is_empty() {
            return Err(Error::config("sweep.k: at least one value is required"));
        }
        if self.sweep.seeds.is_empty() {
            return Err(Error::config("sweep.seeds: at least one seed is required"));
        }
        if let Some(classes) = self.known_classes() {
            if let Some(&bad) = self.sweep.k.iter().find(|&&k| k < 1 || k > classes) {
                return Err(Error::config(format!("sweep.k: {bad} is outside 1..={classes}")));
            }
        } else if self.sweep.k.contains(&0) {
            return Err(Error::config("sweep.k: 0 is out of range (k >= 1)"));
        }
        if let DatasetSource::Synthetic(s) = &self.dataset {
            if s.classes < 2 || s.dim < 1 {
                return Err(Error::config("dataset: synthetic data needs classes >= 2 and dim >= 1"));
            }
        }
        if self.partition.clients < 1 {
            return Err(Error::config("partition.clients: must be at least 1"));
        }
        let vf = self.partition.validation_fraction;
        if !(vf > 0.0 && vf < 1.0) {
            return Err(Error::config(format!(
                "partition.validation_fraction: {vf} is outside (0, 1)"
            )));
        }
        if self.partition.test_size == 0 {
            return Err(Error::config("partition.test_size: must be positive"));
        }
        if self.report.convergence_threshold < 0.0 {
            return Err(Error::config("report.convergence_threshold: must be nonnegative"));
        }
        if self.federation.rounds < 1 {
            return Err(Error::config("federation.rounds: must be at least 1"));
        }
        self.federation.validate().map_err(|e| named("federation", e))
    }

    fn known_classes(&self) -> Option<usize> {
        match &self.dataset {
            DatasetSource::Synthetic(s) => Some(s.classes),
            DatasetSource::Idx(_) => None,
        }
    }

    /// The fully resolved configuration of one sweep cell.
    pub fn cell(&self, strategy: Strategy, k: usize, seed: u64) -> CellConfig {
        CellConfig {
            dataset: self.dataset.clone(),
            partition: PartitionSpec {
                classes_per_client: k,
                seed,
                ..self.partition.clone()
            },
            federation: FederationConfig {
                strategy,
                seed,
                ..self.federation.clone()
            },
        }
    }
}
