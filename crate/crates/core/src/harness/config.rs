//! Run configuration, read from a JSON file.
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "algorithm": "il",
//!   "model": { "topology": [2, 8, 1], "activations": ["tanh", "sigmoid"] },
//!   "training": { "gamma": 0.1, "alpha": 0.01, "T": 20, "epochs": 2000,
//!                 "optimizer": "adam", "seed": 1, "stop_at_accuracy": 1.0 },
//!   "dataset": "xor.csv",
//!   "output": { "metrics": "metrics.csv", "checkpoint": "model.json" }
//! }
//! ```
//!
//! Relative paths resolve against the directory holding the config file.
//! Unknown keys are rejected. `PCNET_SEED` overrides `training.seed`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fnn::{Direction, OptimizerKind};
use crate::numerics::Activation;
use crate::pcgraph::GraphInit;
use crate::pcn::ClampMode;
use crate::pcn::InferenceSchedule;

pub const SCHEMA_VERSION: u32 = 1;
pub const SEED_ENV: &str = "PCNET_SEED";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Bp,
    Il,
    IncrementalIl,
    Zil,
    GraphIl,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Bp => "bp",
            Algorithm::Il => "il",
            Algorithm::IncrementalIl => "incremental_il",
            Algorithm::Zil => "zil",
            Algorithm::GraphIl => "graph_il",
        }
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_owned()))
            .map_err(|_| Error::config("algorithm", format!("unknown algorithm {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// Layer widths of a hierarchical net.
    #[serde(default)]
    pub topology: Option<Vec<usize>>,
    /// Adjacency mask file for `graph_il`.
    #[serde(default)]
    pub mask: Option<PathBuf>,
    /// One per transition (nets) or per node (graphs); a single entry is
    /// broadcast.
    pub activations: Vec<Activation>,
    #[serde(default = "default_direction")]
    pub direction: Direction,
    #[serde(default)]
    pub x_nodes: Vec<usize>,
    #[serde(default)]
    pub y_nodes: Vec<usize>,
    #[serde(default = "default_init_scale")]
    pub init_scale: f64,
}

fn default_direction() -> Direction {
    Direction::Discriminative
}

fn default_init_scale() -> f64 {
    0.05
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingConfig {
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    pub alpha: f64,
    #[serde(rename = "T", default = "default_steps")]
    pub steps: usize,
    pub epochs: usize,
    #[serde(default = "default_optimizer")]
    pub optimizer: OptimizerKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default)]
    pub stop_at_accuracy: Option<f64>,
    /// Relative energy change that ends inference early; 0 runs all `T` steps.
    #[serde(default)]
    pub stop_tol: f64,
    #[serde(default)]
    pub schedule: InferenceSchedule,
    #[serde(default)]
    pub mode: ClampMode,
    #[serde(default)]
    pub learn_precisions: bool,
    #[serde(default)]
    pub record_timing: bool,
    #[serde(default = "default_workers")]
    pub workers: usize,
    /// Inference steps used when measuring graph accuracy.
    #[serde(default)]
    pub test_steps: Option<usize>,
    #[serde(default)]
    pub graph_init: GraphInit,
}

fn default_gamma() -> f64 {
    0.1
}

fn default_steps() -> usize {
    20
}

fn default_optimizer() -> OptimizerKind {
    OptimizerKind::Sgd
}

fn default_batch() -> usize {
    1
}

fn default_workers() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub metrics: PathBuf,
    pub checkpoint: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub algorithm: Algorithm,
    pub model: ModelConfig,
    pub training: TrainingConfig,
    pub dataset: PathBuf,
    pub output: OutputConfig,
}

impl RunConfig {
    /// Parse and validate; `base` resolves relative paths.
    pub fn from_json(text: &str, base: &Path) -> Result<Self> {
        let mut cfg: RunConfig = serde_json::from_str(text).map_err(|e| {
            Error::config(format!("line {}, column {}", e.line(), e.column()), e.to_string())
        })?;
        cfg.resolve_paths(base);
        cfg.validate()?;
        Ok(cfg)
    }

    /// Read a config file, resolve paths and apply the seed override.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let mut cfg = RunConfig::from_json(&text, base)?;
        if let Ok(v) = std::env::var(SEED_ENV) {
            cfg.training.seed = v
                .trim()
                .parse()
                .map_err(|_| Error::config(SEED_ENV, format!("not an unsigned integer: {v:?}")))?;
        }
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let join = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        join(&mut self.dataset);
        join(&mut self.output.metrics);
        join(&mut self.output.checkpoint);
        if let Some(m) = self.model.mask.as_mut() {
            join(m);
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::config(
                "schema_version",
                format!("expected {SCHEMA_VERSION}, got {}", self.schema_version),
            ));
        }
        let m = &self.model;
        let t = &self.training;
        match (self.algorithm, &m.topology, &m.mask) {
            (Algorithm::GraphIl, _, None) => return Err(Error::config("model.mask", "graph_il needs a mask file")),
            (Algorithm::GraphIl, Some(_), _) => {
                return Err(Error::config("model.topology", "graph_il takes a mask, not a topology"))
            }
            (Algorithm::GraphIl, None, Some(_)) => {
                if m.x_nodes.is_empty() {
                    return Err(Error::config("model.x_nodes", "at least one input node is required"));
                }
            }
            (_, None, _) => return Err(Error::config("model.topology", "required for layered algorithms")),
            (_, Some(_), Some(_)) => return Err(Error::config("model.mask", "only graph_il takes a mask")),
            (_, Some(w), None) => {
                if w.len() < 2 {
                    return Err(Error::config("model.topology", "needs at least two layers"));
                }
                let n = w.len() - 1;
                if m.activations.len() != 1 && m.activations.len() != n {
                    return Err(Error::config(
                        "model.activations",
                        format!("expected 1 or {n} entries, got {}", m.activations.len()),
                    ));
                }
            }
        }
        if m.activations.is_empty() {
            return Err(Error::config("model.activations", "must not be empty"));
        }
        if !(m.init_scale >= 0.0 && m.init_scale.is_finite()) {
            return Err(Error::config("model.init_scale", "must be finite and non-negative"));
        }
        if !(t.gamma > 0.0 && t.gamma.is_finite()) {
            return Err(Error::config("training.gamma", "must be positive"));
        }
        if !(t.alpha >= 0.0 && t.alpha.is_finite()) {
            return Err(Error::config("training.alpha", "must be finite and non-negative"));
        }
        if t.steps == 0 {
            return Err(Error::config("training.T", "must be at least 1"));
        }
        if t.epochs == 0 {
            return Err(Error::config("training.epochs", "must be at least 1"));
        }
        if t.batch_size == 0 {
            return Err(Error::config("training.batch_size", "must be at least 1"));
        }
        if t.workers == 0 {
            return Err(Error::config("training.workers", "must be at least 1"));
        }
        if !(t.stop_tol >= 0.0) {
            return Err(Error::config("training.stop_tol", "must be non-negative"));
        }
        if self.algorithm == Algorithm::Zil {
            if t.optimizer != OptimizerKind::Sgd {
                return Err(Error::config("training.optimizer", "zil applies plain gradient steps; use sgd"));
            }
            if t.batch_size != 1 {
                return Err(Error::config("training.batch_size", "zil is online; use 1"));
            }
        }
        if matches!(self.algorithm, Algorithm::Bp | Algorithm::Zil) && m.direction != Direction::Discriminative {
            return Err(Error::config("model.direction", "bp and zil need a discriminative net"));
        }
        Ok(())
    }

    /// Per-transition activations with a single entry broadcast.
    pub fn layer_activations(&self, n: usize) -> Vec<Activation> {
        if self.model.activations.len() == 1 {
            vec![self.model.activations[0]; n]
        } else {
            self.model.activations.clone()
        }
    }
}
