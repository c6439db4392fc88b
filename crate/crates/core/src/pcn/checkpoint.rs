//! JSON checkpoints shared by hierarchical nets and PC graphs.
//!
//! Floats are written in shortest round-trip form, so loading a checkpoint
//! reproduces every weight bit for bit.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Pcn, PrecisionSet};
use crate::error::{Error, Result};
use crate::fnn::{Direction, Params, Topology};
use crate::numerics::{Activation, Matrix};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    /// Layer widths; a single entry `[n]` for graphs.
    pub topology: Vec<usize>,
    pub direction: Direction,
    /// One per transition, or one per node for graphs.
    pub activations: Vec<Activation>,
    /// Row-major nested arrays, one per weight matrix.
    pub weights: Vec<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub precisions: Option<PrecisionSet>,
    pub rng_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub graph: Option<GraphCheckpoint>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphCheckpoint {
    pub n: usize,
    /// `[i, j]` means node `j` predicts node `i`.
    pub edges: Vec<[usize; 2]>,
    pub bias: Vec<f64>,
}

impl Checkpoint {
    pub fn from_pcn(pcn: &Pcn, rng_seed: u64) -> Self {
        Checkpoint {
            topology: pcn.topology.widths().to_vec(),
            direction: pcn.direction(),
            activations: pcn.topology.activations().to_vec(),
            weights: pcn.params.weights.iter().map(Matrix::to_nested).collect(),
            precisions: (!pcn.precisions.is_identity()).then(|| pcn.precisions.clone()),
            rng_seed,
            graph: None,
        }
    }

    pub fn to_pcn(&self) -> Result<Pcn> {
        if self.graph.is_some() {
            return Err(Error::Unsupported("checkpoint holds a PC graph, not a layered net".into()));
        }
        let topo = Topology::new(self.topology.clone(), self.activations.clone(), self.direction)?;
        let weights = self
            .weights
            .iter()
            .map(|rows| Matrix::from_rows(rows))
            .collect::<Result<Vec<_>>>()?;
        let mut pcn = Pcn::new(topo, Params { weights })?;
        if let Some(p) = &self.precisions {
            p.validate(&pcn.topology)?;
            pcn.precisions = p.clone();
        }
        Ok(pcn)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Checkpoint::from_json(&s)
    }
}
