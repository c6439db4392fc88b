//! Feedforward reference network trained with backpropagation.
//!
//! Weights absorb the bias as their final column, so transition `k` holds a
//! matrix of shape `n_target × (n_source + 1)` acting on `[a; 1]`.
//!
//! Gradients are taken of `½‖ŷ − y‖²` so that the output delta is exactly
//! `a^L − y`. [`mse_loss`] reports the unscaled `‖ŷ − y‖²`.

mod backprop;
mod optimizer;

pub use backprop::{backward, bp_gradients, forward, mse_loss, BpWorkspace};
pub use optimizer::{Optimizer, OptimizerKind};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{Activation, Matrix, Rng};

/// Which way local predictions flow.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// Layer `k` predicts layer `k + 1`; data at layer 0, labels at layer L.
    Discriminative,
    /// Layer `k + 1` predicts layer `k`; data at layer 0, the root is layer L.
    Generative,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TopologyRepr")]
pub struct Topology {
    widths: Vec<usize>,
    activations: Vec<Activation>,
    direction: Direction,
}

#[derive(Deserialize)]
struct TopologyRepr {
    widths: Vec<usize>,
    activations: Vec<Activation>,
    direction: Direction,
}

impl TryFrom<TopologyRepr> for Topology {
    type Error = Error;
    fn try_from(r: TopologyRepr) -> Result<Self> {
        Topology::new(r.widths, r.activations, r.direction)
    }
}

impl Topology {
    /// `activations[k]` is applied to the prediction made by transition `k`.
    pub fn new(widths: Vec<usize>, activations: Vec<Activation>, direction: Direction) -> Result<Self> {
        if widths.len() < 2 {
            return Err(Error::InvalidTopology(format!(
                "need at least two layers, got {}",
                widths.len()
            )));
        }
        if let Some(i) = widths.iter().position(|&w| w == 0) {
            return Err(Error::InvalidTopology(format!("layer {i} has width 0")));
        }
        if activations.len() != widths.len() - 1 {
            return Err(Error::InvalidTopology(format!(
                "{} layers need {} activations, got {}",
                widths.len(),
                widths.len() - 1,
                activations.len()
            )));
        }
        Ok(Topology {
            widths,
            activations,
            direction,
        })
    }

    /// Same activation on every transition.
    pub fn uniform(widths: Vec<usize>, f: Activation, direction: Direction) -> Result<Self> {
        let n = widths.len().saturating_sub(1);
        Topology::new(widths, vec![f; n], direction)
    }

    /// Number of transitions, L.
    pub fn depth(&self) -> usize {
        self.widths.len() - 1
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn width(&self, layer: usize) -> usize {
        self.widths[layer]
    }

    pub fn activations(&self) -> &[Activation] {
        &self.activations
    }

    pub fn activation(&self, k: usize) -> Activation {
        self.activations[k]
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    /// `(source, target)` layers of transition `k`.
    pub fn transition(&self, k: usize) -> (usize, usize) {
        match self.direction {
            Direction::Discriminative => (k, k + 1),
            Direction::Generative => (k + 1, k),
        }
    }

    /// Transition whose prediction lands on `layer`, if any.
    pub fn predicted_by(&self, layer: usize) -> Option<usize> {
        match self.direction {
            Direction::Discriminative => layer.checked_sub(1),
            Direction::Generative => (layer < self.depth()).then_some(layer),
        }
    }

    /// Transition for which `layer` is the source, if any.
    pub fn predicts(&self, layer: usize) -> Option<usize> {
        match self.direction {
            Direction::Discriminative => (layer < self.depth()).then_some(layer),
            Direction::Generative => layer.checked_sub(1),
        }
    }

    /// Layer without an error node: 0 for discriminative nets, L for generative.
    pub fn root_layer(&self) -> usize {
        match self.direction {
            Direction::Discriminative => 0,
            Direction::Generative => self.depth(),
        }
    }

    /// Last layer along the prediction direction.
    pub fn output_layer(&self) -> usize {
        match self.direction {
            Direction::Discriminative => self.depth(),
            Direction::Generative => 0,
        }
    }

    pub fn weight_shape(&self, k: usize) -> (usize, usize) {
        let (s, t) = self.transition(k);
        (self.widths[t], self.widths[s] + 1)
    }
}

/// One weight matrix per transition, bias in the final column.
#[derive(Clone, Debug, PartialEq)]
pub struct Params {
    pub weights: Vec<Matrix>,
}

impl Params {
    pub fn zeros(topo: &Topology) -> Self {
        Params {
            weights: (0..topo.depth())
                .map(|k| {
                    let (r, c) = topo.weight_shape(k);
                    Matrix::zeros(r, c)
                })
                .collect(),
        }
    }

    /// Weights i.i.d. uniform in `[-scale, scale]`, biases zero.
    pub fn init(topo: &Topology, rng: &mut Rng, scale: f64) -> Self {
        Params {
            weights: (0..topo.depth())
                .map(|k| {
                    let (r, c) = topo.weight_shape(k);
                    Matrix::from_fn(r, c, |_, j| if j + 1 == c { 0.0 } else { rng.uniform(-scale, scale) })
                })
                .collect(),
        }
    }

    /// Default initialization with scale 0.05.
    pub fn init_default(topo: &Topology, rng: &mut Rng) -> Self {
        Params::init(topo, rng, 0.05)
    }

    pub fn validate(&self, topo: &Topology) -> Result<()> {
        if self.weights.len() != topo.depth() {
            return Err(Error::InvalidTopology(format!(
                "{} weight matrices for {} transitions",
                self.weights.len(),
                topo.depth()
            )));
        }
        for (k, w) in self.weights.iter().enumerate() {
            if w.shape() != topo.weight_shape(k) {
                return Err(Error::shape("params", w.shape(), topo.weight_shape(k)));
            }
            if !w.is_finite() {
                return Err(Error::Precondition(format!("weights of transition {k} are not finite")));
            }
        }
        Ok(())
    }

    pub fn max_abs_diff(&self, other: &Params) -> f64 {
        self.weights
            .iter()
            .zip(&other.weights)
            .map(|(a, b)| a.max_abs_diff(b))
            .fold(0.0, f64::max)
    }

    pub fn bitwise_eq(&self, other: &Params) -> bool {
        self.weights.len() == other.weights.len()
            && self.weights.iter().zip(&other.weights).all(|(a, b)| a.bitwise_eq(b))
    }
}
