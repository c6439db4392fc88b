//! Energy decomposition `E = ℒ + Ẽ` and the energy gradient bound
//! `−(∂ℒ/∂a)ᵀ(∂Ẽ/∂a) ≤ ‖∂ℒ/∂a‖²` per hidden layer. When it holds, a small
//! inference step on `E` does not increase the output loss `ℒ`.

use serde::Serialize;

use super::{NetState, Pcn};
use crate::error::Result;
use crate::numerics::{affine_t, Vector};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LayerBound {
    pub layer: usize,
    /// `−(∂ℒ/∂a)ᵀ(∂Ẽ/∂a)`.
    pub lhs: f64,
    /// `‖∂ℒ/∂a‖²`.
    pub rhs: f64,
}

impl LayerBound {
    pub fn margin(&self) -> f64 {
        self.rhs - self.lhs
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundReport {
    pub holds: bool,
    /// Smallest `rhs − lhs`; infinite when there are no hidden layers.
    pub min_margin: f64,
    pub layers: Vec<LayerBound>,
}

impl Pcn {
    /// `(∂ℒ/∂a^ℓ, ∂Ẽ/∂a^ℓ)` from the stored pre-activations.
    pub fn decomposed_gradients(&self, state: &NetState, layer: usize) -> Result<(Vector, Vector)> {
        let out = self.topology.output_layer();
        let n = self.topology.width(layer);
        let mut dl = Vector::zeros(n);
        let mut dr = Vector::zeros(n);
        if self.topology.predicted_by(layer).is_some() {
            let own = self.scaled_error(state, layer);
            if layer == out {
                dl = own;
            } else {
                dr = own;
            }
        }
        if let Some(k) = self.topology.predicts(layer) {
            let t = self.topology.transition(k).1;
            let f = self.topology.activation(k);
            let e = self.scaled_error(state, t);
            let d: Vector = e
                .iter()
                .zip(state.preacts[k].iter())
                .map(|(e, &z)| e * f.derivative(z))
                .collect();
            let back = affine_t(&self.params.weights[k], &d)?;
            let target = if t == out { &mut dl } else { &mut dr };
            for (g, b) in target.iter_mut().zip(back.iter()) {
                *g -= b;
            }
        }
        Ok((dl, dr))
    }

    /// Evaluate the bound on every hidden layer at the current state.
    pub fn energy_gradient_bound(&self, state: &NetState) -> Result<BoundReport> {
        let mut layers = Vec::new();
        for l in 1..self.depth() {
            let (dl, dr) = self.decomposed_gradients(state, l)?;
            layers.push(LayerBound {
                layer: l,
                lhs: -dl.dot(&dr),
                rhs: dl.norm_sq(),
            });
        }
        let min_margin = layers.iter().map(LayerBound::margin).fold(f64::INFINITY, f64::min);
        Ok(BoundReport {
            holds: min_margin >= 0.0,
            min_margin,
            layers,
        })
    }
}
