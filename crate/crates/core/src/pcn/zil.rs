//! Z-IL: inference learning with γ = 1, T = L and layer-specific weight
//! updates, which reproduces a backprop step.
//!
//! From a feedforward-initialized state with input and label clamped, the
//! output error travels down one layer per inference step, and at step `t`
//! the error on layer `L − t` equals `−δ^{L−t}`. Step `t` therefore updates
//! transition `L − 1 − t`. The weight gradient and the activation update of
//! a step are both taken from the state at the start of that step; the new
//! weights are then applied and predictions refreshed.

use super::{NetState, Pcn};
use crate::error::{Error, Result};
use crate::fnn::Direction;
use crate::numerics::Matrix;

impl Pcn {
    /// One Z-IL pass on `(x, y)` with learning rate `alpha`. Returns the
    /// weight change of every transition.
    pub fn train_zil(&mut self, x: &[f64], y: &[f64], alpha: f64) -> Result<Vec<Matrix>> {
        let mut state = self.zero_state();
        state.clamp(0, x)?;
        state.clamp(self.depth(), y)?;
        self.feedforward_init(&mut state)?;
        self.zil_from_state(&mut state, alpha, 1.0, self.depth())
    }

    /// Z-IL from a prepared state, checking every precondition.
    pub fn zil_from_state(&mut self, state: &mut NetState, alpha: f64, gamma: f64, steps: usize) -> Result<Vec<Matrix>> {
        let l = self.depth();
        if self.direction() != Direction::Discriminative {
            return Err(Error::Precondition("Z-IL needs a discriminative net".into()));
        }
        if gamma != 1.0 {
            return Err(Error::Precondition(format!("Z-IL needs gamma = 1, got {gamma}")));
        }
        if steps != l {
            return Err(Error::Precondition(format!("Z-IL needs T = L = {l}, got {steps}")));
        }
        if !self.precisions.is_identity() {
            return Err(Error::Precondition("Z-IL needs identity precisions".into()));
        }
        if !state.clamped[0] || !state.clamped[l] {
            return Err(Error::Precondition("Z-IL needs input and label layers clamped".into()));
        }
        if let Some(h) = (1..l).find(|&h| state.clamped[h]) {
            return Err(Error::Precondition(format!("hidden layer {h} is clamped")));
        }
        if let Some(h) = (1..l).find(|&h| state.errors[h].iter().any(|&e| e != 0.0)) {
            return Err(Error::Precondition(format!(
                "layer {h} has nonzero error; Z-IL needs a feedforward-initialized state"
            )));
        }
        let before = self.params.weights.clone();
        for t in 0..l {
            let k = l - 1 - t;
            let grad = self.transition_gradient(state, k);
            let free: Vec<usize> = (1..l).collect();
            let snapshot = &*state;
            let moved = self
                .executor()
                .phase(free.len(), |i| self.updated_layer(snapshot, free[i], gamma));
            for (h, a) in free.into_iter().zip(moved) {
                state.activations[h] = a?;
            }
            self.params.weights[k].axpy(-alpha, &grad);
            self.predictions(state)?;
        }
        Ok(self
            .params
            .weights
            .iter()
            .zip(&before)
            .map(|(after, b)| after.sub(b))
            .collect())
    }
}
