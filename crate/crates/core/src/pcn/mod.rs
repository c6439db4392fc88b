//! Hierarchical predictive coding networks.
//!
//! A [`Pcn`] pairs a [`Topology`] and [`Params`] with optional diagonal
//! precisions. Transition `k` predicts its target layer as
//! `μ = f(w^k [a_source; 1])`; errors are `ε = a − μ` and the energy is
//! `E = ½ Σ_ℓ ε^ℓᵀ Π^ℓ ε^ℓ`.
//!
//! Inference descends `E` in the unclamped activations:
//!
//! ```text
//! Δa^ℓ = −γ (Π^ℓ ε^ℓ − w^kᵀ (Π^t ε^t ⊙ f'(w^k [a^ℓ; 1])))
//! ```
//!
//! where `k` is the transition with source `ℓ` and target `t` (bias column
//! excluded from the transpose). The default schedule updates all layers
//! from one snapshot, so each step is deterministic under any number of
//! workers.

mod bound;
mod checkpoint;
mod state;
mod train;
mod zil;

pub use bound::{BoundReport, LayerBound};
pub use checkpoint::{Checkpoint, GraphCheckpoint};
pub use state::{update_precisions, EnergyReport, NetState, PrecisionSet, PRECISION_FLOOR, VARIANCE_FLOOR};
pub use train::{
    train_il, train_incremental_il, ClampMode, EpochMetrics, TrainOptions, TrainReport, UpdateOutcome,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fnn::{Direction, Params, Topology};
use crate::numerics::{affine, affine_t, outer_aug, Executor, Matrix, Rng, Vector};

/// Energy above which inference is declared divergent.
pub const DIVERGENCE_ENERGY: f64 = 1e12;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InferenceSchedule {
    /// Every unclamped layer is updated from the same snapshot.
    #[default]
    Simultaneous,
    /// Layers are updated one at a time from the label side to the data
    /// side, refreshing errors in between.
    SequentialTopDown,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InferenceConfig {
    pub gamma: f64,
    /// Maximum number of inference steps, T.
    pub steps: usize,
    /// Stop early once `|ΔE| ≤ stop_tol · |E|`. 0 disables early stopping.
    pub stop_tol: f64,
    pub schedule: InferenceSchedule,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        InferenceConfig {
            gamma: 0.1,
            steps: 20,
            stop_tol: 1e-8,
            schedule: InferenceSchedule::Simultaneous,
        }
    }
}

impl InferenceConfig {
    pub fn new(gamma: f64, steps: usize) -> Self {
        InferenceConfig {
            gamma,
            steps,
            ..Default::default()
        }
    }

    /// Exactly `steps` steps, no early stop.
    pub fn fixed(gamma: f64, steps: usize) -> Self {
        InferenceConfig {
            gamma,
            steps,
            stop_tol: 0.0,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0) || !self.gamma.is_finite() {
            return Err(Error::config("gamma", format!("must be positive, got {}", self.gamma)));
        }
        if !(self.stop_tol >= 0.0) {
            return Err(Error::config("stop_tol", format!("must be non-negative, got {}", self.stop_tol)));
        }
        Ok(())
    }
}

/// Energies seen during one inference phase.
#[derive(Clone, Debug, Default)]
pub struct InferenceTrace {
    /// Energy before the first step and after each step taken.
    pub energies: Vec<f64>,
    pub steps_taken: usize,
}

/// Sampling mode for generative test-time use.
pub enum GenerativeMode<'a> {
    /// Clamp the root to a label and sweep predictions down to layer 0.
    Supervised(&'a [f64]),
    /// Draw the root from N(0, I), then each lower layer from N(μ, I).
    Ancestral(&'a mut Rng),
}

#[derive(Clone, Debug)]
pub struct Pcn {
    pub topology: Topology,
    pub params: Params,
    pub precisions: PrecisionSet,
    executor: Executor,
}

impl Pcn {
    pub fn new(topology: Topology, params: Params) -> Result<Self> {
        params.validate(&topology)?;
        Ok(Pcn {
            precisions: PrecisionSet::identity(&topology),
            topology,
            params,
            executor: Executor::Serial,
        })
    }

    /// Uniform `[-scale, scale]` weights, zero biases.
    pub fn init(topology: Topology, rng: &mut Rng, scale: f64) -> Self {
        let params = Params::init(&topology, rng, scale);
        Pcn::new(topology, params).expect("init produces valid params")
    }

    pub fn with_executor(mut self, executor: Executor) -> Self {
        self.executor = executor;
        self
    }

    pub fn set_executor(&mut self, executor: Executor) {
        self.executor = executor;
    }

    pub fn executor(&self) -> &Executor {
        &self.executor
    }

    pub fn depth(&self) -> usize {
        self.topology.depth()
    }

    pub fn direction(&self) -> Direction {
        self.topology.direction()
    }

    pub fn zero_state(&self) -> NetState {
        NetState::zeros(&self.topology)
    }

    fn check_state(&self, state: &NetState) -> Result<()> {
        let w = self.topology.widths();
        if state.activations.len() != w.len() {
            return Err(Error::shape("state", (state.activations.len(), 1), (w.len(), 1)));
        }
        for (l, a) in state.activations.iter().enumerate() {
            if a.len() != w[l] {
                return Err(Error::shape("state", (a.len(), 1), (w[l], 1)));
            }
        }
        Ok(())
    }

    /// `(z, μ, ε)` of transition `k` from the current activations.
    fn predict_transition(&self, state: &NetState, k: usize) -> Result<(Vector, Vector, Vector)> {
        let (s, t) = self.topology.transition(k);
        let z = affine(&self.params.weights[k], &state.activations[s])?;
        let f = self.topology.activation(k);
        let mu: Vector = z.iter().map(|&v| f.apply(v)).collect();
        let eps = state.activations[t].sub(&mu);
        Ok((z, mu, eps))
    }

    /// Refresh `μ` and `ε` on every predicted layer. One matmul per
    /// transition, all in one phase.
    pub fn predictions(&self, state: &mut NetState) -> Result<()> {
        self.check_state(state)?;
        let out = self
            .executor
            .phase(self.depth(), |k| self.predict_transition(state, k));
        for (k, r) in out.into_iter().enumerate() {
            let (z, mu, eps) = r?;
            let t = self.topology.transition(k).1;
            state.preacts[k] = z;
            state.predictions[t] = mu;
            state.errors[t] = eps;
        }
        Ok(())
    }

    pub fn energy(&self, state: &NetState) -> EnergyReport {
        self.energy_with(state, &self.precisions)
    }

    /// `½ Σ εᵀΠε` with the given precisions.
    pub fn energy_with(&self, state: &NetState, precisions: &PrecisionSet) -> EnergyReport {
        let per_layer = state
            .errors
            .iter()
            .enumerate()
            .map(|(l, e)| {
                let s: f64 = match precisions.get(l) {
                    Some(pi) => e.iter().zip(pi.iter()).map(|(e, p)| p * e * e).sum(),
                    None => e.iter().map(|e| e * e).sum(),
                };
                0.5 * s
            })
            .collect();
        EnergyReport::from_layers(per_layer, self.topology.output_layer())
    }

    /// Set each unclamped layer to its prediction, sweeping along the
    /// prediction direction. Leaves all internal errors exactly zero.
    pub fn feedforward_init(&self, state: &mut NetState) -> Result<()> {
        self.check_state(state)?;
        let l = self.depth();
        let order: Vec<usize> = match self.direction() {
            Direction::Discriminative => (0..l).collect(),
            Direction::Generative => (0..l).rev().collect(),
        };
        for k in order {
            let t = self.topology.transition(k).1;
            let (z, mu, _) = self.predict_transition(state, k)?;
            if !state.clamped[t] {
                state.activations[t] = mu.clone();
            }
            state.errors[t] = state.activations[t].sub(&mu);
            state.preacts[k] = z;
            state.predictions[t] = mu;
        }
        Ok(())
    }

    fn scaled_error(&self, state: &NetState, layer: usize) -> Vector {
        match self.precisions.get(layer) {
            Some(pi) => state.errors[layer].hadamard(pi),
            None => state.errors[layer].clone(),
        }
    }

    /// `∂E/∂a^ℓ` at the current state. Recomputes the outgoing
    /// pre-activation, so it costs two matmuls when `ℓ` predicts a layer.
    pub fn activation_gradient(&self, state: &NetState, layer: usize) -> Result<Vector> {
        let mut g = if self.topology.predicted_by(layer).is_some() {
            self.scaled_error(state, layer)
        } else {
            Vector::zeros(self.topology.width(layer))
        };
        if let Some(k) = self.topology.predicts(layer) {
            let t = self.topology.transition(k).1;
            let w = &self.params.weights[k];
            let z = affine(w, &state.activations[layer])?;
            let f = self.topology.activation(k);
            let e = self.scaled_error(state, t);
            let d: Vector = e.iter().zip(z.iter()).map(|(e, &z)| e * f.derivative(z)).collect();
            let back = affine_t(w, &d)?;
            for (gi, bi) in g.iter_mut().zip(back.iter()) {
                *gi -= bi;
            }
        }
        Ok(g)
    }

    fn updated_layer(&self, state: &NetState, layer: usize, gamma: f64) -> Result<Vector> {
        let g = self.activation_gradient(state, layer)?;
        Ok(state.activations[layer]
            .iter()
            .zip(g.iter())
            .map(|(a, g)| a - gamma * g)
            .collect())
    }

    /// One inference step followed by a refresh of predictions.
    pub fn inference_step(&self, state: &mut NetState, gamma: f64, schedule: InferenceSchedule) -> Result<()> {
        self.check_state(state)?;
        match schedule {
            InferenceSchedule::Simultaneous => {
                let free: Vec<usize> = (0..=self.depth()).filter(|&l| !state.clamped[l]).collect();
                let snapshot = &*state;
                let out = self
                    .executor
                    .phase(free.len(), |i| self.updated_layer(snapshot, free[i], gamma));
                for (l, a) in free.into_iter().zip(out) {
                    state.activations[l] = a?;
                }
                self.predictions(state)
            }
            InferenceSchedule::SequentialTopDown => {
                for l in (0..=self.depth()).rev() {
                    if state.clamped[l] {
                        continue;
                    }
                    state.activations[l] = self.updated_layer(state, l, gamma)?;
                    if self.topology.predicted_by(l).is_some() {
                        state.errors[l] = state.activations[l].sub(&state.predictions[l]);
                    }
                    if let Some(k) = self.topology.predicts(l) {
                        let (z, mu, eps) = self.predict_transition(state, k)?;
                        let t = self.topology.transition(k).1;
                        state.preacts[k] = z;
                        state.predictions[t] = mu;
                        state.errors[t] = eps;
                    }
                }
                Ok(())
            }
        }
    }

    /// Run up to `cfg.steps` inference steps with early stopping and the
    /// divergence guard.
    pub fn infer(&self, state: &mut NetState, cfg: &InferenceConfig) -> Result<InferenceTrace> {
        let mut e = self.energy(state).total;
        let mut trace = InferenceTrace {
            energies: vec![e],
            steps_taken: 0,
        };
        for _ in 0..cfg.steps {
            self.inference_step(state, cfg.gamma, cfg.schedule)?;
            let next = self.energy(state).total;
            trace.energies.push(next);
            trace.steps_taken += 1;
            if !next.is_finite() || next > DIVERGENCE_ENERGY {
                return Err(Error::Divergence {
                    energy: next,
                    gamma: cfg.gamma,
                    alpha: f64::NAN,
                });
            }
            let converged = cfg.stop_tol > 0.0 && (e - next).abs() <= cfg.stop_tol * e.abs();
            e = next;
            if converged {
                break;
            }
        }
        Ok(trace)
    }

    /// `∂E/∂w^k = −(Π ε ⊙ f'(z^k)) [a_source; 1]ᵀ`, from the stored
    /// pre-activation.
    pub fn transition_gradient(&self, state: &NetState, k: usize) -> Matrix {
        let (s, t) = self.topology.transition(k);
        let f = self.topology.activation(k);
        let z = &state.preacts[k];
        let e = &state.errors[t];
        let g: Vec<f64> = match self.precisions.get(t) {
            Some(pi) => (0..e.len()).map(|i| -(pi[i] * e[i] * f.derivative(z[i]))).collect(),
            None => (0..e.len()).map(|i| -(e[i] * f.derivative(z[i]))).collect(),
        };
        outer_aug(&g, &state.activations[s])
    }

    /// Gradients of the energy for every weight matrix. One outer product per
    /// transition, all in one phase.
    pub fn weight_gradients(&self, state: &NetState) -> Vec<Matrix> {
        self.executor
            .phase(self.depth(), |k| self.transition_gradient(state, k))
    }

    /// Single forward sweep with only the input clamped; bitwise identical
    /// to [`crate::fnn::forward`].
    pub fn test_discriminative(&self, x: &[f64]) -> Result<Vector> {
        if self.direction() != Direction::Discriminative {
            return Err(Error::Unsupported("test_discriminative needs a discriminative net".into()));
        }
        let mut state = self.zero_state();
        state.clamp(0, x)?;
        self.feedforward_init(&mut state)?;
        Ok(state.activations.pop().expect("at least two layers"))
    }

    /// Output of a generative net at layer 0.
    pub fn test_generative(&self, mode: GenerativeMode<'_>) -> Result<Vector> {
        if self.direction() != Direction::Generative {
            return Err(Error::Unsupported("test_generative needs a generative net".into()));
        }
        let l = self.depth();
        let mut state = self.zero_state();
        match mode {
            GenerativeMode::Supervised(label) => {
                state.clamp(l, label)?;
                self.feedforward_init(&mut state)?;
            }
            GenerativeMode::Ancestral(rng) => {
                for v in state.activations[l].iter_mut() {
                    *v = rng.normal();
                }
                for k in (0..l).rev() {
                    let (_, mu, _) = self.predict_transition(&state, k)?;
                    state.activations[k] = mu.iter().map(|m| m + rng.normal()).collect();
                }
            }
        }
        Ok(state.activations.swap_remove(0))
    }
}

#[cfg(test)]
mod tests;
