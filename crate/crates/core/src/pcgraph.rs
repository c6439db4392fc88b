//! Predictive coding on arbitrary directed graphs.
//!
//! An [`AdjacencyMask`] says which node predicts which: entry `(i, j)` is
//! true when node `j` predicts node `i`. Every node has a value `a_i`, a
//! prediction `μ = f(W a + b)` with `W` restricted to the mask, and an error
//! `ε = a − μ`. Energy is `½‖ε‖²` over all nodes, clamped ones included.
//!
//! With a layered mask this reduces to a hierarchical [`Pcn`]; see
//! [`embed_hierarchical`].

use std::ops::Range;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::fnn::{Direction, Optimizer};
use crate::numerics::counter::measure;
use crate::numerics::{matvec, matvec_t, outer, Activation, Matrix, Rng, Vector};
use crate::pcn::{Checkpoint, EnergyReport, EpochMetrics, GraphCheckpoint, InferenceConfig, Pcn, TrainReport};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "MaskRepr", into = "MaskRepr")]
pub struct AdjacencyMask {
    n: usize,
    entries: Vec<bool>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MaskRepr {
    n: usize,
    edges: Vec<[usize; 2]>,
}

impl TryFrom<MaskRepr> for AdjacencyMask {
    type Error = Error;
    fn try_from(r: MaskRepr) -> Result<Self> {
        AdjacencyMask::from_edges(r.n, &r.edges)
    }
}

impl From<AdjacencyMask> for MaskRepr {
    fn from(m: AdjacencyMask) -> Self {
        MaskRepr { n: m.n, edges: m.edges() }
    }
}

impl AdjacencyMask {
    pub fn empty(n: usize) -> Self {
        AdjacencyMask {
            n,
            entries: vec![false; n * n],
        }
    }

    /// Every node predicts every other node.
    pub fn fully_connected(n: usize) -> Self {
        let mut m = AdjacencyMask::empty(n);
        for i in 0..n {
            for j in 0..n {
                m.entries[i * n + j] = i != j;
            }
        }
        m
    }

    /// `[i, j]` means `j` predicts `i`. Self-connections are rejected.
    pub fn from_edges(n: usize, edges: &[[usize; 2]]) -> Result<Self> {
        let mut m = AdjacencyMask::empty(n);
        for &[i, j] in edges {
            if i >= n || j >= n {
                return Err(Error::InvalidTopology(format!("edge [{i}, {j}] is outside {n} nodes")));
            }
            if i == j {
                return Err(Error::InvalidTopology(format!("self-connection on node {i}")));
            }
            m.entries[i * n + j] = true;
        }
        Ok(m)
    }

    /// Layered mask of a hierarchical net with the given widths, plus the
    /// node range of every layer.
    pub fn hierarchical(widths: &[usize], direction: Direction) -> (Self, Vec<Range<usize>>) {
        let mut blocks = Vec::with_capacity(widths.len());
        let mut off = 0;
        for &w in widths {
            blocks.push(off..off + w);
            off += w;
        }
        let mut m = AdjacencyMask::empty(off);
        for k in 0..widths.len().saturating_sub(1) {
            let (s, t) = match direction {
                Direction::Discriminative => (k, k + 1),
                Direction::Generative => (k + 1, k),
            };
            for i in blocks[t].clone() {
                for j in blocks[s].clone() {
                    m.entries[i * off + j] = true;
                }
            }
        }
        (m, blocks)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Whether node `j` predicts node `i`.
    pub fn get(&self, i: usize, j: usize) -> bool {
        self.entries[i * self.n + j]
    }

    pub fn edges(&self) -> Vec<[usize; 2]> {
        let mut out = Vec::new();
        for i in 0..self.n {
            for j in 0..self.n {
                if self.get(i, j) {
                    out.push([i, j]);
                }
            }
        }
        out
    }

    pub fn edge_count(&self) -> usize {
        self.entries.iter().filter(|&&e| e).count()
    }

    /// Order in which every node comes after all nodes predicting it, or
    /// `None` when the graph has a cycle. Ties go to the smallest index.
    pub fn topological_order(&self) -> Option<Vec<usize>> {
        let mut indegree: Vec<usize> = (0..self.n).map(|i| (0..self.n).filter(|&j| self.get(i, j)).count()).collect();
        let mut done = vec![false; self.n];
        let mut order = Vec::with_capacity(self.n);
        while order.len() < self.n {
            let next = (0..self.n).find(|&i| !done[i] && indegree[i] == 0)?;
            done[next] = true;
            order.push(next);
            for i in 0..self.n {
                if self.get(i, next) {
                    indegree[i] -= 1;
                }
            }
        }
        Some(order)
    }

    pub fn is_acyclic(&self) -> bool {
        self.topological_order().is_some()
    }

    /// Zero every entry of `w` outside the mask.
    pub fn apply(&self, w: &mut Matrix) {
        for i in 0..self.n {
            for j in 0..self.n {
                if !self.get(i, j) {
                    w[(i, j)] = 0.0;
                }
            }
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&s)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string(self)? + "\n").map_err(|e| Error::io(path, e))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GraphParams {
    pub weights: Matrix,
    pub bias: Vector,
}

impl GraphParams {
    pub fn zeros(n: usize) -> Self {
        GraphParams {
            weights: Matrix::zeros(n, n),
            bias: Vector::zeros(n),
        }
    }

    /// Uniform `[-scale, scale]` on masked entries, zero elsewhere and zero bias.
    pub fn init(mask: &AdjacencyMask, rng: &mut Rng, scale: f64) -> Self {
        let n = mask.n();
        GraphParams {
            weights: Matrix::from_fn(n, n, |i, j| if mask.get(i, j) { rng.uniform(-scale, scale) } else { 0.0 }),
            bias: Vector::zeros(n),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GraphState {
    pub a: Vector,
    /// `W a + b` from the last refresh.
    pub preacts: Vector,
    pub mu: Vector,
    pub eps: Vector,
    pub clamped: Vec<bool>,
}

impl GraphState {
    pub fn zeros(n: usize) -> Self {
        GraphState {
            a: Vector::zeros(n),
            preacts: Vector::zeros(n),
            mu: Vector::zeros(n),
            eps: Vector::zeros(n),
            clamped: vec![false; n],
        }
    }

    pub fn clamp(&mut self, nodes: &[usize], values: &[f64]) -> Result<()> {
        if nodes.len() != values.len() {
            return Err(Error::shape("graph clamp", (nodes.len(), 1), (values.len(), 1)));
        }
        for (&i, &v) in nodes.iter().zip(values) {
            if i >= self.a.len() {
                return Err(Error::Precondition(format!("node {i} out of range")));
            }
            self.a[i] = v;
            self.clamped[i] = true;
        }
        Ok(())
    }
}

/// How unclamped nodes start before inference.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphInit {
    #[default]
    Zeros,
    /// Each unclamped node takes its prediction, visiting nodes in
    /// topological order. Needs an acyclic mask.
    TopologicalSweep,
}

/// Which nodes receive the input and label columns of a dataset.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClampingPlan {
    pub x_nodes: Vec<usize>,
    #[serde(default)]
    pub y_nodes: Vec<usize>,
}

impl ClampingPlan {
    pub fn validate(&self, n: usize) -> Result<()> {
        let mut seen = vec![false; n];
        for &i in self.x_nodes.iter().chain(&self.y_nodes) {
            if i >= n {
                return Err(Error::Precondition(format!("clamping plan names node {i}, graph has {n}")));
            }
            if seen[i] {
                return Err(Error::Precondition(format!("node {i} is assigned twice in the clamping plan")));
            }
            seen[i] = true;
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct GraphTrainOptions {
    pub epochs: usize,
    pub init: GraphInit,
    pub stop_at_accuracy: Option<f64>,
    pub record_timing: bool,
    /// Inference used for accuracy; defaults to the training schedule.
    pub test_inference: Option<InferenceConfig>,
}

impl Default for GraphTrainOptions {
    fn default() -> Self {
        GraphTrainOptions {
            epochs: 1,
            init: GraphInit::Zeros,
            stop_at_accuracy: None,
            record_timing: false,
            test_inference: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct PcGraph {
    pub mask: AdjacencyMask,
    pub params: GraphParams,
    /// Activation of each node's prediction.
    pub activations: Vec<Activation>,
}

impl PcGraph {
    pub fn new(mask: AdjacencyMask, mut params: GraphParams, activations: Vec<Activation>) -> Result<Self> {
        let n = mask.n();
        if params.weights.shape() != (n, n) || params.bias.len() != n {
            return Err(Error::shape("graph params", params.weights.shape(), (n, n)));
        }
        if activations.len() != n {
            return Err(Error::InvalidTopology(format!("{} activations for {n} nodes", activations.len())));
        }
        mask.apply(&mut params.weights);
        Ok(PcGraph {
            mask,
            params,
            activations,
        })
    }

    pub fn init(mask: AdjacencyMask, activations: Vec<Activation>, rng: &mut Rng, scale: f64) -> Result<Self> {
        let params = GraphParams::init(&mask, rng, scale);
        PcGraph::new(mask, params, activations)
    }

    pub fn n(&self) -> usize {
        self.mask.n()
    }

    pub fn zero_state(&self) -> GraphState {
        GraphState::zeros(self.n())
    }

    /// Refresh `μ = f(W a + b)` and `ε = a − μ`.
    pub fn predictions(&self, state: &mut GraphState) -> Result<()> {
        let wa = matvec(&self.params.weights, &state.a)?;
        for i in 0..self.n() {
            let z = wa[i] + self.params.bias[i];
            let mu = self.activations[i].apply(z);
            state.preacts[i] = z;
            state.mu[i] = mu;
            state.eps[i] = state.a[i] - mu;
        }
        Ok(())
    }

    /// `½‖ε‖²`.
    pub fn energy(&self, state: &GraphState) -> f64 {
        0.5 * state.eps.norm_sq()
    }

    /// Energy split into the given output nodes and the rest.
    pub fn energy_report(&self, state: &GraphState, output_nodes: &[usize]) -> EnergyReport {
        let per_node: Vec<f64> = state.eps.iter().map(|e| 0.5 * e * e).collect();
        let output_loss = output_nodes.iter().map(|&i| per_node[i]).sum();
        let total = per_node.iter().sum();
        let residual = per_node
            .iter()
            .enumerate()
            .filter(|(i, _)| !output_nodes.contains(i))
            .map(|(_, e)| e)
            .sum();
        EnergyReport {
            total,
            per_layer: per_node,
            output_loss,
            residual,
        }
    }

    /// `∂E/∂a = ε − Wᵀ(ε ⊙ f'(z))` from the stored pre-activations.
    pub fn activation_gradient(&self, state: &GraphState) -> Result<Vector> {
        let d = self.scaled_errors(state);
        let back = matvec_t(&self.params.weights, &d)?;
        Ok(state.eps.iter().zip(back.iter()).map(|(e, b)| e - b).collect())
    }

    fn scaled_errors(&self, state: &GraphState) -> Vector {
        (0..self.n())
            .map(|i| state.eps[i] * self.activations[i].derivative(state.preacts[i]))
            .collect()
    }

    /// Jacobi step on every unclamped node, then refresh.
    pub fn inference_step(&self, state: &mut GraphState, gamma: f64) -> Result<()> {
        let g = self.activation_gradient(state)?;
        for i in 0..self.n() {
            if !state.clamped[i] {
                state.a[i] -= gamma * g[i];
            }
        }
        self.predictions(state)
    }

    pub fn infer(&self, state: &mut GraphState, cfg: &InferenceConfig) -> Result<Vec<f64>> {
        let mut e = self.energy(state);
        let mut trace = vec![e];
        for _ in 0..cfg.steps {
            self.inference_step(state, cfg.gamma)?;
            let next = self.energy(state);
            trace.push(next);
            if !next.is_finite() || next > crate::pcn::DIVERGENCE_ENERGY {
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

    /// `(∂E/∂W, ∂E/∂b)`, with `∂E/∂W` zero outside the mask.
    pub fn weight_gradient(&self, state: &GraphState) -> (Matrix, Vector) {
        let neg: Vector = self.scaled_errors(state).iter().map(|u| -u).collect();
        let mut gw = outer(&neg, &state.a);
        self.mask.apply(&mut gw);
        (gw, neg)
    }

    /// Plain update `W += α (ε ⊙ f'(z)) aᵀ`, `b += α (ε ⊙ f'(z))`, masked.
    pub fn weight_update(&mut self, state: &GraphState, alpha: f64) {
        let (gw, gb) = self.weight_gradient(state);
        self.params.weights.axpy(-alpha, &gw);
        self.params.bias.axpy(-alpha, &gb);
        self.mask.apply(&mut self.params.weights);
    }

    fn optimizer_step(&mut self, opt: &mut Optimizer, gw: Matrix, gb: Vector) -> Result<()> {
        let n = self.n();
        let mut mats = [
            std::mem::replace(&mut self.params.weights, Matrix::zeros(0, 0)),
            Matrix::from_vec(n, 1, std::mem::take(&mut self.params.bias).into_inner())?,
        ];
        let grads = [gw, Matrix::from_vec(n, 1, gb.into_inner())?];
        let res = opt.step(&mut mats, &grads);
        let [w, b] = mats;
        self.params.weights = w;
        self.params.bias = Vector::from(b.as_slice());
        self.mask.apply(&mut self.params.weights);
        res
    }

    /// Set unclamped nodes before inference, then refresh.
    pub fn initialize(&self, state: &mut GraphState, init: GraphInit) -> Result<()> {
        match init {
            GraphInit::Zeros => {
                for i in 0..self.n() {
                    if !state.clamped[i] {
                        state.a[i] = 0.0;
                    }
                }
            }
            GraphInit::TopologicalSweep => {
                let order = self
                    .mask
                    .topological_order()
                    .ok_or_else(|| Error::Precondition("topological sweep needs an acyclic mask".into()))?;
                for i in order {
                    if !state.clamped[i] {
                        let z = crate::numerics::matrix::dot(self.params.weights.row(i), &state.a) + self.params.bias[i];
                        state.a[i] = self.activations[i].apply(z);
                    }
                }
            }
        }
        self.predictions(state)
    }

    /// State for one sample: clamp per plan, initialize the rest.
    pub fn prepare_state(&self, plan: &ClampingPlan, x: &[f64], y: Option<&[f64]>, init: GraphInit) -> Result<GraphState> {
        let mut s = self.zero_state();
        s.clamp(&plan.x_nodes, x)?;
        if let Some(y) = y {
            s.clamp(&plan.y_nodes, y)?;
        }
        self.initialize(&mut s, init)?;
        Ok(s)
    }

    /// Clamp the inputs, relax, and read the label nodes.
    pub fn predict(&self, plan: &ClampingPlan, x: &[f64], cfg: &InferenceConfig, init: GraphInit) -> Result<Vector> {
        let mut s = self.prepare_state(plan, x, None, init)?;
        self.infer(&mut s, cfg)?;
        Ok(plan.y_nodes.iter().map(|&i| s.a[i]).collect())
    }

    /// One IL update on a single sample; returns the post-inference state.
    pub fn il_update(
        &mut self,
        plan: &ClampingPlan,
        x: &[f64],
        y: Option<&[f64]>,
        cfg: &InferenceConfig,
        opt: &mut Optimizer,
        init: GraphInit,
    ) -> Result<GraphState> {
        let mut s = self.prepare_state(plan, x, y, init)?;
        self.infer(&mut s, cfg).map_err(|e| match e {
            Error::Divergence { energy, gamma, .. } => Error::Divergence {
                energy,
                gamma,
                alpha: opt.alpha(),
            },
            other => other,
        })?;
        let (gw, gb) = self.weight_gradient(&s);
        self.optimizer_step(opt, gw, gb)?;
        Ok(s)
    }

    pub fn train_accuracy(&self, data: &Dataset, plan: &ClampingPlan, cfg: &InferenceConfig, init: GraphInit) -> Result<Option<f64>> {
        if !data.is_labelled() || plan.y_nodes.is_empty() {
            return Ok(None);
        }
        let mut correct = 0;
        for s in data.samples() {
            let y_hat = self.predict(plan, &s.x, cfg, init)?;
            let y = s.y.as_ref().expect("labelled");
            let hit = if y.len() == 1 {
                (y_hat[0] > 0.5) == (y[0] > 0.5)
            } else {
                argmax(&y_hat) == argmax(y)
            };
            correct += usize::from(hit);
        }
        Ok(Some(correct as f64 / data.len() as f64))
    }

    pub fn to_checkpoint(&self, rng_seed: u64) -> Checkpoint {
        Checkpoint {
            topology: vec![self.n()],
            direction: Direction::Discriminative,
            activations: self.activations.clone(),
            weights: vec![self.params.weights.to_nested()],
            precisions: None,
            rng_seed,
            graph: Some(GraphCheckpoint {
                n: self.n(),
                edges: self.mask.edges(),
                bias: self.params.bias.to_vec(),
            }),
        }
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        let g = ck
            .graph
            .as_ref()
            .ok_or_else(|| Error::Unsupported("checkpoint holds a layered net, not a PC graph".into()))?;
        let mask = AdjacencyMask::from_edges(g.n, &g.edges)?;
        let w = ck
            .weights
            .first()
            .ok_or_else(|| Error::Precondition("graph checkpoint has no weights".into()))?;
        let params = GraphParams {
            weights: Matrix::from_rows(w)?,
            bias: Vector::from(g.bias.clone()),
        };
        PcGraph::new(mask, params, ck.activations.clone())
    }
}

fn argmax(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map_or(0, |(i, _)| i)
}

/// Train a PC graph with IL, one sample per update.
pub fn train_graph(
    graph: &mut PcGraph,
    data: &Dataset,
    plan: &ClampingPlan,
    cfg: &InferenceConfig,
    opt: &mut Optimizer,
    opts: &GraphTrainOptions,
) -> Result<TrainReport> {
    cfg.validate()?;
    plan.validate(graph.n())?;
    if data.x_dim() != plan.x_nodes.len() {
        return Err(Error::Dataset(format!(
            "inputs have width {}, plan has {} x-nodes",
            data.x_dim(),
            plan.x_nodes.len()
        )));
    }
    if data.is_labelled() && !plan.y_nodes.is_empty() && data.y_dim() != plan.y_nodes.len() {
        return Err(Error::Dataset(format!(
            "labels have width {}, plan has {} y-nodes",
            data.y_dim(),
            plan.y_nodes.len()
        )));
    }
    let mut report = TrainReport::default();
    let (mut matmuls, mut flops) = (0, 0);
    for epoch in 1..=opts.epochs {
        let start = opts.record_timing.then(Instant::now);
        let (res, count) = measure(|| -> Result<Vec<EnergyReport>> {
            let mut energies = Vec::with_capacity(data.len());
            for s in data.samples() {
                let y = if plan.y_nodes.is_empty() { None } else { s.y.as_deref() };
                let st = graph.il_update(plan, &s.x, y, cfg, opt, opts.init)?;
                energies.push(graph.energy_report(&st, &plan.y_nodes));
            }
            Ok(energies)
        });
        let energies = res?;
        matmuls += count.matmuls;
        flops += count.flops;
        let e = EnergyReport::mean(&energies);
        let acc = graph.train_accuracy(data, plan, opts.test_inference.as_ref().unwrap_or(cfg), opts.init)?;
        report.epochs.push(EpochMetrics {
            epoch,
            sample: data.len().saturating_sub(1),
            energy_total: e.total,
            output_loss: e.output_loss,
            residual: e.residual,
            train_accuracy: acc,
            wall_ns: start.map_or(0, |s| s.elapsed().as_nanos() as u64),
            matmuls,
            flops,
        });
        if let (Some(target), Some(acc)) = (opts.stop_at_accuracy, acc) {
            if acc >= target {
                report.converged_epoch = Some(epoch);
                break;
            }
        }
    }
    Ok(report)
}

/// PC graph whose node blocks reproduce `pcn` layer by layer, and the node
/// range of each layer. Root-layer nodes get a linear activation and zero
/// bias; precisions are not carried over.
pub fn embed_hierarchical(pcn: &Pcn) -> Result<(PcGraph, Vec<Range<usize>>)> {
    let topo = &pcn.topology;
    let (mask, blocks) = AdjacencyMask::hierarchical(topo.widths(), topo.direction());
    let n = mask.n();
    let mut params = GraphParams::zeros(n);
    let mut activations = vec![Activation::Linear; n];
    for k in 0..topo.depth() {
        let (s, t) = topo.transition(k);
        let w = &pcn.params.weights[k];
        for (r, i) in blocks[t].clone().enumerate() {
            for (c, j) in blocks[s].clone().enumerate() {
                params.weights[(i, j)] = w[(r, c)];
            }
            params.bias[i] = w[(r, w.cols() - 1)];
            activations[i] = topo.activation(k);
        }
    }
    Ok((PcGraph::new(mask, params, activations)?, blocks))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fnn::Topology;
    use crate::numerics::{finite_diff_gradient, GradCheck};
    use crate::pcn::InferenceSchedule;

    fn random_graph(rng: &mut Rng, n: usize, density: f64, smooth: bool) -> PcGraph {
        let mut edges = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if i != j && rng.bernoulli(density) {
                    edges.push([i, j]);
                }
            }
        }
        let mask = AdjacencyMask::from_edges(n, &edges).unwrap();
        let kinds: &[Activation] = if smooth {
            &[Activation::Linear, Activation::Tanh, Activation::Sigmoid]
        } else {
            &Activation::ALL
        };
        let acts = (0..n).map(|_| kinds[rng.below(kinds.len())]).collect();
        let mut g = PcGraph::init(mask, acts, rng, 0.3).unwrap();
        for b in g.params.bias.iter_mut() {
            *b = rng.uniform(-0.3, 0.3);
        }
        g
    }

    fn random_state(g: &PcGraph, rng: &mut Rng) -> GraphState {
        let mut s = g.zero_state();
        for i in 0..g.n() {
            s.a[i] = rng.uniform(-1.0, 1.0);
            s.clamped[i] = rng.bernoulli(0.3);
        }
        g.predictions(&mut s).unwrap();
        s
    }

    #[test]
    fn mask_json_round_trip() {
        let m = AdjacencyMask::from_edges(3, &[[0, 1], [2, 0]]).unwrap();
        let s = serde_json::to_string(&m).unwrap();
        assert_eq!(s, r#"{"n":3,"edges":[[0,1],[2,0]]}"#);
        assert_eq!(serde_json::from_str::<AdjacencyMask>(&s).unwrap(), m);
        assert!(serde_json::from_str::<AdjacencyMask>(r#"{"n":2,"edges":[[1,1]]}"#).is_err());
        assert!(serde_json::from_str::<AdjacencyMask>(r#"{"n":2,"edges":[[0,5]]}"#).is_err());
    }

    #[test]
    fn topological_order_detects_cycles() {
        let (m, _) = AdjacencyMask::hierarchical(&[2, 3, 1], Direction::Discriminative);
        assert_eq!(m.topological_order().unwrap(), (0..6).collect::<Vec<_>>());
        assert!(!AdjacencyMask::fully_connected(3).is_acyclic());
        assert_eq!(AdjacencyMask::fully_connected(4).edge_count(), 12);
    }

    #[test]
    fn zero_weights_predict_the_bias() {
        let mut g = PcGraph::new(AdjacencyMask::fully_connected(3), GraphParams::zeros(3), vec![Activation::Linear; 3]).unwrap();
        let mut s = g.zero_state();
        s.a = Vector::from(vec![1.0, -2.0, 0.5]);
        g.predictions(&mut s).unwrap();
        assert!(s.eps.bitwise_eq(&s.a));
        g.params.bias = Vector::from(vec![0.1, 0.2, 0.3]);
        g.activations = vec![Activation::Tanh; 3];
        g.predictions(&mut s).unwrap();
        assert_eq!(s.mu[2], 0.3f64.tanh());
    }

    #[test]
    fn masked_entries_contribute_nothing() {
        let mut rng = Rng::new(1);
        let g = random_graph(&mut rng, 6, 0.4, false);
        let mut s = random_state(&g, &mut rng);
        g.predictions(&mut s).unwrap();
        let dense = g.params.weights.clone();
        for i in 0..6 {
            let mut z = g.params.bias[i];
            for j in 0..6 {
                if g.mask.get(i, j) {
                    z += dense[(i, j)] * s.a[j];
                } else {
                    assert_eq!(dense[(i, j)], 0.0);
                }
            }
            assert!((g.activations[i].apply(z) - s.mu[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = Rng::new(2);
        let check = GradCheck::default();
        for _ in 0..10 {
            let g = random_graph(&mut rng, 5, 0.5, true);
            let s = random_state(&g, &mut rng);
            let ga = g.activation_gradient(&s).unwrap();
            let fd = finite_diff_gradient(
                |a| {
                    let mut p = s.clone();
                    p.a.copy_from_slice(a);
                    g.predictions(&mut p).unwrap();
                    g.energy(&p)
                },
                &s.a,
                1e-6,
            );
            assert!(check.all_close(&ga, &fd));

            let (gw, gb) = g.weight_gradient(&s);
            let mut h = g.clone();
            let fd = finite_diff_gradient(
                |w| {
                    h.params.weights.as_mut_slice().copy_from_slice(w);
                    let mut p = s.clone();
                    h.predictions(&mut p).unwrap();
                    h.energy(&p)
                },
                g.params.weights.as_slice(),
                1e-6,
            );
            for i in 0..5 {
                for j in 0..5 {
                    if g.mask.get(i, j) {
                        assert!(check.close(gw[(i, j)], fd[i * 5 + j]));
                    } else {
                        assert_eq!(gw[(i, j)], 0.0);
                    }
                }
            }
            let mut h = g.clone();
            let fd = finite_diff_gradient(
                |b| {
                    h.params.bias.copy_from_slice(b);
                    let mut p = s.clone();
                    h.predictions(&mut p).unwrap();
                    h.energy(&p)
                },
                &g.params.bias,
                1e-6,
            );
            assert!(check.all_close(&gb, &fd));
        }
    }

    #[test]
    fn three_node_update_matches_outer_product() {
        let mask = AdjacencyMask::fully_connected(3);
        let w = Matrix::from_rows(&[vec![0.0, 0.5, -0.5], vec![0.25, 0.0, 1.0], vec![-1.0, 2.0, 0.0]]).unwrap();
        let mut g = PcGraph::new(
            mask,
            GraphParams {
                weights: w.clone(),
                bias: Vector::zeros(3),
            },
            vec![Activation::Linear; 3],
        )
        .unwrap();
        let mut s = g.zero_state();
        s.a = Vector::from(vec![1.0, 2.0, 3.0]);
        g.predictions(&mut s).unwrap();
        // Wa = [-0.5, 3.25, 3.0], ε = [1.5, -1.25, 0.0]
        assert_eq!(&s.eps[..], &[1.5, -1.25, 0.0]);
        g.weight_update(&s, 0.1);
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 0.0 } else { w[(i, j)] + 0.1 * s.eps[i] * s.a[j] };
                assert!((g.params.weights[(i, j)] - expect).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn inference_descends_energy() {
        let mut rng = Rng::new(3);
        for _ in 0..20 {
            let n = 2 + rng.below(19);
            let g = random_graph(&mut rng, n, 0.5, true);
            let mut s = random_state(&g, &mut rng);
            let mut e = g.energy(&s);
            for _ in 0..100 {
                g.inference_step(&mut s, 0.1).unwrap();
                let next = g.energy(&s);
                assert!(next <= e + 1e-12);
                e = next;
            }
        }
    }

    #[test]
    fn linear_fixed_point_solves_the_least_squares_problem() {
        let mut rng = Rng::new(4);
        for _ in 0..10 {
            let n = 5;
            let mut g = random_graph(&mut rng, n, 0.7, true);
            g.activations = vec![Activation::Linear; n];
            let mut s = g.zero_state();
            for i in 0..n {
                s.a[i] = rng.uniform(-1.0, 1.0);
            }
            s.clamped = vec![true, true, false, false, false];
            g.predictions(&mut s).unwrap();
            g.infer(&mut s, &InferenceConfig::fixed(0.2, 20_000)).unwrap();
            // E = ½‖(I − W) a − b‖²; minimize over the free block.
            let a_mat = nalgebra::DMatrix::from_fn(n, n, |i, j| f64::from(u8::from(i == j)) - g.params.weights[(i, j)]);
            let free = [2, 3, 4];
            let af = nalgebra::DMatrix::from_fn(n, 3, |i, c| a_mat[(i, free[c])]);
            let c = nalgebra::DVector::from_fn(n, |i, _| {
                a_mat[(i, 0)] * s.a[0] + a_mat[(i, 1)] * s.a[1] - g.params.bias[i]
            });
            let lhs = af.transpose() * &af;
            let rhs = -(af.transpose() * c);
            let sol = lhs.lu().solve(&rhs).unwrap();
            for (c, &i) in free.iter().enumerate() {
                assert!((s.a[i] - sol[c]).abs() < 1e-8, "node {i}: {} vs {}", s.a[i], sol[c]);
            }
        }
    }

    #[test]
    fn empty_mask_relaxes_to_bias() {
        let mask = AdjacencyMask::empty(3);
        let mut g = PcGraph::new(mask, GraphParams::zeros(3), vec![Activation::Tanh; 3]).unwrap();
        g.params.bias = Vector::from(vec![0.2, -0.4, 0.6]);
        let data = Dataset::new(
            "t",
            vec![Vector::from(vec![1.0])],
            Some(vec![Vector::from(vec![0.0])]),
        )
        .unwrap();
        let plan = ClampingPlan {
            x_nodes: vec![0],
            y_nodes: vec![1],
        };
        let opts = GraphTrainOptions {
            epochs: 3,
            ..Default::default()
        };
        train_graph(&mut g, &data, &plan, &InferenceConfig::fixed(0.1, 10), &mut Optimizer::sgd(0.1), &opts).unwrap();
        assert_eq!(g.params.weights.max_abs(), 0.0);
        let mut s = g.zero_state();
        s.clamp(&[0], &[1.0]).unwrap();
        g.initialize(&mut s, GraphInit::Zeros).unwrap();
        g.infer(&mut s, &InferenceConfig::fixed(0.2, 400)).unwrap();
        assert!((s.a[2] - g.params.bias[2].tanh()).abs() < 1e-8);
    }

    #[test]
    fn overlapping_plan_is_rejected() {
        let plan = ClampingPlan {
            x_nodes: vec![0, 1],
            y_nodes: vec![1],
        };
        assert!(plan.validate(4).is_err());
        assert!(ClampingPlan { x_nodes: vec![5], y_nodes: vec![] }.validate(4).is_err());
    }

    #[test]
    fn hierarchical_embedding_reproduces_pcn_steps() {
        let mut rng = Rng::new(5);
        let t = Topology::new(
            vec![3, 4, 4, 2],
            vec![Activation::Tanh, Activation::Sigmoid, Activation::Linear],
            Direction::Discriminative,
        )
        .unwrap();
        let pcn = Pcn::init(t, &mut rng, 0.6);
        let (g, blocks) = embed_hierarchical(&pcn).unwrap();
        let x: Vec<f64> = (0..3).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let y: Vec<f64> = (0..2).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let mut ps = pcn.zero_state();
        ps.clamp(0, &x).unwrap();
        ps.clamp(3, &y).unwrap();
        pcn.feedforward_init(&mut ps).unwrap();
        let plan = ClampingPlan {
            x_nodes: blocks[0].clone().collect(),
            y_nodes: blocks[3].clone().collect(),
        };
        let mut gs = g.prepare_state(&plan, &x, Some(&y), GraphInit::TopologicalSweep).unwrap();
        for _ in 0..20 {
            for l in 1..=3 {
                for (r, i) in blocks[l].clone().enumerate() {
                    assert!((gs.a[i] - ps.activations[l][r]).abs() < 1e-12);
                    assert!((gs.eps[i] - ps.errors[l][r]).abs() < 1e-12);
                }
            }
            pcn.inference_step(&mut ps, 0.1, InferenceSchedule::Simultaneous).unwrap();
            g.inference_step(&mut gs, 0.1).unwrap();
        }
    }

    #[test]
    fn graph_checkpoint_round_trip() {
        let mut rng = Rng::new(6);
        let g = random_graph(&mut rng, 5, 0.5, false);
        let ck = g.to_checkpoint(6);
        let back = PcGraph::from_checkpoint(&Checkpoint::from_json(&ck.to_json().unwrap()).unwrap()).unwrap();
        assert!(back.params.weights.bitwise_eq(&g.params.weights));
        assert!(back.params.bias.bitwise_eq(&g.params.bias));
        assert_eq!(back.mask, g.mask);
        assert!(ck.to_pcn().is_err());
    }

    #[test]
    fn fully_connected_graph_learns_xor() {
        let mut rng = Rng::new(4);
        let mut acts = vec![Activation::Tanh; 12];
        acts[2] = Activation::Sigmoid;
        let mut g = PcGraph::init(AdjacencyMask::fully_connected(12), acts, &mut rng, 0.5).unwrap();
        let plan = ClampingPlan {
            x_nodes: vec![0, 1],
            y_nodes: vec![2],
        };
        let opts = GraphTrainOptions {
            epochs: 100,
            stop_at_accuracy: Some(1.0),
            test_inference: Some(InferenceConfig::fixed(0.1, 2000)),
            ..Default::default()
        };
        let r = train_graph(&mut g, &Dataset::xor(), &plan, &InferenceConfig::fixed(0.1, 50), &mut Optimizer::adam(0.02), &opts).unwrap();
        assert!(r.converged_epoch.is_some());
        assert_eq!(r.final_accuracy(), Some(1.0));
    }
}
