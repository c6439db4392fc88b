use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fnn::Topology;
use crate::numerics::Vector;

/// Lower bound on every learned precision (and on `1/variance`).
pub const PRECISION_FLOOR: f64 = 1e-6;
/// Variances are clipped to `[VARIANCE_FLOOR, 1/PRECISION_FLOOR]`.
pub const VARIANCE_FLOOR: f64 = 1e-6;

/// Activations, predictions and errors of one network instance.
///
/// `predictions` and `errors` are indexed by layer; the root layer (the one
/// nothing predicts) holds empty vectors there. `preacts[k]` is the
/// pre-activation `w^k [a_source; 1]` of transition `k` from the last refresh.
#[derive(Clone, Debug, PartialEq)]
pub struct NetState {
    pub activations: Vec<Vector>,
    pub preacts: Vec<Vector>,
    pub predictions: Vec<Vector>,
    pub errors: Vec<Vector>,
    pub clamped: Vec<bool>,
}

impl NetState {
    /// All activations zero, nothing clamped, predictions not yet refreshed.
    pub fn zeros(topo: &Topology) -> Self {
        let widths = topo.widths();
        let root = topo.root_layer();
        let per_layer = |l: usize| if l == root { Vector::default() } else { Vector::zeros(widths[l]) };
        NetState {
            activations: widths.iter().map(|&w| Vector::zeros(w)).collect(),
            preacts: (0..topo.depth()).map(|k| Vector::zeros(widths[topo.transition(k).1])).collect(),
            predictions: (0..widths.len()).map(per_layer).collect(),
            errors: (0..widths.len()).map(per_layer).collect(),
            clamped: vec![false; widths.len()],
        }
    }

    pub fn depth(&self) -> usize {
        self.activations.len() - 1
    }

    /// Fix `layer` to `values`.
    pub fn clamp(&mut self, layer: usize, values: &[f64]) -> Result<()> {
        let a = self
            .activations
            .get_mut(layer)
            .ok_or_else(|| Error::Precondition(format!("no layer {layer}")))?;
        if a.len() != values.len() {
            return Err(Error::shape("clamp", (a.len(), 1), (values.len(), 1)));
        }
        a.copy_from_slice(values);
        self.clamped[layer] = true;
        Ok(())
    }

    pub fn release(&mut self, layer: usize) {
        self.clamped[layer] = false;
    }

    pub fn is_finite(&self) -> bool {
        self.activations.iter().all(Vector::is_finite) && self.errors.iter().all(Vector::is_finite)
    }

    pub fn bitwise_eq(&self, other: &NetState) -> bool {
        let eq = |a: &[Vector], b: &[Vector]| a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.bitwise_eq(y));
        eq(&self.activations, &other.activations)
            && eq(&self.preacts, &other.preacts)
            && eq(&self.predictions, &other.predictions)
            && eq(&self.errors, &other.errors)
            && self.clamped == other.clamped
    }
}

/// Optional diagonal precision per layer; a missing entry means identity.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PrecisionSet {
    layers: Vec<Option<Vector>>,
}

impl PrecisionSet {
    pub fn identity(topo: &Topology) -> Self {
        PrecisionSet {
            layers: vec![None; topo.depth() + 1],
        }
    }

    pub fn get(&self, layer: usize) -> Option<&Vector> {
        self.layers.get(layer).and_then(Option::as_ref)
    }

    pub fn set(&mut self, layer: usize, pi: Vector) -> Result<()> {
        if let Some(v) = pi.iter().find(|&&v| !(v >= PRECISION_FLOOR) || !v.is_finite()) {
            return Err(Error::Precondition(format!(
                "precision {v} on layer {layer} is below the floor {PRECISION_FLOOR}"
            )));
        }
        if layer >= self.layers.len() {
            self.layers.resize(layer + 1, None);
        }
        self.layers[layer] = Some(pi);
        Ok(())
    }

    pub fn is_identity(&self) -> bool {
        self.layers.iter().all(Option::is_none)
    }

    pub fn layers(&self) -> &[Option<Vector>] {
        &self.layers
    }

    /// Checks widths against `topo` (the root layer may not carry one).
    pub fn validate(&self, topo: &Topology) -> Result<()> {
        if self.layers.len() > topo.depth() + 1 {
            return Err(Error::Precondition("more precision entries than layers".into()));
        }
        for (l, p) in self.layers.iter().enumerate() {
            if let Some(p) = p {
                if l == topo.root_layer() || p.len() != topo.width(l) {
                    return Err(Error::shape("precisions", (p.len(), 1), (topo.width(l), 1)));
                }
            }
        }
        Ok(())
    }
}

/// Energy and its split into output loss and residual.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct EnergyReport {
    pub total: f64,
    /// `½ εᵀΠε` per layer; 0 for the root layer.
    pub per_layer: Vec<f64>,
    /// Term of the last layer along the prediction direction.
    pub output_loss: f64,
    /// Everything else.
    pub residual: f64,
}

impl EnergyReport {
    pub(crate) fn from_layers(per_layer: Vec<f64>, output_layer: usize) -> Self {
        let total = per_layer.iter().sum();
        let residual = per_layer
            .iter()
            .enumerate()
            .filter(|&(l, _)| l != output_layer)
            .map(|(_, e)| e)
            .sum();
        EnergyReport {
            total,
            output_loss: per_layer[output_layer],
            residual,
            per_layer,
        }
    }

    /// Componentwise mean of several reports.
    pub fn mean(reports: &[EnergyReport]) -> EnergyReport {
        let n = reports.len().max(1) as f64;
        let layers = reports.first().map_or(0, |r| r.per_layer.len());
        let mut out = EnergyReport {
            per_layer: vec![0.0; layers],
            ..Default::default()
        };
        for r in reports {
            out.total += r.total;
            out.output_loss += r.output_loss;
            out.residual += r.residual;
            for (o, v) in out.per_layer.iter_mut().zip(&r.per_layer) {
                *o += v;
            }
        }
        out.total /= n;
        out.output_loss /= n;
        out.residual /= n;
        out.per_layer.iter_mut().for_each(|v| *v /= n);
        out
    }
}

/// Diagonal precision M-step: `Π_ii = 1 / clip(mean_n ε_i², 1e-6, 1e6)` for
/// every layer with an error node, averaging over `states`.
pub fn update_precisions(states: &[NetState]) -> Result<PrecisionSet> {
    let first = states
        .first()
        .ok_or_else(|| Error::Precondition("precision update needs at least one state".into()))?;
    let mut out = PrecisionSet {
        layers: vec![None; first.errors.len()],
    };
    for l in 0..first.errors.len() {
        let w = first.errors[l].len();
        if w == 0 {
            continue;
        }
        let mut acc = vec![0.0; w];
        for s in states {
            if s.errors[l].len() != w {
                return Err(Error::shape("update_precisions", (w, 1), (s.errors[l].len(), 1)));
            }
            for (a, e) in acc.iter_mut().zip(s.errors[l].iter()) {
                *a += e * e;
            }
        }
        let n = states.len() as f64;
        let pi: Vector = acc
            .iter()
            .map(|a| 1.0 / (a / n).clamp(VARIANCE_FLOOR, 1.0 / PRECISION_FLOOR))
            .collect();
        out.set(l, pi)?;
    }
    Ok(out)
}
