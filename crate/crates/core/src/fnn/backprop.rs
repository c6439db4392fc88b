use super::{Direction, Params, Topology};
use crate::error::{Error, Result};
use crate::numerics::{affine, affine_t, outer_aug, Matrix, Vector};

/// Everything a forward and backward pass produce.
#[derive(Clone, Debug)]
pub struct BpWorkspace {
    /// `a⁰ … a^L`.
    pub activations: Vec<Vector>,
    /// `z^k = w^k [a^k; 1]` for each transition.
    pub preacts: Vec<Vector>,
    /// `δ^ℓ` for each layer; `δ⁰` is left empty.
    pub deltas: Vec<Vector>,
}

impl BpWorkspace {
    pub fn output(&self) -> &Vector {
        self.activations.last().expect("at least two layers")
    }
}

/// `a^{k+1} = f(w^k [a^k; 1])` for `k = 0 … L−1`. One matmul per transition.
pub fn forward(params: &Params, topo: &Topology, x: &[f64]) -> Result<BpWorkspace> {
    if topo.direction() != Direction::Discriminative {
        return Err(Error::Unsupported("forward pass needs a discriminative topology".into()));
    }
    if x.len() != topo.width(0) {
        return Err(Error::shape("forward", (topo.width(0), 1), (x.len(), 1)));
    }
    let l = topo.depth();
    let mut activations = Vec::with_capacity(l + 1);
    let mut preacts = Vec::with_capacity(l);
    activations.push(Vector::from(x));
    for k in 0..l {
        let z = affine(&params.weights[k], &activations[k])?;
        let f = topo.activation(k);
        activations.push(z.iter().map(|&v| f.apply(v)).collect());
        preacts.push(z);
    }
    Ok(BpWorkspace {
        activations,
        preacts,
        deltas: vec![Vector::default(); l + 1],
    })
}

/// `‖ŷ − y‖²`, unscaled.
pub fn mse_loss(y_hat: &[f64], y: &[f64]) -> Result<f64> {
    if y_hat.len() != y.len() {
        return Err(Error::shape("mse_loss", (y_hat.len(), 1), (y.len(), 1)));
    }
    Ok(y_hat.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum())
}

/// Gradients of `½‖ŷ − y‖²` with respect to every weight matrix.
///
/// Costs `3L − 1` matmuls: L forward, L − 1 backward, L outer products.
pub fn bp_gradients(params: &Params, topo: &Topology, x: &[f64], y: &[f64]) -> Result<Vec<Matrix>> {
    let mut ws = forward(params, topo, x)?;
    backward(params, topo, &mut ws, y)
}

/// Backward pass on a workspace produced by [`forward`].
pub fn backward(params: &Params, topo: &Topology, ws: &mut BpWorkspace, y: &[f64]) -> Result<Vec<Matrix>> {
    let l = topo.depth();
    if y.len() != topo.width(l) {
        return Err(Error::shape("bp_gradients", (topo.width(l), 1), (y.len(), 1)));
    }
    ws.deltas[l] = ws.activations[l].iter().zip(y).map(|(a, t)| a - t).collect();
    // scaled[k] = δ^{k+1} ⊙ f'(z^k)
    let mut scaled = vec![Vector::default(); l];
    for k in (0..l).rev() {
        let f = topo.activation(k);
        scaled[k] = ws.deltas[k + 1]
            .iter()
            .zip(ws.preacts[k].iter())
            .map(|(d, &z)| d * f.derivative(z))
            .collect();
        if k > 0 {
            ws.deltas[k] = affine_t(&params.weights[k], &scaled[k])?;
        }
    }
    Ok((0..l).map(|k| outer_aug(&scaled[k], &ws.activations[k])).collect())
}
