use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Matrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

/// SGD or Adam over a list of weight matrices. Adam moments are created on
/// the first step.
#[derive(Clone, Debug)]
pub struct Optimizer {
    kind: OptimizerKind,
    alpha: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: u64,
    m: Vec<Matrix>,
    v: Vec<Matrix>,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, alpha: f64) -> Self {
        Optimizer {
            kind,
            alpha,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn sgd(alpha: f64) -> Self {
        Optimizer::new(OptimizerKind::Sgd, alpha)
    }

    pub fn adam(alpha: f64) -> Self {
        Optimizer::new(OptimizerKind::Adam, alpha)
    }

    pub fn kind(&self) -> OptimizerKind {
        self.kind
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// Descend: `w ← w − α·update(grad)`.
    pub fn step(&mut self, weights: &mut [Matrix], grads: &[Matrix]) -> Result<()> {
        if weights.len() != grads.len() {
            return Err(Error::Precondition(format!(
                "{} weight matrices but {} gradients",
                weights.len(),
                grads.len()
            )));
        }
        for (w, g) in weights.iter().zip(grads) {
            if w.shape() != g.shape() {
                return Err(Error::shape("optimizer_step", w.shape(), g.shape()));
            }
        }
        self.t += 1;
        match self.kind {
            OptimizerKind::Sgd => {
                for (w, g) in weights.iter_mut().zip(grads) {
                    w.axpy(-self.alpha, g);
                }
            }
            OptimizerKind::Adam => {
                if self.m.is_empty() {
                    self.m = grads.iter().map(|g| Matrix::zeros(g.rows(), g.cols())).collect();
                    self.v = self.m.clone();
                }
                let c1 = 1.0 - self.beta1.powi(self.t as i32);
                let c2 = 1.0 - self.beta2.powi(self.t as i32);
                for ((w, g), (m, v)) in weights.iter_mut().zip(grads).zip(self.m.iter_mut().zip(&mut self.v)) {
                    let it = w
                        .as_mut_slice()
                        .iter_mut()
                        .zip(g.as_slice())
                        .zip(m.as_mut_slice().iter_mut().zip(v.as_mut_slice()));
                    for ((wi, &gi), (mi, vi)) in it {
                        *mi = self.beta1 * *mi + (1.0 - self.beta1) * gi;
                        *vi = self.beta2 * *vi + (1.0 - self.beta2) * gi * gi;
                        let m_hat = *mi / c1;
                        let v_hat = *vi / c2;
                        *wi -= self.alpha * m_hat / (v_hat.sqrt() + self.eps);
                    }
                }
            }
        }
        Ok(())
    }
}
