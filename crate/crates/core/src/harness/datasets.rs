//! Seeded toy datasets.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::numerics::{Activation, Rng, Vector};
use crate::probmodel::RaoBallardModel;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ToyKind {
    Xor,
    TwoGaussians,
    RingVsBlob,
    LinearLatent,
}

impl std::str::FromStr for ToyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.replace('-', "_")))
            .map_err(|_| Error::config("kind", format!("unknown dataset kind {s:?}")))
    }
}

/// Observed and latent widths of the `linear_latent` generator.
pub const LATENT_DIMS: (usize, usize) = (4, 2);

/// The generating model behind `linear_latent` for a given seed.
pub fn linear_latent_model(seed: u64) -> RaoBallardModel {
    let (n_x, n_z) = LATENT_DIMS;
    let mut rng = Rng::new(seed);
    let mut m = RaoBallardModel::random(n_x, n_z, n_z, Activation::Linear, &mut rng, 1.0);
    m.sigma_x2 = 0.25;
    m
}

/// Build a toy dataset. `Xor` ignores `n` and `seed`.
pub fn gen_toy_dataset(kind: ToyKind, n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::config("n", "must be at least 1"));
    }
    let mut rng = Rng::new(seed);
    let label = |c: usize| Vector::from(vec![c as f64]);
    match kind {
        ToyKind::Xor => Ok(Dataset::xor()),
        ToyKind::TwoGaussians => {
            let (mut xs, mut ys) = (Vec::with_capacity(n), Vec::with_capacity(n));
            for i in 0..n {
                let c = i % 2;
                let m = if c == 0 { -1.0 } else { 1.0 };
                xs.push(Vector::from(vec![m + 0.5 * rng.normal(), m + 0.5 * rng.normal()]));
                ys.push(label(c));
            }
            Dataset::new("two_gaussians", xs, Some(ys))
        }
        ToyKind::RingVsBlob => {
            let (mut xs, mut ys) = (Vec::with_capacity(n), Vec::with_capacity(n));
            for i in 0..n {
                let c = i % 2;
                let x = if c == 0 {
                    vec![0.3 * rng.normal(), 0.3 * rng.normal()]
                } else {
                    let th = rng.uniform(0.0, TAU);
                    let r = 2.0 + 0.1 * rng.normal();
                    vec![r * th.cos(), r * th.sin()]
                };
                xs.push(Vector::from(x));
                ys.push(label(c));
            }
            Dataset::new("ring_vs_blob", xs, Some(ys))
        }
        ToyKind::LinearLatent => {
            let model = linear_latent_model(seed);
            model.sample(n, &mut rng.fork())
        }
    }
}
