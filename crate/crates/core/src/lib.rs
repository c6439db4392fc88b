//! Predictive coding networks and inference learning.
//!
//! The crate is organised bottom-up:
//!
//! - [`numerics`]: dense matrices, activations, seeded RNG, operation counting
//!   and finite-difference oracles.
//! - [`fnn`]: feedforward reference network trained with backpropagation.
//! - [`pcn`]: hierarchical predictive coding networks (discriminative and
//!   generative), inference learning, incremental IL and Z-IL.
//! - [`pcgraph`]: predictive coding on arbitrary topologies given by an
//!   adjacency mask.
//! - [`probmodel`]: the latent-variable view (two-layer Gaussian model, EM,
//!   Gaussian variational free energy).
//! - [`harness`]: configuration, datasets, metrics, complexity benchmarks and
//!   the `pcnet` command line.
//!
//! Runnable walkthroughs for each capability live in `examples/`.

pub mod data;
pub mod error;
pub mod fnn;
pub mod harness;
pub mod numerics;
pub mod pcgraph;
pub mod pcn;
pub mod probmodel;

pub use data::{Dataset, Sample};
pub use error::{Error, Result};
pub use fnn::{Direction, Optimizer, OptimizerKind, Params, Topology};
pub use numerics::{Activation, Matrix, Rng, Vector};
pub use pcn::{EnergyReport, InferenceConfig, InferenceSchedule, NetState, Pcn, PrecisionSet};
