//! Dense linear algebra, activations, RNG and the oracles used throughout
//! the crate's tests.
//!
//! Every matrix product goes through one of the counted kernels in
//! [`matrix`]: each call records exactly one "matmul event" with the global
//! and thread-local counters in [`counter`]. Complexity checks rely on this.

pub mod activation;
pub mod counter;
pub mod finite_diff;
pub mod linalg;
pub mod matrix;
pub mod rng;

pub use activation::{activation_derivative, apply_activation, Activation};
pub use counter::{Executor, OpCount};
pub use finite_diff::{finite_diff_gradient, GradCheck};
pub use matrix::{affine, affine_t, matmul, matvec, matvec_t, outer, outer_aug, Matrix, Vector};
pub use rng::Rng;
