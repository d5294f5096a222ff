//! Soft-threshold Dikin walk for sampling `π ∝ e^{-f}` on polytopes
//! `{θ : Aθ ≤ b}`.

pub mod barrier;
pub mod error;
pub mod harness;
pub mod logdet_estimator;
pub mod parallel;
pub mod polytope;
pub mod rng;
pub mod solver;
pub mod sparsela;
pub mod target;
pub mod walk;

pub use error::{Error, Result};
