//! A desk-scale laboratory for studying how gradient descent picks up
//! spurious features early in training, and for mitigating them.
//!
//! The crate is organized around one experiment pipeline:
//!
//! * [`datagen`] — synthetic feature-model datasets and Colored-MNIST
//!   construction (with an IDX reader/writer),
//! * [`model`] — a two-layer fully connected network trained with plain
//!   (stochastic) gradient descent,
//! * [`linear_proxy`] — the early-time linear model on transformed inputs
//!   that mimics the network,
//! * [`theory`] — numerical checks of the early-training predictions
//!   (feature-probe slopes, group separability, spurious domination),
//! * [`inference`] — per-class clustering of early model outputs to find
//!   majority/minority groups,
//! * [`sampling`] — importance-sampling plans and baseline robust-training
//!   strategies (class/group balancing, upsampling, group-weighted descent),
//! * [`metrics`] — worst-group error and the rest of the evaluation surface.
//!
//! Everything is deterministic for a fixed seed: random streams are keyed by
//! `(seed, purpose, index)` so results do not depend on thread count.

pub mod activation;
pub mod datagen;
pub mod error;
pub mod inference;
pub mod linalg;
pub mod linear_proxy;
pub mod metrics;
pub mod model;
pub mod parallel;
pub mod quadrature;
pub mod rng;
pub mod sampling;
pub mod theory;

pub use error::{Error, Result};
