//! Trust-PCL: off-policy trust-region policy optimization.
//!
//! A policy `π_θ` and value estimate `V_φ` are trained jointly to satisfy
//! multi-step softmax path consistencies under a hybrid entropy plus
//! relative-entropy regularizer. The relative-entropy coefficient `λ` is
//! calibrated automatically from a trust-region size `ε` using recently
//! completed episodes.
//!
//! Module map:
//!
//! - [`nn`]: dense networks with exact reverse-mode gradients, Adam, Huber.
//! - [`models`]: Gaussian and categorical policies, the value network.
//! - [`envs`]: point-mass, pendulum swing-up, and tabular chain environments.
//! - [`replay`]: recency-prioritized segment replay and the episode log.
//! - [`consistency`]: the consistency error and the batch loss.
//! - [`trust`]: lagged prior parameters and the `λ(ε)` line search.
//! - [`oracle`]: exact softmax value iteration on small tabular MDPs.
//! - [`trainer`]: the collect/train loop, evaluation, and metrics.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod consistency;
pub mod envs;
mod error;
pub mod models;
pub mod nn;
pub mod oracle;
pub mod replay;
pub mod trainer;
pub mod trust;

pub use error::{Error, Result};

/// Seeded generator used everywhere randomness is needed.
///
/// ChaCha8 output is stable across platforms and crate versions, which the
/// determinism guarantees depend on.
pub type Rng = rand_chacha::ChaCha8Rng;

/// Builds a generator from a 64-bit seed.
pub fn seeded_rng(seed: u64) -> Rng {
    use rand::SeedableRng;
    Rng::seed_from_u64(seed)
}
