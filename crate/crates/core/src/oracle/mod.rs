//! Exact ground truth on small discrete MDPs.
//!
//! Softmax value iteration under the transformed reward
//! `r̃(s, a) = r(s, a) + λ log π̃(a|s)` at temperature `τ + λ`, verification of
//! the multi-step consistency identity, exact trajectory KL by enumeration,
//! and exact evaluation of the regularized objectives.

mod adapters;
mod corpus;
mod kl;
mod mdp;
mod objectives;
mod solver;
mod verify;

pub use adapters::{one_hot_state, TabularPolicyModel, TabularValueModel};
pub use corpus::{corpus_instance, generate_mdp, generate_prior, CorpusInstance, CORPUS_SEEDS, CORPUS_SETTINGS};
pub use kl::{exact_trajectory_kl, MAX_ENUMERATED_PATHS};
pub use mdp::{TabularMdp, TabularPolicy};
pub use objectives::{evaluate_objectives, ObjectiveValues};
pub use solver::{hard_value_iteration, softmax_value_iteration, SoftmaxSolution, DEFAULT_MAX_SWEEPS, DEFAULT_TOL};
pub use verify::verify_consistency;
