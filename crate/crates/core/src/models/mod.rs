//! Policy and value heads built on [`crate::nn`].
//!
//! - [`GaussianPolicy`]: diagonal Gaussian with an MLP mean and a
//!   state-independent log-std vector.
//! - [`CategoricalPolicy`]: softmax over MLP logits.
//! - [`ValueNet`]: scalar MLP over the augmented observation `[s, s⊙s]`.
//!
//! Gradients are produced in two phases so callers can decide the scale of a
//! backward pass after seeing the forward value: a `*_taped` call returns the
//! value plus a tape, and `accumulate_*_grad` adds `scale * ∇` into a buffer.

mod categorical;
mod checkpoint;
mod gaussian;
mod value;

pub use categorical::{CategoricalPolicy, CategoricalTape};
pub(crate) use categorical::{log_sum_exp, softmax};
pub use checkpoint::Checkpoint;
pub use gaussian::{GaussianPolicy, GaussianTape};
pub use value::{ValueNet, ValueTape};

use serde::{Deserialize, Serialize};

use crate::nn::ParamVector;
use crate::{Result, Rng};

/// Hidden widths used by every shipped model.
pub const DEFAULT_HIDDEN: [usize; 2] = [64, 64];

/// Scale applied to the output layer at initialization, so initial means and
/// values start near zero.
pub const OUTPUT_INIT_SCALE: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Action {
    Continuous(Vec<f64>),
    Discrete(usize),
}

impl Action {
    pub fn as_continuous(&self) -> Option<&[f64]> {
        match self {
            Action::Continuous(a) => Some(a),
            Action::Discrete(_) => None,
        }
    }

    pub fn as_discrete(&self) -> Option<usize> {
        match self {
            Action::Discrete(i) => Some(*i),
            Action::Continuous(_) => None,
        }
    }
}

/// Models exposing a flat parameter buffer.
pub trait Parametric {
    fn params(&self) -> &[f64];
    fn params_mut(&mut self) -> &mut [f64];

    fn num_params(&self) -> usize {
        self.params().len()
    }

    fn to_param_vector(&self) -> ParamVector {
        ParamVector(self.params().to_vec())
    }

    fn set_params(&mut self, params: &[f64]) -> Result<()> {
        crate::error::check_len("parameter copy", self.num_params(), params.len())?;
        self.params_mut().copy_from_slice(params);
        Ok(())
    }
}

/// Anything with a log-density `log π(a|s)` and its parameter gradient.
pub trait PolicyModel {
    type Tape;

    fn num_params(&self) -> usize;

    fn log_prob(&self, obs: &[f64], action: &Action) -> Result<f64>;

    fn log_prob_taped(&self, obs: &[f64], action: &Action) -> Result<(f64, Self::Tape)>;

    /// `grad += scale * ∇θ log π(a|s)` for the pair recorded on `tape`.
    fn accumulate_log_prob_grad(&self, tape: &Self::Tape, scale: f64, grad: &mut [f64])
        -> Result<()>;

    fn log_prob_with_grad(&self, obs: &[f64], action: &Action) -> Result<(f64, ParamVector)> {
        let (lp, tape) = self.log_prob_taped(obs, action)?;
        let mut grad = ParamVector::zeros(self.num_params());
        self.accumulate_log_prob_grad(&tape, 1.0, &mut grad)?;
        Ok((lp, grad))
    }
}

/// Anything with a scalar state value `V(s)` and its parameter gradient.
pub trait ValueModel {
    type Tape;

    fn num_params(&self) -> usize;

    fn value(&self, obs: &[f64]) -> Result<f64>;

    fn value_taped(&self, obs: &[f64]) -> Result<(f64, Self::Tape)>;

    /// `grad += scale * ∇φ V(s)` for the state recorded on `tape`.
    fn accumulate_value_grad(&self, tape: &Self::Tape, scale: f64, grad: &mut [f64])
        -> Result<()>;

    fn value_with_grad(&self, obs: &[f64]) -> Result<(f64, ParamVector)> {
        let (v, tape) = self.value_taped(obs)?;
        let mut grad = ParamVector::zeros(self.num_params());
        self.accumulate_value_grad(&tape, 1.0, &mut grad)?;
        Ok((v, grad))
    }
}

/// Either policy head, chosen by the environment's action kind.
#[derive(Debug, Clone, PartialEq)]
pub enum Policy {
    Gaussian(GaussianPolicy),
    Categorical(CategoricalPolicy),
}

#[derive(Debug, Clone)]
pub enum PolicyTape {
    Gaussian(GaussianTape),
    Categorical(CategoricalTape),
}

impl Policy {
    pub fn sample(&self, obs: &[f64], rng: &mut Rng) -> Result<Action> {
        match self {
            Policy::Gaussian(p) => p.sample(obs, rng),
            Policy::Categorical(p) => p.sample(obs, rng),
        }
    }

    /// The distribution's mode: the Gaussian mean or the arg-max logit.
    pub fn greedy(&self, obs: &[f64]) -> Result<Action> {
        match self {
            Policy::Gaussian(p) => p.greedy(obs),
            Policy::Categorical(p) => p.greedy(obs),
        }
    }

    pub fn obs_dim(&self) -> usize {
        match self {
            Policy::Gaussian(p) => p.obs_dim(),
            Policy::Categorical(p) => p.obs_dim(),
        }
    }
}

impl Parametric for Policy {
    fn params(&self) -> &[f64] {
        match self {
            Policy::Gaussian(p) => p.params(),
            Policy::Categorical(p) => p.params(),
        }
    }

    fn params_mut(&mut self) -> &mut [f64] {
        match self {
            Policy::Gaussian(p) => p.params_mut(),
            Policy::Categorical(p) => p.params_mut(),
        }
    }
}

impl PolicyModel for Policy {
    type Tape = PolicyTape;

    fn num_params(&self) -> usize {
        Parametric::num_params(self)
    }

    fn log_prob(&self, obs: &[f64], action: &Action) -> Result<f64> {
        match self {
            Policy::Gaussian(p) => p.log_prob(obs, action),
            Policy::Categorical(p) => p.log_prob(obs, action),
        }
    }

    fn log_prob_taped(&self, obs: &[f64], action: &Action) -> Result<(f64, PolicyTape)> {
        Ok(match self {
            Policy::Gaussian(p) => {
                let (lp, t) = p.log_prob_taped(obs, action)?;
                (lp, PolicyTape::Gaussian(t))
            }
            Policy::Categorical(p) => {
                let (lp, t) = p.log_prob_taped(obs, action)?;
                (lp, PolicyTape::Categorical(t))
            }
        })
    }

    fn accumulate_log_prob_grad(&self, tape: &PolicyTape, scale: f64, grad: &mut [f64]) -> Result<()> {
        match (self, tape) {
            (Policy::Gaussian(p), PolicyTape::Gaussian(t)) => p.accumulate_log_prob_grad(t, scale, grad),
            (Policy::Categorical(p), PolicyTape::Categorical(t)) => {
                p.accumulate_log_prob_grad(t, scale, grad)
            }
            _ => Err(crate::Error::Usage("policy tape from a different policy kind".into())),
        }
    }
}

pub(crate) fn action_shape_error(expected: &str) -> crate::Error {
    crate::Error::Usage(format!("expected a {expected} action"))
}
