//! Tabular policies and values behind the same model traits as the networks,
//! so oracle solutions can be substituted into the consistency error.
//! Observations are one-hot state encodings.

use super::{SoftmaxSolution, TabularPolicy};
use crate::models::{Action, Parametric, PolicyModel, ValueModel};
use crate::{Error, Result};

/// Index of the hot entry of a one-hot observation.
pub fn one_hot_state(obs: &[f64]) -> Result<usize> {
    let mut hot = None;
    for (i, &x) in obs.iter().enumerate() {
        if x == 1.0 && hot.is_none() {
            hot = Some(i);
        } else if x != 0.0 {
            return Err(Error::Domain("observation is not a one-hot state".into()));
        }
    }
    hot.ok_or_else(|| Error::Domain("observation is not a one-hot state".into()))
}

/// Policy parameterized directly by its log-probability table
/// (`params[s * A + a] = log π(a|s)`).
#[derive(Debug, Clone, PartialEq)]
pub struct TabularPolicyModel {
    num_states: usize,
    num_actions: usize,
    log_probs: Vec<f64>,
}

impl TabularPolicyModel {
    pub fn new(policy: &TabularPolicy) -> Self {
        Self {
            num_states: policy.num_states(),
            num_actions: policy.num_actions(),
            log_probs: policy.probs.iter().flatten().map(|p| p.ln()).collect(),
        }
    }

    fn index(&self, obs: &[f64], action: &Action) -> Result<usize> {
        crate::error::check_len("tabular observation", self.num_states, obs.len())?;
        let s = one_hot_state(obs)?;
        match action {
            Action::Discrete(a) if *a < self.num_actions => Ok(s * self.num_actions + a),
            _ => Err(Error::Usage(format!("tabular policy given {action:?}"))),
        }
    }
}

impl Parametric for TabularPolicyModel {
    fn params(&self) -> &[f64] {
        &self.log_probs
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.log_probs
    }
}

impl PolicyModel for TabularPolicyModel {
    type Tape = usize;

    fn num_params(&self) -> usize {
        self.log_probs.len()
    }

    fn log_prob(&self, obs: &[f64], action: &Action) -> Result<f64> {
        Ok(self.log_probs[self.index(obs, action)?])
    }

    fn log_prob_taped(&self, obs: &[f64], action: &Action) -> Result<(f64, usize)> {
        let i = self.index(obs, action)?;
        Ok((self.log_probs[i], i))
    }

    fn accumulate_log_prob_grad(&self, tape: &usize, scale: f64, grad: &mut [f64]) -> Result<()> {
        crate::error::check_len("tabular policy gradient", self.log_probs.len(), grad.len())?;
        grad[*tape] += scale;
        Ok(())
    }
}

/// Value function given by a table.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularValueModel {
    values: Vec<f64>,
}

impl TabularValueModel {
    pub fn new(values: &[f64]) -> Self {
        Self { values: values.to_vec() }
    }

    /// Policy and value models holding a stationary solution's `(π*, V*)`.
    pub fn from_solution(solution: &SoftmaxSolution) -> (TabularPolicyModel, TabularValueModel) {
        (
            TabularPolicyModel::new(solution.policy()),
            TabularValueModel::new(solution.values()),
        )
    }

    fn state(&self, obs: &[f64]) -> Result<usize> {
        crate::error::check_len("tabular observation", self.values.len(), obs.len())?;
        one_hot_state(obs)
    }
}

impl Parametric for TabularValueModel {
    fn params(&self) -> &[f64] {
        &self.values
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
}

impl ValueModel for TabularValueModel {
    type Tape = usize;

    fn num_params(&self) -> usize {
        self.values.len()
    }

    fn value(&self, obs: &[f64]) -> Result<f64> {
        Ok(self.values[self.state(obs)?])
    }

    fn value_taped(&self, obs: &[f64]) -> Result<(f64, usize)> {
        let s = self.state(obs)?;
        Ok((self.values[s], s))
    }

    fn accumulate_value_grad(&self, tape: &usize, scale: f64, grad: &mut [f64]) -> Result<()> {
        crate::error::check_len("tabular value gradient", self.values.len(), grad.len())?;
        grad[*tape] += scale;
        Ok(())
    }
}
