use nalgebra::{DMatrix, DVector};

use super::{TabularMdp, TabularPolicy};
use crate::{Error, Result};

/// Per-state values of the regularized objectives under a fixed policy.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveValues {
    /// Expected discounted reward `O_ER`.
    pub expected_reward: Vec<f64>,
    /// Discounted entropy `ℍ`.
    pub entropy: Vec<f64>,
    /// Discounted relative entropy `𝔾` against the reference policy.
    pub relative_entropy: Vec<f64>,
    /// `O_ENT = O_ER + τ ℍ`.
    pub entropy_objective: Vec<f64>,
    /// `O_RELENT = O_ENT − λ 𝔾`.
    pub relative_entropy_objective: Vec<f64>,
}

/// `p log p` with the `0 log 0 = 0` convention.
fn xlogx(p: f64) -> f64 {
    if p == 0.0 {
        0.0
    } else {
        p * p.ln()
    }
}

/// Solves `x(s) = Σ_a π(a|s) [c(s, a) + γ E x(s')]` exactly: a linear solve
/// for discounted problems, `H` backward passes for finite horizons.
fn policy_evaluation(mdp: &TabularMdp, policy: &TabularPolicy, cost: &[f64]) -> Result<Vec<f64>> {
    let n = mdp.num_states;
    if let Some(h) = mdp.horizon {
        let mut x = vec![0.0; n];
        for _ in 0..h {
            x = (0..n)
                .map(|s| {
                    cost[s]
                        + mdp.gamma
                            * (0..mdp.num_actions)
                                .map(|a| policy.prob(s, a) * mdp.expected(s, a, &x))
                                .sum::<f64>()
                })
                .collect();
        }
        return Ok(x);
    }
    let mut system = DMatrix::<f64>::identity(n, n);
    for s in 0..n {
        for a in 0..mdp.num_actions {
            let pa = policy.prob(s, a);
            for (t, p) in mdp.successors(s, a) {
                system[(s, t)] -= mdp.gamma * pa * p;
            }
        }
    }
    system
        .lu()
        .solve(&DVector::from_column_slice(cost))
        .map(|x| x.iter().copied().collect())
        .ok_or_else(|| Error::Numeric("policy evaluation system is singular".into()))
}

/// Exact `O_ER`, `ℍ`, `𝔾`, `O_ENT` and `O_RELENT` at every state.
pub fn evaluate_objectives(
    mdp: &TabularMdp,
    policy: &TabularPolicy,
    prior: &TabularPolicy,
    tau: f64,
    lambda: f64,
) -> Result<ObjectiveValues> {
    mdp.validate()?;
    policy.check_shape(mdp)?;
    prior.check_shape(mdp)?;
    let n = mdp.num_states;
    let mut reward = vec![0.0; n];
    let mut neg_entropy = vec![0.0; n];
    let mut log_ratio = vec![0.0; n];
    for s in 0..n {
        for a in 0..mdp.num_actions {
            let p = policy.prob(s, a);
            if p == 0.0 {
                continue;
            }
            let q = prior.prob(s, a);
            if q == 0.0 {
                return Err(Error::Domain(format!("reference policy is zero where the policy is not (state {s})")));
            }
            reward[s] += p * mdp.rewards[s][a];
            neg_entropy[s] += xlogx(p);
            log_ratio[s] += p * (p.ln() - q.ln());
        }
    }
    let expected_reward = policy_evaluation(mdp, policy, &reward)?;
    let entropy: Vec<f64> = policy_evaluation(mdp, policy, &neg_entropy)?.into_iter().map(|x| -x).collect();
    let relative_entropy = policy_evaluation(mdp, policy, &log_ratio)?;
    let entropy_objective: Vec<f64> = expected_reward.iter().zip(&entropy).map(|(o, h)| o + tau * h).collect();
    let relative_entropy_objective = entropy_objective
        .iter()
        .zip(&relative_entropy)
        .map(|(o, g)| o - lambda * g)
        .collect();
    Ok(ObjectiveValues {
        expected_reward,
        entropy,
        relative_entropy,
        entropy_objective,
        relative_entropy_objective,
    })
}
