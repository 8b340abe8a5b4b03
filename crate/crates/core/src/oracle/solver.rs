use super::{TabularMdp, TabularPolicy};
use crate::models::{log_sum_exp, softmax};
use crate::{Error, Result};

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_SWEEPS: usize = 100_000;

/// Softmax-optimal values and policy.
///
/// Infinite-horizon problems have a single stationary stage. An `H`-step
/// finite-horizon problem has stage values `V_0 .. V_H` (with `V_H = 0`) and
/// stage policies `π_0 .. π_{H-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftmaxSolution {
    pub stage_values: Vec<Vec<f64>>,
    pub stage_policies: Vec<TabularPolicy>,
    /// `max_s |B V(s) − V(s)|` for the returned values (largest stage residual
    /// for finite horizons, which is 0 up to roundoff).
    pub residual: f64,
    /// Sweeps performed.
    pub iterations: usize,
    pub temperature: f64,
}

impl SoftmaxSolution {
    pub fn is_stationary(&self) -> bool {
        self.stage_policies.len() == 1 && self.stage_values.len() == 1
    }

    /// `V*` (stage 0 for finite horizons).
    pub fn values(&self) -> &[f64] {
        &self.stage_values[0]
    }

    /// `π*` (stage 0 for finite horizons).
    pub fn policy(&self) -> &TabularPolicy {
        &self.stage_policies[0]
    }

    /// Values at stage `t`; stationary solutions ignore `t`.
    pub fn value_at(&self, t: usize) -> &[f64] {
        if self.is_stationary() {
            &self.stage_values[0]
        } else {
            &self.stage_values[t]
        }
    }

    /// Policy at stage `t`; stationary solutions ignore `t`.
    pub fn policy_at(&self, t: usize) -> &TabularPolicy {
        if self.is_stationary() {
            &self.stage_policies[0]
        } else {
            &self.stage_policies[t]
        }
    }
}

/// `r̃(s, a) = r(s, a) + λ log π̃(a|s)`, with the `λ = 0` case exact even for
/// zero prior entries.
pub(crate) fn transformed_rewards(mdp: &TabularMdp, prior: &TabularPolicy, lambda: f64) -> Result<Vec<Vec<f64>>> {
    prior.check_shape(mdp)?;
    if lambda > 0.0 && !prior.is_strictly_positive() {
        return Err(Error::Domain("reference policy must be strictly positive when lambda > 0".into()));
    }
    Ok((0..mdp.num_states)
        .map(|s| {
            (0..mdp.num_actions)
                .map(|a| {
                    let bonus = if lambda == 0.0 { 0.0 } else { lambda * prior.log_prob(s, a) };
                    mdp.rewards[s][a] + bonus
                })
                .collect()
        })
        .collect())
}

fn q_values(mdp: &TabularMdp, r_tilde: &[Vec<f64>], next: &[f64], s: usize) -> Vec<f64> {
    (0..mdp.num_actions)
        .map(|a| r_tilde[s][a] + mdp.gamma * mdp.expected(s, a, next))
        .collect()
}

/// `(B V)(s) = T log Σ_a exp(Q(s, a) / T)` and `softmax(Q(s, ·) / T)`.
fn soft_backup(mdp: &TabularMdp, r_tilde: &[Vec<f64>], next: &[f64], temperature: f64) -> (Vec<f64>, TabularPolicy) {
    let mut values = Vec::with_capacity(mdp.num_states);
    let mut probs = Vec::with_capacity(mdp.num_states);
    for s in 0..mdp.num_states {
        let scaled: Vec<f64> = q_values(mdp, r_tilde, next, s).iter().map(|q| q / temperature).collect();
        values.push(temperature * log_sum_exp(&scaled));
        probs.push(softmax(&scaled));
    }
    (values, TabularPolicy { probs })
}

fn sup_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Softmax value iteration at temperature `τ + λ` under the transformed
/// reward. Iterates to a sup-norm change of at most `tol` (or the roundoff
/// floor, if larger) for discounted problems; runs exact backward induction
/// for finite horizons.
pub fn softmax_value_iteration(
    mdp: &TabularMdp,
    prior: &TabularPolicy,
    tau: f64,
    lambda: f64,
    tol: f64,
) -> Result<SoftmaxSolution> {
    mdp.validate()?;
    if !(tau >= 0.0 && lambda >= 0.0) {
        return Err(Error::Config(format!("tau and lambda must be >= 0, got {tau}, {lambda}")));
    }
    let temperature = tau + lambda;
    if !(temperature > 0.0) {
        return Err(Error::Config("tau + lambda must be > 0; use hard_value_iteration".into()));
    }
    let r_tilde = transformed_rewards(mdp, prior, lambda)?;

    if let Some(h) = mdp.horizon {
        let mut stage_values = vec![vec![0.0; mdp.num_states]; h + 1];
        let mut stage_policies = Vec::with_capacity(h);
        for t in (0..h).rev() {
            let (v, pi) = soft_backup(mdp, &r_tilde, &stage_values[t + 1], temperature);
            stage_values[t] = v;
            stage_policies.push(pi);
        }
        stage_policies.reverse();
        return Ok(SoftmaxSolution {
            stage_values,
            stage_policies,
            residual: 0.0,
            iterations: h,
            temperature,
        });
    }

    let mut v = vec![0.0; mdp.num_states];
    for sweep in 1..=DEFAULT_MAX_SWEEPS {
        let (next, _) = soft_backup(mdp, &r_tilde, &v, temperature);
        let change = sup_distance(&next, &v);
        v = next;
        if !change.is_finite() {
            return Err(Error::Numeric("softmax value iteration diverged".into()));
        }
        // Each backup rounds at the scale of the values and of the
        // temperature (log-sum-exp is scaled by it); when that floor exceeds
        // `tol` it counts as converged.
        let scale = v.iter().fold(temperature, |m: f64, x| m.max(x.abs()));
        let floor = 8.0 * f64::EPSILON * scale;
        if change <= tol.max(floor) {
            let (backed_up, policy) = soft_backup(mdp, &r_tilde, &v, temperature);
            return Ok(SoftmaxSolution {
                residual: sup_distance(&backed_up, &v),
                stage_values: vec![v],
                stage_policies: vec![policy],
                iterations: sweep,
                temperature,
            });
        }
    }
    Err(Error::Numeric(format!(
        "softmax value iteration did not reach tol {tol} in {DEFAULT_MAX_SWEEPS} sweeps"
    )))
}

/// Standard (hard-max) value iteration on the untransformed reward; stage-0
/// values for finite horizons.
pub fn hard_value_iteration(mdp: &TabularMdp, tol: f64) -> Result<Vec<f64>> {
    mdp.validate()?;
    let backup = |next: &[f64]| -> Vec<f64> {
        (0..mdp.num_states)
            .map(|s| {
                q_values(mdp, &mdp.rewards, next, s)
                    .into_iter()
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect()
    };
    let mut v = vec![0.0; mdp.num_states];
    if let Some(h) = mdp.horizon {
        for _ in 0..h {
            v = backup(&v);
        }
        return Ok(v);
    }
    for _ in 0..DEFAULT_MAX_SWEEPS {
        let next = backup(&v);
        let change = sup_distance(&next, &v);
        v = next;
        if change <= tol {
            return Ok(v);
        }
    }
    Err(Error::Numeric("hard value iteration did not converge".into()))
}
