use super::solver::transformed_rewards;
use super::{SoftmaxSolution, TabularMdp, TabularPolicy};
use crate::{Error, Result};

/// Largest violation of the `d`-step consistency identity
///
/// ```text
/// V(s_t) = E[ Σ_{i<d} γ^i (r̃(s_{t+i}, a_{t+i}) − (τ+λ) log π(a_{t+i}|s_{t+i})) + γ^d V(s_{t+d}) ]
/// ```
///
/// over every start state (and stage, for finite horizons) and every action
/// sequence of length `d`, truncated at the horizon. Expectations over
/// stochastic transitions are computed exactly by propagating the state
/// distribution.
pub fn verify_consistency(
    mdp: &TabularMdp,
    solution: &SoftmaxSolution,
    prior: &TabularPolicy,
    tau: f64,
    lambda: f64,
    d: usize,
) -> Result<f64> {
    if d == 0 {
        return Err(Error::Config("d must be >= 1".into()));
    }
    let r_tilde = transformed_rewards(mdp, prior, lambda)?;
    let ctx = Ctx {
        mdp,
        solution,
        r_tilde,
        temperature: tau + lambda,
    };
    let starts: Vec<(usize, usize)> = match mdp.horizon {
        Some(h) => (0..h).map(|t| (t, d.min(h - t))).collect(),
        None => vec![(0, d)],
    };
    let mut worst: f64 = 0.0;
    for (t, len) in starts {
        for s in 0..mdp.num_states {
            let mut dist = vec![0.0; mdp.num_states];
            dist[s] = 1.0;
            let target = solution.value_at(t)[s];
            ctx.search(t, 0, len, &dist, 0.0, &mut |expected| {
                worst = worst.max((expected - target).abs());
            });
        }
    }
    Ok(worst)
}

struct Ctx<'a> {
    mdp: &'a TabularMdp,
    solution: &'a SoftmaxSolution,
    r_tilde: Vec<Vec<f64>>,
    temperature: f64,
}

impl Ctx<'_> {
    /// Depth-first over action sequences. `acc` is the expected discounted
    /// sum so far; `emit` receives the full right-hand side at each leaf.
    fn search(&self, t0: usize, i: usize, len: usize, dist: &[f64], acc: f64, emit: &mut dyn FnMut(f64)) {
        let discount = self.mdp.gamma.powi(i as i32);
        if i == len {
            let end: f64 = dist
                .iter()
                .zip(self.solution.value_at(t0 + len))
                .map(|(p, v)| p * v)
                .sum();
            emit(acc + discount * end);
            return;
        }
        let policy = self.solution.policy_at(t0 + i);
        for a in 0..self.mdp.num_actions {
            let mut step = 0.0;
            let mut next = vec![0.0; self.mdp.num_states];
            for (s, &p) in dist.iter().enumerate() {
                if p == 0.0 {
                    continue;
                }
                step += p * (self.r_tilde[s][a] - self.temperature * policy.log_prob(s, a));
                for (n, q) in next.iter_mut().zip(&self.mdp.transitions[s][a]) {
                    *n += p * q;
                }
            }
            self.search(t0, i + 1, len, &next, acc + discount * step, emit);
        }
    }
}
