use crate::envs::ChainTable;
use crate::{Error, Result};

/// Small MDP with dense transition distributions `ρ[s][a][s']`.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularMdp {
    pub num_states: usize,
    pub num_actions: usize,
    pub transitions: Vec<Vec<Vec<f64>>>,
    pub rewards: Vec<Vec<f64>>,
    pub gamma: f64,
    /// `Some(H)` for an `H`-step finite-horizon problem.
    pub horizon: Option<usize>,
    pub initial_state: usize,
}

impl TabularMdp {
    pub fn new(
        transitions: Vec<Vec<Vec<f64>>>,
        rewards: Vec<Vec<f64>>,
        gamma: f64,
        horizon: Option<usize>,
        initial_state: usize,
    ) -> Result<Self> {
        let num_states = transitions.len();
        let num_actions = transitions.first().map_or(0, Vec::len);
        let mdp = Self {
            num_states,
            num_actions,
            transitions,
            rewards,
            gamma,
            horizon,
            initial_state,
        };
        mdp.validate()?;
        Ok(mdp)
    }

    /// Builds the MDP described by a chain table. With `finite_horizon` the
    /// table's horizon becomes the problem horizon; otherwise the problem is
    /// the discounted infinite-horizon one (the environment's horizon is only
    /// a time-limit cutoff).
    pub fn from_chain(table: &ChainTable, finite_horizon: bool) -> Result<Self> {
        table.validate()?;
        let transitions = table
            .transitions
            .iter()
            .map(|row| row.iter().map(|next| next.to_distribution(table.num_states)).collect())
            .collect();
        Self::new(
            transitions,
            table.rewards.clone(),
            table.gamma,
            finite_horizon.then_some(table.horizon),
            table.initial_state,
        )
    }

    pub fn validate(&self) -> Result<()> {
        let (n, k) = (self.num_states, self.num_actions);
        if n == 0 || k == 0 {
            return Err(Error::Config("MDP needs at least one state and one action".into()));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::Config(format!("gamma must lie in (0, 1], got {}", self.gamma)));
        }
        if self.horizon.is_none() && self.gamma >= 1.0 {
            return Err(Error::Config("infinite-horizon MDP needs gamma < 1".into()));
        }
        if self.horizon == Some(0) {
            return Err(Error::Config("horizon must be >= 1".into()));
        }
        if self.initial_state >= n {
            return Err(Error::Config(format!("initial state {} out of range", self.initial_state)));
        }
        if self.rewards.len() != n || self.transitions.len() != n {
            return Err(Error::Config("transition and reward tables need one row per state".into()));
        }
        for s in 0..n {
            if self.transitions[s].len() != k || self.rewards[s].len() != k {
                return Err(Error::Config(format!("state {s}: expected {k} actions")));
            }
            for a in 0..k {
                let row = &self.transitions[s][a];
                let total: f64 = row.iter().sum();
                if row.len() != n || row.iter().any(|p| !(*p >= 0.0)) || (total - 1.0).abs() > 1e-12 {
                    return Err(Error::Config(format!("ρ[{s}][{a}] is not a distribution")));
                }
                if !self.rewards[s][a].is_finite() {
                    return Err(Error::Config(format!("r[{s}][{a}] is not finite")));
                }
            }
        }
        Ok(())
    }

    pub fn is_deterministic(&self) -> bool {
        self.transitions
            .iter()
            .flatten()
            .all(|row| row.iter().filter(|p| **p > 0.0).count() == 1)
    }

    /// `E_{s' ~ ρ(s, a)}[v(s')]`.
    pub fn expected(&self, s: usize, a: usize, v: &[f64]) -> f64 {
        self.transitions[s][a].iter().zip(v).map(|(p, x)| p * x).sum()
    }

    /// Next states reachable from `(s, a)` with their probabilities.
    pub fn successors(&self, s: usize, a: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.transitions[s][a]
            .iter()
            .enumerate()
            .filter(|(_, p)| **p > 0.0)
            .map(|(t, p)| (t, *p))
    }
}

/// Probability table `π[s][a]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularPolicy {
    pub probs: Vec<Vec<f64>>,
}

impl TabularPolicy {
    pub fn new(probs: Vec<Vec<f64>>) -> Result<Self> {
        for (s, row) in probs.iter().enumerate() {
            let total: f64 = row.iter().sum();
            if row.is_empty() || row.iter().any(|p| !(*p >= 0.0)) || (total - 1.0).abs() > 1e-12 {
                return Err(Error::Domain(format!("policy row {s} is not a distribution")));
            }
        }
        Ok(Self { probs })
    }

    pub fn uniform(num_states: usize, num_actions: usize) -> Self {
        Self {
            probs: vec![vec![1.0 / num_actions as f64; num_actions]; num_states],
        }
    }

    pub fn num_states(&self) -> usize {
        self.probs.len()
    }

    pub fn num_actions(&self) -> usize {
        self.probs.first().map_or(0, Vec::len)
    }

    pub fn prob(&self, s: usize, a: usize) -> f64 {
        self.probs[s][a]
    }

    pub fn log_prob(&self, s: usize, a: usize) -> f64 {
        self.probs[s][a].ln()
    }

    pub fn is_strictly_positive(&self) -> bool {
        self.probs.iter().flatten().all(|p| *p > 0.0)
    }

    pub(crate) fn check_shape(&self, mdp: &TabularMdp) -> Result<()> {
        if self.num_states() != mdp.num_states || self.probs.iter().any(|r| r.len() != mdp.num_actions) {
            return Err(Error::Shape {
                context: "tabular policy",
                expected: mdp.num_states * mdp.num_actions,
                actual: self.probs.iter().map(Vec::len).sum(),
            });
        }
        Ok(())
    }

    /// Largest per-state total-variation distance to `other`.
    pub fn max_total_variation(&self, other: &TabularPolicy) -> f64 {
        self.probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| 0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}
