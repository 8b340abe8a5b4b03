//! Trust-region mechanics: lagged prior parameters and the `λ(ε)` line search.
//!
//! Under deterministic dynamics, a single start state, `γ = 1` and `τ = 0`,
//! the optimal regularized trajectory distribution is
//! `π*(s_{0:T}) ∝ π̃(s_{0:T}) exp(R(s_{0:T}) / λ)`, so its KL divergence from
//! `π̃` can be estimated from returns of episodes sampled under `π̃`. The
//! estimate is decreasing in `λ`, which makes bisection on `log λ` exact.

use crate::models::{Parametric, Policy, ValueNet};
use crate::replay::EpisodeLog;
use crate::{Error, Result};

/// `prior ← α·prior + (1 − α)·current`, evaluated as
/// `current + α·(prior − current)` so the contraction is exact; `α = 1`
/// leaves `prior` untouched bit for bit.
pub fn update_lag(prior: &mut [f64], current: &[f64], alpha: f64) -> Result<()> {
    crate::error::check_len("lag update", prior.len(), current.len())?;
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Config(format!("alpha must lie in [0, 1], got {alpha}")));
    }
    if alpha == 1.0 {
        return Ok(());
    }
    for (p, &c) in prior.iter_mut().zip(current) {
        *p = c + alpha * (*p - c);
    }
    Ok(())
}

/// Lagged copies `θ̃`, `φ̃` of the policy and value parameters.
#[derive(Debug, Clone)]
pub struct LagState {
    pub policy: Policy,
    pub value: ValueNet,
    pub alpha: f64,
}

impl LagState {
    /// Starts both lagged copies at the given parameters.
    pub fn new(policy: &Policy, value: &ValueNet, alpha: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::Config(format!("alpha must lie in [0, 1], got {alpha}")));
        }
        Ok(Self {
            policy: policy.clone(),
            value: value.clone(),
            alpha,
        })
    }

    pub fn update(&mut self, policy: &Policy, value: &ValueNet) -> Result<()> {
        update_lag(self.policy.params_mut(), policy.params(), self.alpha)?;
        update_lag(self.value.params_mut(), value.params(), self.alpha)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KlEstimate {
    pub kl: f64,
    pub log_z: f64,
    pub count: usize,
}

/// Sample estimate of `KL(π* ‖ π̃)` from returns of episodes drawn under `π̃`.
///
/// With `w_k = R_k / λ` and `log Z = log mean_k exp(w_k)`, the estimate is
/// `mean_k[(w_k − log Z) exp(w_k − log Z)]`, algebraically equal to
/// `−log Z + mean_k[w_k exp(w_k − log Z)]` but free of cancellation.
pub fn estimate_kl(returns: &[f64], lambda: f64) -> Result<KlEstimate> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::Config(format!("lambda must be finite and > 0, got {lambda}")));
    }
    if returns.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "KL estimate needs at least 2 returns, got {}",
            returns.len()
        )));
    }
    if returns.iter().any(|r| !r.is_finite()) {
        return Err(Error::Numeric("non-finite return in KL estimate".into()));
    }
    let n = returns.len() as f64;
    let r_max = returns.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    // Offsets from the maximum, (R_k - R_max) / λ, keep every exponent <= 0
    // and avoid cancelling two large numbers when λ is small.
    let shifted: Vec<f64> = returns.iter().map(|r| (r - r_max) / lambda).collect();
    let log_mean = (shifted.iter().map(|x| x.exp()).sum::<f64>() / n).ln();
    let log_z = r_max / lambda + log_mean;
    let kl = shifted
        .iter()
        .map(|x| {
            let u = x - log_mean;
            u * u.exp()
        })
        .sum::<f64>()
        / n;
    Ok(KlEstimate {
        kl,
        log_z,
        count: returns.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LambdaStatus {
    /// The estimate hit the target within tolerance.
    Solved,
    /// Even `λ_min` gives a KL below the target.
    AtMin,
    /// Even `λ_max` gives a KL above the target.
    AtMax,
    /// Bisection finished without meeting the tolerance.
    Unconverged,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaSolution {
    pub lambda: f64,
    pub kl: f64,
    pub target: f64,
    pub status: LambdaStatus,
}

/// Bisection on `log λ` for `estimate_kl(returns, λ) = ε · mean episode length`.
#[derive(Debug, Clone, PartialEq)]
pub struct LambdaSolver {
    pub min: f64,
    pub max: f64,
    pub rel_tol: f64,
    pub max_iter: usize,
    current: f64,
}

impl Default for LambdaSolver {
    fn default() -> Self {
        Self {
            min: 1e-4,
            max: 1e4,
            rel_tol: 1e-3,
            max_iter: 100,
            current: 1.0,
        }
    }
}

/// Bracket width in `ln λ` below which bisection stops.
const LOG_BRACKET_TOL: f64 = 1e-12;

impl LambdaSolver {
    pub fn with_initial(initial: f64) -> Result<Self> {
        let solver = Self::default();
        if !(solver.min..=solver.max).contains(&initial) {
            return Err(Error::Config(format!(
                "initial lambda {initial} outside [{}, {}]",
                solver.min, solver.max
            )));
        }
        Ok(Self {
            current: initial,
            ..solver
        })
    }

    pub fn current(&self) -> f64 {
        self.current
    }

    /// Solves for `λ` given returns and the KL target; does not touch the
    /// stored value.
    ///
    /// The bisection always runs to a fixed bracket width rather than
    /// stopping at the first point within tolerance: bracket endpoints then
    /// move monotonically with the target, so `λ(ε)` is exactly monotone.
    pub fn solve_for_target(&self, returns: &[f64], target: f64) -> Result<LambdaSolution> {
        if !(target > 0.0 && target.is_finite()) {
            return Err(Error::Config(format!("KL target must be finite and > 0, got {target}")));
        }
        let at = |lambda: f64, status| -> Result<LambdaSolution> {
            Ok(LambdaSolution {
                lambda,
                kl: estimate_kl(returns, lambda)?.kl,
                target,
                status,
            })
        };
        if estimate_kl(returns, self.min)?.kl <= target {
            return at(self.min, LambdaStatus::AtMin);
        }
        if estimate_kl(returns, self.max)?.kl >= target {
            return at(self.max, LambdaStatus::AtMax);
        }
        let (mut lo, mut hi) = (self.min.ln(), self.max.ln());
        for _ in 0..self.max_iter {
            if hi - lo <= LOG_BRACKET_TOL {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if estimate_kl(returns, mid.exp())?.kl > target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let lambda = (0.5 * (lo + hi)).exp();
        let kl = estimate_kl(returns, lambda)?.kl;
        let status = if (kl - target).abs() <= self.rel_tol * target {
            LambdaStatus::Solved
        } else {
            LambdaStatus::Unconverged
        };
        Ok(LambdaSolution {
            lambda,
            kl,
            target,
            status,
        })
    }

    /// Solves against the episode log with target `ε · mean length` and
    /// stores the result. With fewer than two logged episodes the previous
    /// `λ` is kept and an insufficient-data error is returned.
    pub fn solve(&mut self, log: &EpisodeLog, epsilon: f64) -> Result<LambdaSolution> {
        if !(epsilon > 0.0) {
            return Err(Error::Config(format!("epsilon must be > 0, got {epsilon}")));
        }
        if log.len() < 2 {
            return Err(Error::InsufficientData(format!(
                "lambda search needs at least 2 episodes, have {}",
                log.len()
            )));
        }
        let target = epsilon * log.mean_length()?;
        let solution = self.solve_for_target(&log.returns(), target)?;
        self.current = solution.lambda;
        Ok(solution)
    }
}

/// Free-function form of [`LambdaSolver::solve`].
pub fn solve_lambda(log: &EpisodeLog, epsilon: f64, solver: &mut LambdaSolver) -> Result<LambdaSolution> {
    solver.solve(log, epsilon)
}
