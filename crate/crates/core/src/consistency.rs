//! Multi-step path-consistency error and the Huber-damped batch loss.
//!
//! For a window `s_t .. s_{t+d'}` the consistency error is
//!
//! ```text
//! C = -V_φ(s_t) + γ^{d'} V_end
//!     + Σ_{i<d'} γ^i (r_{t+i} - (τ+λ) log π_θ(a_{t+i}|s_{t+i}) + λ log π̃(a_{t+i}|s_{t+i}))
//! ```
//!
//! with `V_end = 0` when the window ends at a true terminal and
//! `V_end = V_φ̃(s_{t+d'})` (lagged value parameters) otherwise. Gradients are
//! taken with respect to the live `θ` and `φ` only.

use std::collections::HashMap;

use crate::models::{Action, PolicyModel, ValueModel};
use crate::nn::{Huber, ParamVector};
use crate::replay::{Segment, Transition};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConsistencyConfig {
    /// Rollout length `d`.
    pub d: usize,
    pub gamma: f64,
    /// Entropy coefficient `τ`.
    pub tau: f64,
    /// Relative-entropy coefficient `λ`.
    pub lambda: f64,
    pub huber_delta: f64,
}

impl ConsistencyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::Config("d must be >= 1".into()));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::Config(format!("gamma must lie in (0, 1], got {}", self.gamma)));
        }
        if !(self.tau >= 0.0 && self.tau.is_finite()) {
            return Err(Error::Config(format!("tau must be finite and >= 0, got {}", self.tau)));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config(format!("lambda must be finite and >= 0, got {}", self.lambda)));
        }
        if !(self.huber_delta > 0.0) {
            return Err(Error::Config(format!("huber_delta must be > 0, got {}", self.huber_delta)));
        }
        Ok(())
    }
}

/// How a window ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EndKind {
    /// Cut inside an episode (rollout length reached or segment boundary).
    Interior,
    /// True environment termination: the end value is 0.
    Terminal,
    /// Time-limit cutoff: the end value is bootstrapped.
    Timeout,
}

/// A sub-trajectory `s_t .. s_{t+d'}`.
#[derive(Debug, Clone)]
pub struct Window<'a> {
    pub steps: Vec<&'a Transition>,
    /// `s_{t+d'}`.
    pub end_obs: &'a [f64],
    pub end: EndKind,
}

impl Window<'_> {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

/// Reference policy `π̃` in the relative-entropy term.
#[derive(Debug)]
pub enum Prior<'a, P> {
    /// Lagged policy parameters `θ̃`.
    Policy(&'a P),
    /// Fixed uniform distribution over this many discrete actions.
    Uniform(usize),
}

impl<P> Clone for Prior<'_, P> {
    fn clone(&self) -> Self {
        *self
    }
}

impl<P> Copy for Prior<'_, P> {}

impl<P: PolicyModel> Prior<'_, P> {
    pub fn log_prob(&self, obs: &[f64], action: &Action) -> Result<f64> {
        match self {
            Prior::Policy(p) => p.log_prob(obs, action),
            Prior::Uniform(k) => match action {
                Action::Discrete(a) if *a < *k => Ok(-(*k as f64).ln()),
                _ => Err(Error::Usage(format!("uniform prior over {k} actions given {action:?}"))),
            },
        }
    }
}

/// The four parameter sets entering the consistency error.
#[derive(Debug)]
pub struct Models<'a, P, V> {
    /// `π_θ`
    pub policy: &'a P,
    /// `V_φ`
    pub value: &'a V,
    /// `V_φ̃`
    pub lagged_value: &'a V,
    /// `π̃`
    pub prior: Prior<'a, P>,
}

impl<P, V> Clone for Models<'_, P, V> {
    fn clone(&self) -> Self {
        *self
    }
}

impl<P, V> Copy for Models<'_, P, V> {}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorAndGrads {
    pub error: f64,
    pub grad_policy: ParamVector,
    pub grad_value: ParamVector,
}

/// Consistency error of one window and its exact gradients in `θ` and `φ`.
pub fn consistency_error<P, V>(window: &Window, models: Models<P, V>, cfg: &ConsistencyConfig) -> Result<ErrorAndGrads>
where
    P: PolicyModel,
    V: ValueModel,
{
    if window.is_empty() {
        return Err(Error::Usage("empty consistency window".into()));
    }
    let mut grad_policy = ParamVector::zeros(models.policy.num_params());
    let mut grad_value = ParamVector::zeros(models.value.num_params());

    let first = window.steps[0];
    let (v_start, v_tape) = models.value.value_taped(&first.obs)?;
    models.value.accumulate_value_grad(&v_tape, -1.0, &mut grad_value)?;

    let coef = cfg.tau + cfg.lambda;
    let mut c = -v_start;
    let mut discount = 1.0;
    for step in &window.steps {
        let (lp, tape) = models.policy.log_prob_taped(&step.obs, &step.action)?;
        let prior_lp = if cfg.lambda == 0.0 {
            0.0
        } else {
            models.prior.log_prob(&step.obs, &step.action)?
        };
        c += discount * (step.reward - coef * lp + cfg.lambda * prior_lp);
        models.policy.accumulate_log_prob_grad(&tape, -discount * coef, &mut grad_policy)?;
        discount *= cfg.gamma;
    }
    c += discount * end_value(window.end, window.end_obs, models.lagged_value)?;
    if !c.is_finite() {
        return Err(Error::Numeric(format!("consistency error is {c}")));
    }
    Ok(ErrorAndGrads {
        error: c,
        grad_policy,
        grad_value,
    })
}

/// The entropy-only (`λ = 0`) consistency error.
pub fn entropy_only_error<P, V>(window: &Window, models: Models<P, V>, cfg: &ConsistencyConfig) -> Result<f64>
where
    P: PolicyModel,
    V: ValueModel,
{
    let cfg = ConsistencyConfig { lambda: 0.0, ..*cfg };
    Ok(consistency_error(window, models, &cfg)?.error)
}

fn end_value<V: ValueModel>(end: EndKind, obs: &[f64], lagged_value: &V) -> Result<f64> {
    match end {
        EndKind::Terminal => Ok(0.0),
        EndKind::Interior | EndKind::Timeout => lagged_value.value(obs),
    }
}

fn end_kind(last: &Transition) -> EndKind {
    if last.terminal {
        EndKind::Terminal
    } else if last.timeout {
        EndKind::Timeout
    } else {
        EndKind::Interior
    }
}

/// A sampled segment extended with transitions borrowed from co-sampled
/// contiguous successors, enough to complete windows starting near its end.
#[derive(Debug, Clone)]
struct Path<'a> {
    steps: Vec<&'a Transition>,
    /// Number of leading steps owned by the segment; windows start only here.
    own: usize,
    next_obs: &'a [f64],
}

impl<'a> Path<'a> {
    fn obs_after(&self, j: usize) -> &'a [f64] {
        match self.steps.get(j + 1) {
            Some(t) => &t.obs,
            None => self.next_obs,
        }
    }

    fn window_len(&self, start: usize, d: usize) -> usize {
        d.min(self.steps.len() - start)
    }

    fn window(&self, start: usize, d: usize) -> Window<'a> {
        let len = self.window_len(start, d);
        let last = start + len - 1;
        Window {
            steps: self.steps[start..=last].to_vec(),
            end_obs: self.obs_after(last),
            end: end_kind(self.steps[last]),
        }
    }
}

fn build_paths<'a>(segments: &[&'a Segment], d: usize) -> Vec<Path<'a>> {
    let by_start: HashMap<(u64, usize), &Segment> = segments
        .iter()
        .map(|s| ((s.episode_id, s.start_index), *s))
        .collect();
    segments
        .iter()
        .map(|seg| {
            let mut steps: Vec<&Transition> = seg.transitions.iter().collect();
            let mut next_obs: &[f64] = &seg.next_obs;
            let mut tail = *seg;
            let needed = d.saturating_sub(1);
            let mut borrowed = 0;
            while borrowed < needed && !tail.ends_episode() {
                let Some(succ) = by_start.get(&(tail.episode_id, tail.end_index())) else {
                    break;
                };
                let take = (needed - borrowed).min(succ.len());
                steps.extend(succ.transitions[..take].iter());
                next_obs = if take < succ.len() {
                    &succ.transitions[take].obs
                } else {
                    &succ.next_obs
                };
                borrowed += take;
                if take < succ.len() {
                    break;
                }
                tail = succ;
            }
            Path {
                own: seg.len(),
                steps,
                next_obs,
            }
        })
        .collect()
}

/// Every window of the batch: one per start offset of each sampled segment,
/// extended into co-sampled contiguous successors and truncated at episode
/// ends otherwise.
pub fn enumerate_windows<'a>(segments: &[&'a Segment], d: usize) -> Vec<Window<'a>> {
    build_paths(segments, d)
        .iter()
        .flat_map(|path| (0..path.own).map(move |t| path.window(t, d)))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchLoss {
    /// `Σ huber(C)` over all windows.
    pub loss: f64,
    /// `Σ huber'(C) ∇θ C`.
    pub grad_policy: ParamVector,
    /// `Σ huber'(C) ∇φ C`.
    pub grad_value: ParamVector,
    pub num_windows: usize,
    pub mean_abs_error: f64,
}

/// Huber loss over all windows of a sampled batch, with exact gradients.
///
/// Each path position is evaluated once with a tape; per-window Huber
/// derivatives are folded into per-position coefficients before a single
/// backward pass per position. Summation order is fixed by the batch order.
pub fn batch_loss_and_grads<P, V>(segments: &[&Segment], models: Models<P, V>, cfg: &ConsistencyConfig) -> Result<BatchLoss>
where
    P: PolicyModel,
    V: ValueModel,
{
    cfg.validate()?;
    if segments.is_empty() {
        return Err(Error::Usage("batch has no segments".into()));
    }
    let huber = Huber::new(cfg.huber_delta)?;
    let coef = cfg.tau + cfg.lambda;
    let mut out = BatchLoss {
        loss: 0.0,
        grad_policy: ParamVector::zeros(models.policy.num_params()),
        grad_value: ParamVector::zeros(models.value.num_params()),
        num_windows: 0,
        mean_abs_error: 0.0,
    };
    let mut abs_error_sum = 0.0;

    for path in build_paths(segments, cfg.d) {
        let n = path.steps.len();
        // Per-position discounted step terms r - (τ+λ) log π + λ log π̃.
        let mut step_terms = Vec::with_capacity(n);
        let mut policy_tapes = Vec::with_capacity(n);
        for step in &path.steps {
            let (lp, tape) = models.policy.log_prob_taped(&step.obs, &step.action)?;
            let prior_lp = if cfg.lambda == 0.0 {
                0.0
            } else {
                models.prior.log_prob(&step.obs, &step.action)?
            };
            step_terms.push(step.reward - coef * lp + cfg.lambda * prior_lp);
            policy_tapes.push(tape);
        }
        let mut value_tapes = Vec::with_capacity(path.own);
        let mut start_values = Vec::with_capacity(path.own);
        for step in &path.steps[..path.own] {
            let (v, tape) = models.value.value_taped(&step.obs)?;
            start_values.push(v);
            value_tapes.push(tape);
        }
        let mut end_values: Vec<Option<f64>> = vec![None; n];

        let mut policy_coef = vec![0.0; n];
        let mut value_coef = vec![0.0; path.own];
        for t in 0..path.own {
            let len = path.window_len(t, cfg.d);
            let last = t + len - 1;
            let mut c = -start_values[t];
            let mut discount = 1.0;
            for term in &step_terms[t..=last] {
                c += discount * term;
                discount *= cfg.gamma;
            }
            let v_end = match end_values[last] {
                Some(v) => v,
                None => {
                    let v = end_value(end_kind(path.steps[last]), path.obs_after(last), models.lagged_value)?;
                    end_values[last] = Some(v);
                    v
                }
            };
            c += discount * v_end;
            if !c.is_finite() {
                return Err(Error::Numeric(format!("consistency error is {c}")));
            }
            let (value, deriv) = huber.eval(c);
            out.loss += value;
            out.num_windows += 1;
            abs_error_sum += c.abs();

            value_coef[t] -= deriv;
            let mut discount = 1.0;
            for pc in &mut policy_coef[t..=last] {
                *pc -= deriv * discount * coef;
                discount *= cfg.gamma;
            }
        }

        for (tape, &k) in policy_tapes.iter().zip(&policy_coef) {
            if k != 0.0 {
                models.policy.accumulate_log_prob_grad(tape, k, &mut out.grad_policy)?;
            }
        }
        for (tape, &k) in value_tapes.iter().zip(&value_coef) {
            if k != 0.0 {
                models.value.accumulate_value_grad(tape, k, &mut out.grad_value)?;
            }
        }
    }
    out.mean_abs_error = abs_error_sum / out.num_windows as f64;
    Ok(out)
}
