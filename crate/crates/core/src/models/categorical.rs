use rand::Rng as _;

use super::{action_shape_error, Action, Parametric, PolicyModel, DEFAULT_HIDDEN, OUTPUT_INIT_SCALE};
use crate::error::check_len;
use crate::nn::{ForwardCache, MlpShape};
use crate::{Error, Result, Rng};

/// Softmax policy over the logits of an MLP.
#[derive(Debug, Clone, PartialEq)]
pub struct CategoricalPolicy {
    shape: MlpShape,
    params: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct CategoricalTape {
    cache: ForwardCache,
    probs: Vec<f64>,
    action: usize,
}

/// Numerically stable `log Σ exp(x)`.
pub(crate) fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

pub(crate) fn softmax(logits: &[f64]) -> Vec<f64> {
    let lse = log_sum_exp(logits);
    logits.iter().map(|l| (l - lse).exp()).collect()
}

impl CategoricalPolicy {
    pub fn new(shape: MlpShape, params: &[f64]) -> Result<Self> {
        check_len("categorical parameters", shape.num_params(), params.len())?;
        Ok(Self {
            shape,
            params: params.to_vec(),
        })
    }

    pub fn init(obs_dim: usize, num_actions: usize, rng: &mut Rng) -> Result<Self> {
        Self::init_with(obs_dim, num_actions, &DEFAULT_HIDDEN, rng)
    }

    pub fn init_with(obs_dim: usize, num_actions: usize, hidden: &[usize], rng: &mut Rng) -> Result<Self> {
        let shape = MlpShape::tanh(obs_dim, hidden, num_actions)?;
        let params = shape.init_params(OUTPUT_INIT_SCALE, rng);
        Self::new(shape, &params)
    }

    pub fn shape(&self) -> &MlpShape {
        &self.shape
    }

    pub fn obs_dim(&self) -> usize {
        self.shape.input_dim()
    }

    pub fn num_actions(&self) -> usize {
        self.shape.output_dim()
    }

    pub fn logits(&self, obs: &[f64]) -> Result<Vec<f64>> {
        self.shape.predict(&self.params, obs)
    }

    pub fn probs(&self, obs: &[f64]) -> Result<Vec<f64>> {
        Ok(softmax(&self.logits(obs)?))
    }

    pub fn sample(&self, obs: &[f64], rng: &mut Rng) -> Result<Action> {
        let probs = self.probs(obs)?;
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (i, p) in probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return Ok(Action::Discrete(i));
            }
        }
        // Rounding can leave `acc` a hair below 1.
        let last = probs.iter().rposition(|&p| p > 0.0).unwrap_or(probs.len() - 1);
        Ok(Action::Discrete(last))
    }

    /// Arg-max logit, lowest index on exact ties.
    pub fn greedy(&self, obs: &[f64]) -> Result<Action> {
        let logits = self.logits(obs)?;
        let mut best = 0;
        for (i, l) in logits.iter().enumerate() {
            if *l > logits[best] {
                best = i;
            }
        }
        Ok(Action::Discrete(best))
    }

    fn index(&self, action: &Action) -> Result<usize> {
        let a = action.as_discrete().ok_or_else(|| action_shape_error("discrete"))?;
        if a >= self.num_actions() {
            return Err(Error::Usage(format!(
                "action index {a} out of range for {} actions",
                self.num_actions()
            )));
        }
        Ok(a)
    }
}

impl Parametric for CategoricalPolicy {
    fn params(&self) -> &[f64] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }
}

impl PolicyModel for CategoricalPolicy {
    type Tape = CategoricalTape;

    fn num_params(&self) -> usize {
        self.params.len()
    }

    fn log_prob(&self, obs: &[f64], action: &Action) -> Result<f64> {
        let a = self.index(action)?;
        let logits = self.logits(obs)?;
        Ok(logits[a] - log_sum_exp(&logits))
    }

    fn log_prob_taped(&self, obs: &[f64], action: &Action) -> Result<(f64, CategoricalTape)> {
        let a = self.index(action)?;
        let (logits, cache) = self.shape.forward(&self.params, obs)?;
        let lse = log_sum_exp(&logits);
        let probs = logits.iter().map(|l| (l - lse).exp()).collect();
        Ok((logits[a] - lse, CategoricalTape { cache, probs, action: a }))
    }

    fn accumulate_log_prob_grad(&self, tape: &CategoricalTape, scale: f64, grad: &mut [f64]) -> Result<()> {
        let out_grad: Vec<f64> = tape
            .probs
            .iter()
            .enumerate()
            .map(|(i, p)| scale * (f64::from(u8::from(i == tape.action)) - p))
            .collect();
        self.shape
            .backward_into(&self.params, &tape.cache, &out_grad, grad)?;
        Ok(())
    }
}
