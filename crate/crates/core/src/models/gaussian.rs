use rand_distr::{Distribution, StandardNormal};

use super::{action_shape_error, Action, Parametric, PolicyModel, DEFAULT_HIDDEN, OUTPUT_INIT_SCALE};
use crate::error::check_len;
use crate::nn::{ForwardCache, MlpShape};
use crate::{Error, Result, Rng};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Diagonal Gaussian policy `N(μ_θ(s), diag(exp(ξ))²)`.
///
/// Parameter layout: mean-network parameters followed by the `ξ` vector.
/// No squashing is applied; environments clamp out-of-range actions, so the
/// log-density here is the exact density of the sampled action.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPolicy {
    shape: MlpShape,
    params: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct GaussianTape {
    cache: ForwardCache,
    /// `(a - μ) / σ` per action dimension.
    z: Vec<f64>,
    /// `(a - μ) / σ²`, the mean gradient of the log-density.
    mean_grad: Vec<f64>,
}

impl GaussianPolicy {
    pub fn new(shape: MlpShape, mean_params: &[f64], log_std: &[f64]) -> Result<Self> {
        check_len("gaussian mean parameters", shape.num_params(), mean_params.len())?;
        check_len("gaussian log-std", shape.output_dim(), log_std.len())?;
        if log_std.iter().any(|x| !x.is_finite()) {
            return Err(Error::Domain("log-std entries must be finite".into()));
        }
        let mut params = mean_params.to_vec();
        params.extend_from_slice(log_std);
        Ok(Self { shape, params })
    }

    /// Default architecture, `ξ = 0` (unit standard deviation).
    pub fn init(obs_dim: usize, action_dim: usize, rng: &mut Rng) -> Result<Self> {
        Self::init_with(obs_dim, action_dim, &DEFAULT_HIDDEN, 0.0, rng)
    }

    /// Given hidden widths, every log-std entry set to `log_std`.
    pub fn init_with(
        obs_dim: usize,
        action_dim: usize,
        hidden: &[usize],
        log_std: f64,
        rng: &mut Rng,
    ) -> Result<Self> {
        let shape = MlpShape::tanh(obs_dim, hidden, action_dim)?;
        let mean = shape.init_params(OUTPUT_INIT_SCALE, rng);
        Self::new(shape, &mean, &vec![log_std; action_dim])
    }

    pub fn shape(&self) -> &MlpShape {
        &self.shape
    }

    pub fn obs_dim(&self) -> usize {
        self.shape.input_dim()
    }

    pub fn action_dim(&self) -> usize {
        self.shape.output_dim()
    }

    fn split(&self) -> (&[f64], &[f64]) {
        self.params.split_at(self.shape.num_params())
    }

    pub fn log_std(&self) -> &[f64] {
        self.split().1
    }

    pub fn log_std_mut(&mut self) -> &mut [f64] {
        let n = self.shape.num_params();
        &mut self.params[n..]
    }

    pub fn mean(&self, obs: &[f64]) -> Result<Vec<f64>> {
        self.shape.predict(self.split().0, obs)
    }

    pub fn sample(&self, obs: &[f64], rng: &mut Rng) -> Result<Action> {
        let mu = self.mean(obs)?;
        let action = mu
            .iter()
            .zip(self.log_std())
            .map(|(m, xi)| {
                let z: f64 = StandardNormal.sample(rng);
                m + xi.exp() * z
            })
            .collect();
        Ok(Action::Continuous(action))
    }

    pub fn greedy(&self, obs: &[f64]) -> Result<Action> {
        Ok(Action::Continuous(self.mean(obs)?))
    }

    fn density_terms(&self, mu: &[f64], a: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
        let mut log_prob = 0.0;
        let mut z = Vec::with_capacity(a.len());
        let mut mean_grad = Vec::with_capacity(a.len());
        for ((&aj, &mj), &xi) in a.iter().zip(mu).zip(self.log_std()) {
            let inv_sigma = (-xi).exp();
            let zj = (aj - mj) * inv_sigma;
            log_prob -= 0.5 * (zj * zj + 2.0 * xi + LN_2PI);
            z.push(zj);
            mean_grad.push(zj * inv_sigma);
        }
        (log_prob, z, mean_grad)
    }

    fn continuous<'a>(&self, action: &'a Action) -> Result<&'a [f64]> {
        let a = action
            .as_continuous()
            .ok_or_else(|| action_shape_error("continuous"))?;
        check_len("gaussian action", self.action_dim(), a.len())?;
        Ok(a)
    }
}

impl Parametric for GaussianPolicy {
    fn params(&self) -> &[f64] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }
}

impl PolicyModel for GaussianPolicy {
    type Tape = GaussianTape;

    fn num_params(&self) -> usize {
        self.params.len()
    }

    fn log_prob(&self, obs: &[f64], action: &Action) -> Result<f64> {
        let a = self.continuous(action)?;
        let mu = self.mean(obs)?;
        Ok(self.density_terms(&mu, a).0)
    }

    fn log_prob_taped(&self, obs: &[f64], action: &Action) -> Result<(f64, GaussianTape)> {
        let a = self.continuous(action)?;
        let (mu, cache) = self.shape.forward(self.split().0, obs)?;
        let (log_prob, z, mean_grad) = self.density_terms(&mu, a);
        Ok((log_prob, GaussianTape { cache, z, mean_grad }))
    }

    fn accumulate_log_prob_grad(&self, tape: &GaussianTape, scale: f64, grad: &mut [f64]) -> Result<()> {
        check_len("gaussian gradient", self.params.len(), grad.len())?;
        let n = self.shape.num_params();
        let (net_grad, xi_grad) = grad.split_at_mut(n);
        let out_grad: Vec<f64> = tape.mean_grad.iter().map(|g| scale * g).collect();
        self.shape
            .backward_into(self.split().0, &tape.cache, &out_grad, net_grad)?;
        // d/dξ of -(z²/2 + ξ) with z = (a - μ) e^{-ξ} is z² - 1.
        for (g, z) in xi_grad.iter_mut().zip(&tape.z) {
            *g += scale * (z * z - 1.0);
        }
        Ok(())
    }
}
