//! Dense feed-forward network: tanh hidden layers and a linear output layer.
//!
//! Parameters live in one flat buffer laid out as
//! `[W_0, b_0, W_1, b_1, ..., W_L, b_L]`, each `W_l` row-major with shape
//! `(out_l, in_l)`. The shape is kept separately in [`MlpShape`] so models
//! that append extra parameters (the Gaussian log-std) can share the buffer.

use rand::Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use super::ParamVector;
use crate::error::check_len;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Identity,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Identity => z,
        }
    }

    /// Derivative expressed through the activation output `y`.
    #[inline]
    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
            Activation::Identity => 1.0,
        }
    }
}

/// Layer sizes plus the hidden activation. The output layer is always linear.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpShape {
    sizes: Vec<usize>,
    hidden_activation: Activation,
}

/// Activations recorded by a forward pass, sufficient for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// `layers[0]` is the input; `layers[l + 1]` is the output of layer `l`.
    layers: Vec<Vec<f64>>,
    num_params: usize,
}

impl ForwardCache {
    pub fn output(&self) -> &[f64] {
        self.layers.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

impl MlpShape {
    /// `sizes` lists input, hidden, and output widths, e.g. `[obs, 64, 64, act]`.
    pub fn new(sizes: Vec<usize>, hidden_activation: Activation) -> Result<Self> {
        if sizes.len() < 2 {
            return Err(Error::Config(
                "an MLP needs at least an input and an output size".into(),
            ));
        }
        if sizes.contains(&0) {
            return Err(Error::Config(format!("MLP layer sizes must be > 0, got {sizes:?}")));
        }
        Ok(Self {
            sizes,
            hidden_activation,
        })
    }

    /// Input → `hidden` tanh layers → linear output.
    pub fn tanh(input: usize, hidden: &[usize], output: usize) -> Result<Self> {
        let mut sizes = Vec::with_capacity(hidden.len() + 2);
        sizes.push(input);
        sizes.extend_from_slice(hidden);
        sizes.push(output);
        Self::new(sizes, Activation::Tanh)
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn hidden_activation(&self) -> Activation {
        self.hidden_activation
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().expect("validated non-empty")
    }

    pub fn num_layers(&self) -> usize {
        self.sizes.len() - 1
    }

    pub fn num_params(&self) -> usize {
        self.sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    fn activation(&self, layer: usize) -> Activation {
        if layer + 1 == self.num_layers() {
            Activation::Identity
        } else {
            self.hidden_activation
        }
    }

    /// Offsets of `(weights, biases)` for `layer` within the flat buffer.
    fn offsets(&self, layer: usize) -> (usize, usize) {
        let mut off = 0;
        for w in self.sizes.windows(2).take(layer) {
            off += w[0] * w[1] + w[1];
        }
        let (n_in, n_out) = (self.sizes[layer], self.sizes[layer + 1]);
        (off, off + n_in * n_out)
    }

    /// Hidden layers uniform in `±sqrt(6 / (fan_in + fan_out))`; the output
    /// layer gets the same draw scaled by `output_scale`. Biases start at zero.
    pub fn init_params<R: Rng + ?Sized>(&self, output_scale: f64, rng: &mut R) -> ParamVector {
        let mut params = vec![0.0; self.num_params()];
        for layer in 0..self.num_layers() {
            let (n_in, n_out) = (self.sizes[layer], self.sizes[layer + 1]);
            let limit = (6.0 / (n_in + n_out) as f64).sqrt();
            let dist = Uniform::new_inclusive(-limit, limit).expect("finite positive limit");
            let scale = if layer + 1 == self.num_layers() { output_scale } else { 1.0 };
            let (w_off, _) = self.offsets(layer);
            for w in &mut params[w_off..w_off + n_in * n_out] {
                *w = scale * dist.sample(rng);
            }
        }
        ParamVector(params)
    }

    /// Forward pass without recording activations.
    pub fn predict(&self, params: &[f64], input: &[f64]) -> Result<Vec<f64>> {
        check_len("mlp parameters", self.num_params(), params.len())?;
        check_len("mlp input", self.input_dim(), input.len())?;
        let mut x = input.to_vec();
        for layer in 0..self.num_layers() {
            x = self.layer_forward(params, layer, &x);
        }
        Ok(x)
    }

    /// Forward pass returning the output and the activation cache.
    pub fn forward(&self, params: &[f64], input: &[f64]) -> Result<(Vec<f64>, ForwardCache)> {
        check_len("mlp parameters", self.num_params(), params.len())?;
        check_len("mlp input", self.input_dim(), input.len())?;
        let mut layers = Vec::with_capacity(self.sizes.len());
        layers.push(input.to_vec());
        for layer in 0..self.num_layers() {
            let y = self.layer_forward(params, layer, &layers[layer]);
            layers.push(y);
        }
        let output = layers.last().cloned().unwrap_or_default();
        Ok((
            output,
            ForwardCache {
                layers,
                num_params: params.len(),
            },
        ))
    }

    #[inline]
    fn layer_forward(&self, params: &[f64], layer: usize, x: &[f64]) -> Vec<f64> {
        let (n_in, n_out) = (self.sizes[layer], self.sizes[layer + 1]);
        let (w_off, b_off) = self.offsets(layer);
        let weights = &params[w_off..w_off + n_in * n_out];
        let biases = &params[b_off..b_off + n_out];
        let act = self.activation(layer);
        weights
            .chunks_exact(n_in)
            .zip(biases)
            .map(|(row, &b)| {
                let z = row.iter().zip(x).fold(b, |acc, (w, xi)| acc + w * xi);
                act.apply(z)
            })
            .collect()
    }

    fn check_cache(&self, cache: &ForwardCache) -> Result<()> {
        check_len("mlp cache parameters", self.num_params(), cache.num_params)?;
        check_len("mlp cache depth", self.sizes.len(), cache.layers.len())?;
        for (expected, layer) in self.sizes.iter().zip(&cache.layers) {
            check_len("mlp cache layer", *expected, layer.len())?;
        }
        Ok(())
    }

    /// Reverse pass for the scalar `output · output_grad`.
    ///
    /// Adds the parameter gradient into `param_grad` (accumulating, so callers
    /// can sum several backward passes) and returns the input gradient.
    pub fn backward_into(
        &self,
        params: &[f64],
        cache: &ForwardCache,
        output_grad: &[f64],
        param_grad: &mut [f64],
    ) -> Result<Vec<f64>> {
        check_len("mlp parameters", self.num_params(), params.len())?;
        check_len("mlp parameter gradient", self.num_params(), param_grad.len())?;
        check_len("mlp output gradient", self.output_dim(), output_grad.len())?;
        self.check_cache(cache)?;

        let mut delta = output_grad.to_vec();
        for layer in (0..self.num_layers()).rev() {
            let (n_in, n_out) = (self.sizes[layer], self.sizes[layer + 1]);
            let (w_off, b_off) = self.offsets(layer);
            let x = &cache.layers[layer];
            let y = &cache.layers[layer + 1];
            let act = self.activation(layer);
            if act != Activation::Identity {
                for (d, &yo) in delta.iter_mut().zip(y) {
                    *d *= act.derivative_from_output(yo);
                }
            }

            let weights = &params[w_off..w_off + n_in * n_out];
            let mut input_grad = vec![0.0; n_in];
            let (grad_w, grad_b) = param_grad[w_off..b_off + n_out].split_at_mut(n_in * n_out);
            for (o, &d) in delta.iter().enumerate() {
                grad_b[o] += d;
                if d == 0.0 {
                    continue;
                }
                let row = &weights[o * n_in..(o + 1) * n_in];
                let grad_row = &mut grad_w[o * n_in..(o + 1) * n_in];
                for i in 0..n_in {
                    grad_row[i] += d * x[i];
                    input_grad[i] += d * row[i];
                }
            }
            delta = input_grad;
        }
        Ok(delta)
    }
}

/// Network parameters bundled with their shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub shape: MlpShape,
    pub params: ParamVector,
}

impl Mlp {
    pub fn new(shape: MlpShape, params: ParamVector) -> Result<Self> {
        check_len("mlp parameters", shape.num_params(), params.len())?;
        Ok(Self { shape, params })
    }

    pub fn zeros(shape: MlpShape) -> Self {
        let params = ParamVector::zeros(shape.num_params());
        Self { shape, params }
    }

    pub fn random<R: Rng + ?Sized>(shape: MlpShape, output_scale: f64, rng: &mut R) -> Self {
        let params = shape.init_params(output_scale, rng);
        Self { shape, params }
    }

    pub fn forward(&self, input: &[f64]) -> Result<(Vec<f64>, ForwardCache)> {
        self.shape.forward(&self.params, input)
    }

    pub fn predict(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.shape.predict(&self.params, input)
    }

    /// Exact gradients of `output · output_grad` with respect to the input
    /// and the parameters.
    pub fn backward(
        &self,
        cache: &ForwardCache,
        output_grad: &[f64],
    ) -> Result<(Vec<f64>, ParamVector)> {
        let mut grad = ParamVector::zeros(self.params.len());
        let input_grad = self
            .shape
            .backward_into(&self.params, cache, output_grad, &mut grad)?;
        Ok((input_grad, grad))
    }

    /// Mutable view of the output-layer biases.
    pub fn output_bias_mut(&mut self) -> &mut [f64] {
        let last = self.shape.num_layers() - 1;
        let (_, b_off) = self.shape.offsets(last);
        let n_out = self.shape.output_dim();
        &mut self.params[b_off..b_off + n_out]
    }
}
