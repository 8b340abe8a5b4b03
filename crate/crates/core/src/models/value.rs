use super::{Parametric, ValueModel, DEFAULT_HIDDEN, OUTPUT_INIT_SCALE};
use crate::error::check_len;
use crate::nn::{ForwardCache, MlpShape};
use crate::{Error, Result, Rng};

/// Value network `V_φ(s)` evaluated on `[s, s⊙s]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueNet {
    shape: MlpShape,
    params: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ValueTape {
    cache: ForwardCache,
}

fn augment(obs: &[f64]) -> Vec<f64> {
    let mut x = Vec::with_capacity(2 * obs.len());
    x.extend_from_slice(obs);
    x.extend(obs.iter().map(|o| o * o));
    x
}

impl ValueNet {
    pub fn new(shape: MlpShape, params: &[f64]) -> Result<Self> {
        if shape.output_dim() != 1 || !shape.input_dim().is_multiple_of(2) {
            return Err(Error::Config(format!(
                "value network needs an even input width and a scalar output, got {:?}",
                shape.sizes()
            )));
        }
        check_len("value parameters", shape.num_params(), params.len())?;
        Ok(Self {
            shape,
            params: params.to_vec(),
        })
    }

    pub fn init(obs_dim: usize, rng: &mut Rng) -> Result<Self> {
        Self::init_with(obs_dim, &DEFAULT_HIDDEN, rng)
    }

    pub fn init_with(obs_dim: usize, hidden: &[usize], rng: &mut Rng) -> Result<Self> {
        let shape = MlpShape::tanh(2 * obs_dim, hidden, 1)?;
        let params = shape.init_params(OUTPUT_INIT_SCALE, rng);
        Self::new(shape, &params)
    }

    pub fn shape(&self) -> &MlpShape {
        &self.shape
    }

    pub fn obs_dim(&self) -> usize {
        self.shape.input_dim() / 2
    }

    fn input(&self, obs: &[f64]) -> Result<Vec<f64>> {
        check_len("value observation", self.obs_dim(), obs.len())?;
        Ok(augment(obs))
    }
}

impl Parametric for ValueNet {
    fn params(&self) -> &[f64] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }
}

impl ValueModel for ValueNet {
    type Tape = ValueTape;

    fn num_params(&self) -> usize {
        self.params.len()
    }

    fn value(&self, obs: &[f64]) -> Result<f64> {
        Ok(self.shape.predict(&self.params, &self.input(obs)?)?[0])
    }

    fn value_taped(&self, obs: &[f64]) -> Result<(f64, ValueTape)> {
        let (out, cache) = self.shape.forward(&self.params, &self.input(obs)?)?;
        Ok((out[0], ValueTape { cache }))
    }

    fn accumulate_value_grad(&self, tape: &ValueTape, scale: f64, grad: &mut [f64]) -> Result<()> {
        self.shape
            .backward_into(&self.params, &tape.cache, &[scale], grad)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{finite_diff_check, Mlp};
    use crate::seeded_rng;

    #[test]
    fn zero_weights_give_output_bias() {
        let shape = MlpShape::tanh(6, &[64, 64], 1).unwrap();
        let mut mlp = Mlp::zeros(shape.clone());
        mlp.output_bias_mut()[0] = 7.0;
        let v = ValueNet::new(shape, &mlp.params).unwrap();
        assert_eq!(v.value(&[1.0, -3.0, 0.5]).unwrap(), 7.0);
        assert_eq!(v.value(&[0.0; 3]).unwrap(), 7.0);
    }

    #[test]
    fn zero_observation_uses_biases_only() {
        let mut rng = seeded_rng(2);
        let v = ValueNet::init(3, &mut rng).unwrap();
        let mut no_weights = v.clone();
        // Re-evaluate directly: with a zero input the first layer sees only its bias.
        let direct = v.shape().predict(v.params(), &[0.0; 6]).unwrap()[0];
        assert_eq!(v.value(&[0.0; 3]).unwrap(), direct);
        // Scrambling the first-layer weights changes nothing at s = 0.
        for w in &mut no_weights.params_mut()[..6 * 64] {
            *w = 123.0;
        }
        assert_eq!(no_weights.value(&[0.0; 3]).unwrap(), direct);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = seeded_rng(17);
        let shape = MlpShape::tanh(4, &[6, 5], 1).unwrap();
        let params = shape.init_params(1.0, &mut rng);
        let v = ValueNet::new(shape, &params).unwrap();
        let obs = [0.5, -1.2];
        let (_, grad) = v.value_with_grad(&obs).unwrap();
        let loss = |q: &[f64]| {
            let mut vv = v.clone();
            vv.params_mut().copy_from_slice(q);
            vv.value(&obs).unwrap()
        };
        let err = finite_diff_check(loss, &grad, v.params(), 1e-5);
        assert!(err < 1e-6, "{err}");
    }

    #[test]
    fn rejects_bad_shapes() {
        let odd = MlpShape::tanh(3, &[4], 1).unwrap();
        assert!(ValueNet::new(odd.clone(), &vec![0.0; odd.num_params()]).is_err());
        let mut rng = seeded_rng(1);
        let v = ValueNet::init(2, &mut rng).unwrap();
        assert!(v.value(&[1.0, 2.0, 3.0]).is_err());
    }
}
