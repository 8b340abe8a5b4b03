use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{CategoricalPolicy, GaussianPolicy, Parametric, Policy, ValueNet};
use crate::nn::{Activation, MlpShape};
use crate::{Error, Result};

/// On-disk parameter snapshot: a shape manifest plus the flat parameter array.
///
/// ```json
/// {"kind":"gaussian","sizes":[4,64,64,2],"hidden_activation":"tanh","extra":2,"params":[...]}
/// ```
///
/// `extra` counts parameters appended after the network (the Gaussian
/// log-std); it is zero for the other kinds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub kind: String,
    pub sizes: Vec<usize>,
    pub hidden_activation: Activation,
    pub extra: usize,
    pub params: Vec<f64>,
}

impl Checkpoint {
    fn from_parts(kind: &str, shape: &MlpShape, extra: usize, params: &[f64]) -> Self {
        Self {
            kind: kind.to_string(),
            sizes: shape.sizes().to_vec(),
            hidden_activation: shape.hidden_activation(),
            extra,
            params: params.to_vec(),
        }
    }

    pub fn from_policy(policy: &Policy) -> Self {
        match policy {
            Policy::Gaussian(p) => Self::from_parts("gaussian", p.shape(), p.action_dim(), p.params()),
            Policy::Categorical(p) => Self::from_parts("categorical", p.shape(), 0, p.params()),
        }
    }

    pub fn from_value(value: &ValueNet) -> Self {
        Self::from_parts("value", value.shape(), 0, value.params())
    }

    fn shape(&self) -> Result<MlpShape> {
        MlpShape::new(self.sizes.clone(), self.hidden_activation)
    }

    pub fn to_policy(&self) -> Result<Policy> {
        let shape = self.shape()?;
        let n = shape.num_params();
        if self.params.len() != n + self.extra {
            return Err(Error::Shape {
                context: "checkpoint parameters",
                expected: n + self.extra,
                actual: self.params.len(),
            });
        }
        match self.kind.as_str() {
            "gaussian" => {
                let (mean, xi) = self.params.split_at(n);
                Ok(Policy::Gaussian(GaussianPolicy::new(shape, mean, xi)?))
            }
            "categorical" if self.extra == 0 => {
                Ok(Policy::Categorical(CategoricalPolicy::new(shape, &self.params)?))
            }
            other => Err(Error::Usage(format!("checkpoint kind {other:?} is not a policy"))),
        }
    }

    pub fn to_value(&self) -> Result<ValueNet> {
        if self.kind != "value" || self.extra != 0 {
            return Err(Error::Usage(format!("checkpoint kind {:?} is not a value network", self.kind)));
        }
        ValueNet::new(self.shape()?, &self.params)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }
}
