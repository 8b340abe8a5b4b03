//! Minimal dense numerics: feed-forward networks with exact gradients,
//! the Adam optimizer, the Huber penalty, and a finite-difference checker.

mod adam;
mod gradcheck;
mod huber;
mod mlp;

pub use adam::AdamState;
pub use gradcheck::{finite_diff_check, finite_diff_gradient, relative_error};
pub use huber::{huber, Huber};
pub use mlp::{Activation, ForwardCache, Mlp, MlpShape};

use std::ops::{Deref, DerefMut};

use serde::{Deserialize, Serialize};

/// Flat, ordered view of every trainable scalar of a model.
///
/// Each model documents its layout; for an [`Mlp`] it is
/// `[W_0, b_0, W_1, b_1, ..., W_L, b_L]` with row-major `(out, in)` weights.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamVector(pub Vec<f64>);

impl ParamVector {
    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// Euclidean norm.
    pub fn norm(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn all_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }
}

impl From<Vec<f64>> for ParamVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

impl Deref for ParamVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for ParamVector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}
