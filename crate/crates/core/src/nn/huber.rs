use crate::{Error, Result};

/// Huber penalty with threshold `delta`.
///
/// Quadratic `x²/2` inside `|x| <= delta`, linear `delta (|x| - delta/2)`
/// outside. The derivative is `clamp(x, -delta, delta)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Huber {
    delta: f64,
}

impl Huber {
    pub fn new(delta: f64) -> Result<Self> {
        if delta > 0.0 && delta.is_finite() {
            Ok(Self { delta })
        } else {
            Err(Error::Config(format!("huber delta must be > 0, got {delta}")))
        }
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Returns `(value, derivative)`.
    #[inline]
    pub fn eval(&self, x: f64) -> (f64, f64) {
        let d = self.delta;
        if x.abs() <= d {
            (0.5 * x * x, x)
        } else {
            (d * (x.abs() - 0.5 * d), d.copysign(x))
        }
    }
}

pub fn huber(x: f64, delta: f64) -> Result<(f64, f64)> {
    Ok(Huber::new(delta)?.eval(x))
}
