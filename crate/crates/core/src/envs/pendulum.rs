use std::f64::consts::PI;

use rand::Rng as _;

use super::{continuous_action, ActionKind, EnvSpec, Environment, EpisodeClock, StepResult};
use crate::models::Action;
use crate::{seeded_rng, Result};

/// Classic pendulum swing-up, angle 0 upright.
///
/// Semi-implicit Euler with `g = 10`, `m = 1`, `l = 1`, `dt = 0.05`, torque
/// clamped to `[-2, 2]`, angular velocity clamped to `[-8, 8]`. Reward
/// `-(θ² + 0.1 ω² + 0.001 u²)` on the pre-step state with `θ` wrapped to
/// `[-π, π)`. Never terminates. Observation `(cos θ, sin θ, ω)`.
#[derive(Debug, Clone)]
pub struct Pendulum {
    angle: f64,
    velocity: f64,
    clock: EpisodeClock,
}

impl Pendulum {
    pub const DEFAULT_MAX_STEPS: usize = 200;
    pub const GRAVITY: f64 = 10.0;
    pub const MASS: f64 = 1.0;
    pub const LENGTH: f64 = 1.0;
    pub const DT: f64 = 0.05;
    pub const MAX_TORQUE: f64 = 2.0;
    pub const MAX_SPEED: f64 = 8.0;

    pub fn new(max_steps: usize) -> Self {
        Self {
            angle: 0.0,
            velocity: 0.0,
            clock: EpisodeClock::new(max_steps),
        }
    }

    pub fn reset_to(&mut self, angle: f64, velocity: f64) -> Vec<f64> {
        self.angle = angle;
        self.velocity = velocity;
        self.clock.start();
        self.observe()
    }

    pub fn angle(&self) -> f64 {
        self.angle
    }

    fn observe(&self) -> Vec<f64> {
        vec![self.angle.cos(), self.angle.sin(), self.velocity]
    }
}

fn wrap_angle(x: f64) -> f64 {
    (x + PI).rem_euclid(2.0 * PI) - PI
}

impl Environment for Pendulum {
    fn spec(&self) -> EnvSpec {
        EnvSpec {
            obs_dim: 3,
            action: ActionKind::Continuous {
                low: vec![-Self::MAX_TORQUE],
                high: vec![Self::MAX_TORQUE],
            },
            max_steps: self.clock.max_steps,
        }
    }

    fn reset(&mut self, seed: u64) -> Vec<f64> {
        let mut rng = seeded_rng(seed);
        let angle = rng.random_range(-PI..=PI);
        let velocity = rng.random_range(-1.0..=1.0);
        self.reset_to(angle, velocity)
    }

    fn step(&mut self, action: &Action) -> Result<StepResult> {
        self.clock.ensure_active()?;
        let u = continuous_action(action, 1)?[0].clamp(-Self::MAX_TORQUE, Self::MAX_TORQUE);
        let th = wrap_angle(self.angle);
        let reward = -(th * th + 0.1 * self.velocity * self.velocity + 0.001 * u * u);

        let (g, m, l) = (Self::GRAVITY, Self::MASS, Self::LENGTH);
        let accel = 3.0 * g / (2.0 * l) * self.angle.sin() + 3.0 / (m * l * l) * u;
        self.velocity = (self.velocity + accel * Self::DT).clamp(-Self::MAX_SPEED, Self::MAX_SPEED);
        self.angle += self.velocity * Self::DT;

        let (terminal, timeout) = self.clock.tick(false);
        Ok(StepResult {
            obs: self.observe(),
            reward,
            terminal,
            timeout,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn upright_is_a_fixed_point() {
        let mut env = Pendulum::new(200);
        env.reset_to(0.0, 0.0);
        for _ in 0..50 {
            let r = env.step(&Action::Continuous(vec![0.0])).unwrap();
            assert_eq!(env.angle(), 0.0);
            assert_eq!(r.reward, 0.0);
        }
    }

    #[test]
    fn reward_bounds_hold() {
        let lower = -(PI * PI + 0.1 * 64.0 + 0.001 * 4.0);
        let mut env = Pendulum::new(200);
        for seed in 0..20 {
            env.reset(seed);
            for k in 0..200 {
                let u = if (k / 20) % 2 == 0 { 5.0 } else { -5.0 };
                let r = env.step(&Action::Continuous(vec![u])).unwrap();
                assert!(r.reward <= 0.0 && r.reward >= lower, "{}", r.reward);
                assert!(!r.terminal);
            }
        }
    }

    #[test]
    fn observation_is_unit_circle_plus_velocity() {
        let mut env = Pendulum::new(10);
        let obs = env.reset(3);
        assert_eq!(obs.len(), 3);
        assert!((obs[0] * obs[0] + obs[1] * obs[1] - 1.0).abs() < 1e-12);
        assert!(obs[2].abs() <= 1.0);
    }

    #[test]
    fn wrap() {
        assert!((wrap_angle(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-12);
        assert!((wrap_angle(-0.25) + 0.25).abs() < 1e-15);
    }
}
