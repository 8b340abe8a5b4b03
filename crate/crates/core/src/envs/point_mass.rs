use rand::Rng as _;

use super::{continuous_action, ActionKind, EnvSpec, Environment, EpisodeClock, StepResult};
use crate::models::Action;
use crate::{seeded_rng, Result};

/// Planar point mass steered toward a goal.
///
/// `x ← x + 0.1·clamp(a, -1, 1)`, reward `-(‖x - g‖² + 0.01‖a‖²)` on the
/// post-move position, terminal once `‖x - g‖ < 0.05`. Observation is
/// `(x, g - x)`; the goal sits at the origin and starts are uniform in
/// `[-1, 1]²`.
#[derive(Debug, Clone)]
pub struct PointMass {
    position: [f64; 2],
    goal: [f64; 2],
    clock: EpisodeClock,
}

impl PointMass {
    pub const DEFAULT_MAX_STEPS: usize = 100;
    pub const STEP_SCALE: f64 = 0.1;
    pub const GOAL_RADIUS: f64 = 0.05;
    pub const ACTION_COST: f64 = 0.01;

    pub fn new(max_steps: usize) -> Self {
        Self {
            position: [0.0; 2],
            goal: [0.0; 2],
            clock: EpisodeClock::new(max_steps),
        }
    }

    /// Places the mass at `position` and starts an episode there.
    pub fn reset_to(&mut self, position: [f64; 2]) -> Vec<f64> {
        self.position = position;
        self.clock.start();
        self.observe()
    }

    pub fn position(&self) -> [f64; 2] {
        self.position
    }

    pub fn goal(&self) -> [f64; 2] {
        self.goal
    }

    fn observe(&self) -> Vec<f64> {
        let [x, y] = self.position;
        let [gx, gy] = self.goal;
        vec![x, y, gx - x, gy - y]
    }
}

impl Environment for PointMass {
    fn spec(&self) -> EnvSpec {
        EnvSpec {
            obs_dim: 4,
            action: ActionKind::Continuous {
                low: vec![-1.0; 2],
                high: vec![1.0; 2],
            },
            max_steps: self.clock.max_steps,
        }
    }

    fn reset(&mut self, seed: u64) -> Vec<f64> {
        let mut rng = seeded_rng(seed);
        let start = [rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0)];
        self.reset_to(start)
    }

    fn step(&mut self, action: &Action) -> Result<StepResult> {
        self.clock.ensure_active()?;
        let raw = continuous_action(action, 2)?;
        let a = [raw[0].clamp(-1.0, 1.0), raw[1].clamp(-1.0, 1.0)];
        for (x, da) in self.position.iter_mut().zip(a) {
            *x += Self::STEP_SCALE * da;
        }
        let dist_sq: f64 = self
            .position
            .iter()
            .zip(self.goal)
            .map(|(x, g)| (x - g) * (x - g))
            .sum();
        let effort = a[0] * a[0] + a[1] * a[1];
        let reward = -(dist_sq + Self::ACTION_COST * effort);
        let (terminal, timeout) = self.clock.tick(dist_sq.sqrt() < Self::GOAL_RADIUS);
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
    fn at_goal_with_zero_action() {
        let mut env = PointMass::new(100);
        env.reset_to([0.0, 0.0]);
        let r = env.step(&Action::Continuous(vec![0.0, 0.0])).unwrap();
        assert_eq!(r.reward, 0.0);
        assert!(r.terminal);
        assert!(!r.timeout);
    }

    #[test]
    fn resets_lie_in_bounds() {
        let mut env = PointMass::new(100);
        for seed in 0..200 {
            let obs = env.reset(seed);
            assert_eq!(obs.len(), 4);
            assert!(obs.iter().all(|o| (-1.0..=1.0).contains(o)));
        }
    }

    #[test]
    fn actions_are_clamped_and_rewards_non_positive() {
        let mut env = PointMass::new(100);
        env.reset_to([0.5, -0.5]);
        let r = env.step(&Action::Continuous(vec![10.0, -10.0])).unwrap();
        assert!((env.position()[0] - 0.6).abs() < 1e-12);
        assert!((env.position()[1] + 0.6).abs() < 1e-12);
        let expected = -(0.36 + 0.36 + 0.01 * 2.0);
        assert!((r.reward - expected).abs() < 1e-12);
        assert!(r.reward <= 0.0);
    }

    #[test]
    fn spec_shape() {
        let spec = PointMass::new(100).spec();
        assert_eq!(spec.obs_dim, 4);
        assert_eq!(
            spec.action,
            ActionKind::Continuous {
                low: vec![-1.0, -1.0],
                high: vec![1.0, 1.0]
            }
        );
    }
}
