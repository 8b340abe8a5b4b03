use super::{TabularMdp, TabularPolicy};
use crate::{Error, Result};

/// Enumeration budget for [`exact_trajectory_kl`].
pub const MAX_ENUMERATED_PATHS: f64 = 1e7;

/// `KL(P_a ‖ P_b)` between the distributions over length-`H` trajectories
/// from the initial state, by exhaustive enumeration.
///
/// Each policy argument is either one stationary policy or one policy per
/// stage (`H` entries).
pub fn exact_trajectory_kl(mdp: &TabularMdp, policy_a: &[TabularPolicy], policy_b: &[TabularPolicy]) -> Result<f64> {
    mdp.validate()?;
    let h = mdp
        .horizon
        .ok_or_else(|| Error::Config("trajectory KL needs a finite-horizon MDP".into()))?;
    for policies in [policy_a, policy_b] {
        if policies.len() != 1 && policies.len() != h {
            return Err(Error::Shape {
                context: "staged policy",
                expected: h,
                actual: policies.len(),
            });
        }
        for p in policies {
            p.check_shape(mdp)?;
        }
    }
    let branching = mdp
        .transitions
        .iter()
        .flatten()
        .map(|row| row.iter().filter(|p| **p > 0.0).count())
        .max()
        .unwrap_or(1);
    let paths = ((mdp.num_actions * branching) as f64).powi(h as i32);
    if (mdp.num_actions as f64).powi(h as i32) > MAX_ENUMERATED_PATHS || paths > MAX_ENUMERATED_PATHS {
        return Err(Error::Infeasible(format!(
            "{paths:.3e} trajectories exceed the enumeration budget of {MAX_ENUMERATED_PATHS:.0e}"
        )));
    }
    let stage = |ps: &'_ [TabularPolicy], t: usize| -> usize {
        if ps.len() == 1 {
            0
        } else {
            t
        }
    };

    let mut total = 0.0;
    let mut stack = vec![(0usize, mdp.initial_state, 0.0f64, 0.0f64)];
    while let Some((t, s, log_pa, log_pb)) = stack.pop() {
        if t == h {
            total += log_pa.exp() * (log_pa - log_pb);
            continue;
        }
        let pa = &policy_a[stage(policy_a, t)];
        let pb = &policy_b[stage(policy_b, t)];
        for a in 0..mdp.num_actions {
            let qa = pa.prob(s, a);
            if qa == 0.0 {
                continue;
            }
            let qb = pb.prob(s, a);
            if qb == 0.0 {
                return Err(Error::Domain(format!(
                    "reference policy assigns zero probability to action {a} in state {s}"
                )));
            }
            for (next, rho) in mdp.successors(s, a) {
                let step = rho.ln();
                stack.push((t + 1, next, log_pa + qa.ln() + step, log_pb + qb.ln() + step));
            }
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_state(horizon: usize) -> TabularMdp {
        TabularMdp::new(vec![vec![vec![1.0]; 2]], vec![vec![0.0, 0.0]], 1.0, Some(horizon), 0).unwrap()
    }

    #[test]
    fn identical_policies() {
        let p = TabularPolicy::new(vec![vec![0.3, 0.7]]).unwrap();
        assert_eq!(exact_trajectory_kl(&single_state(3), std::slice::from_ref(&p), std::slice::from_ref(&p)).unwrap(), 0.0);
    }

    #[test]
    fn two_term_reference_and_additivity() {
        let a = TabularPolicy::new(vec![vec![0.75, 0.25]]).unwrap();
        let b = TabularPolicy::uniform(1, 2);
        let one = exact_trajectory_kl(&single_state(1), std::slice::from_ref(&a), std::slice::from_ref(&b)).unwrap();
        let expected = 0.75 * 1.5f64.ln() + 0.25 * 0.5f64.ln();
        assert!((one - expected).abs() < 1e-15);
        assert!((one - 0.130812036).abs() < 1e-9);
        let two = exact_trajectory_kl(&single_state(2), &[a], &[b]).unwrap();
        assert!((two - 2.0 * one).abs() < 1e-14);
    }

    #[test]
    fn staged_policies() {
        let a = TabularPolicy::new(vec![vec![0.75, 0.25]]).unwrap();
        let b = TabularPolicy::uniform(1, 2);
        let kl = exact_trajectory_kl(&single_state(2), &[a, b.clone()], &[b]).unwrap();
        assert!((kl - (0.75 * 1.5f64.ln() + 0.25 * 0.5f64.ln())).abs() < 1e-15);
    }

    #[test]
    fn stochastic_transitions_cancel() {
        let mdp = TabularMdp::new(
            vec![vec![vec![0.5, 0.5]; 2], vec![vec![0.2, 0.8]; 2]],
            vec![vec![0.0; 2]; 2],
            1.0,
            Some(3),
            0,
        )
        .unwrap();
        let a = TabularPolicy::new(vec![vec![0.75, 0.25]; 2]).unwrap();
        let b = TabularPolicy::uniform(2, 2);
        let kl = exact_trajectory_kl(&mdp, &[a], &[b]).unwrap();
        assert!((kl - 3.0 * (0.75 * 1.5f64.ln() + 0.25 * 0.5f64.ln())).abs() < 1e-14);
    }

    #[test]
    fn enumeration_budget() {
        let p = TabularPolicy::uniform(1, 2);
        assert!(matches!(
            exact_trajectory_kl(&single_state(30), std::slice::from_ref(&p), std::slice::from_ref(&p)),
            Err(Error::Infeasible(_))
        ));
    }
}
