use rand::Rng as _;
use rand_distr::{Distribution, Exp1};

use super::{TabularMdp, TabularPolicy};
use crate::{seeded_rng, Rng};

/// Seeds of the committed random-MDP corpus.
pub const CORPUS_SEEDS: [u64; 50] = [
    19803426, 48513448, 53969774, 88000320, 138103361, 221106180, 236597249, 255769507, 257252843,
    287154056, 318073207, 338315312, 393355788, 431705435, 496527971, 553084695, 608184111, 720839943,
    744613406, 769340121, 806942505, 811119798, 833270956, 975787128, 1042386775, 1079733805,
    1083103792, 1182176476, 1184766452, 1363369429, 1375582713, 1392950805, 1405119476, 1420567144,
    1474457815, 1491406860, 1531012664, 1561314959, 1616277126, 1697055257, 1718624544, 1762004972,
    1834584403, 1888334545, 1983876192, 2044151063, 2100437586, 2129708716, 2139595093, 2139891076,
];

/// `(τ, λ)` pairs checked on every corpus MDP.
pub const CORPUS_SETTINGS: [(f64, f64); 3] = [(0.5, 0.0), (0.0, 0.5), (0.2, 1.0)];

/// Weight of the uniform component mixed into generated reference policies,
/// keeping them bounded away from zero.
const PRIOR_UNIFORM_MIX: f64 = 0.2;

#[derive(Debug, Clone)]
pub struct CorpusInstance {
    pub seed: u64,
    pub mdp: TabularMdp,
    pub prior: TabularPolicy,
}

/// Dirichlet(1, ..., 1) draw via normalized unit exponentials.
fn flat_dirichlet(rng: &mut Rng, n: usize) -> Vec<f64> {
    let draws: Vec<f64> = (0..n).map(|_| Exp1.sample(rng)).collect();
    let total: f64 = draws.iter().sum();
    draws.into_iter().map(|x| x / total).collect()
}

/// Random discounted MDP: 2–8 states, 2–4 actions, rewards uniform in
/// `[-1, 1]`, discount uniform in `[0.5, 0.95]`, and either deterministic
/// transitions or Dirichlet(1) rows (chosen per MDP).
pub fn generate_mdp(seed: u64) -> TabularMdp {
    let mut rng = seeded_rng(seed);
    let n = rng.random_range(2..=8);
    let k = rng.random_range(2..=4);
    let deterministic = rng.random_bool(0.5);
    let gamma = rng.random_range(0.5..=0.95);
    let mut transitions = vec![vec![Vec::new(); k]; n];
    let mut rewards = vec![vec![0.0; k]; n];
    for s in 0..n {
        for a in 0..k {
            rewards[s][a] = rng.random_range(-1.0..=1.0);
            transitions[s][a] = if deterministic {
                let mut row = vec![0.0; n];
                row[rng.random_range(0..n)] = 1.0;
                row
            } else {
                flat_dirichlet(&mut rng, n)
            };
        }
    }
    TabularMdp::new(transitions, rewards, gamma, None, 0).expect("generated MDP is valid")
}

/// Strictly positive reference policy: `0.8 · Dirichlet(1) + 0.2 · uniform`.
pub fn generate_prior(seed: u64, num_states: usize, num_actions: usize) -> TabularPolicy {
    let mut rng = seeded_rng(seed ^ 0x5e_ed0f_9a1e);
    let uniform = 1.0 / num_actions as f64;
    let probs = (0..num_states)
        .map(|_| {
            flat_dirichlet(&mut rng, num_actions)
                .into_iter()
                .map(|p| (1.0 - PRIOR_UNIFORM_MIX) * p + PRIOR_UNIFORM_MIX * uniform)
                .collect()
        })
        .collect();
    TabularPolicy::new(probs).expect("generated prior is valid")
}

pub fn corpus_instance(seed: u64) -> CorpusInstance {
    let mdp = generate_mdp(seed);
    let prior = generate_prior(seed, mdp.num_states, mdp.num_actions);
    CorpusInstance { seed, mdp, prior }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corpus_is_reproducible_and_in_range() {
        let mut saw_deterministic = false;
        let mut saw_stochastic = false;
        for &seed in &CORPUS_SEEDS {
            let a = corpus_instance(seed);
            let b = corpus_instance(seed);
            assert_eq!(a.mdp, b.mdp);
            assert_eq!(a.prior, b.prior);
            assert!((2..=8).contains(&a.mdp.num_states));
            assert!((2..=4).contains(&a.mdp.num_actions));
            assert!(a.mdp.rewards.iter().flatten().all(|r| (-1.0..=1.0).contains(r)));
            assert!(a.prior.probs.iter().flatten().all(|p| *p >= 0.2 / a.mdp.num_actions as f64 - 1e-15));
            if a.mdp.is_deterministic() {
                saw_deterministic = true;
            } else {
                saw_stochastic = true;
            }
        }
        assert!(saw_deterministic && saw_stochastic);
    }

    #[test]
    fn seeds_are_distinct() {
        let mut seeds = CORPUS_SEEDS.to_vec();
        seeds.dedup();
        assert_eq!(seeds.len(), 50);
    }
}
