//! Acceptance suite: one line per criterion, `PASS` or `FAIL`, with the
//! measured statistics. Criteria 7 and 8 are qualitative comparisons and are
//! marked `soft` in the report; every criterion must pass for the test to
//! pass.
//!
//! Run alone with `cargo test -p trust-pcl-cli --test acceptance -- --nocapture`.

use std::time::{Duration, Instant};

use rand::Rng as _;
use trust_pcl::consistency::{consistency_error, entropy_only_error, ConsistencyConfig, EndKind, Models, Prior, Window};
use trust_pcl::envs::ChainTable;
use trust_pcl::models::{Action, Policy};
use trust_pcl::oracle::{
    corpus_instance, exact_trajectory_kl, softmax_value_iteration, CorpusInstance, TabularMdp, TabularPolicy,
    TabularPolicyModel, TabularValueModel, CORPUS_SEEDS, CORPUS_SETTINGS, DEFAULT_TOL,
};
use trust_pcl::replay::Transition;
use trust_pcl::trainer::{metrics_csv, TrainConfig, TrainMetricsRow, Trainer};
use trust_pcl::trust::{estimate_kl, LambdaSolver, LambdaStatus};
use trust_pcl::{seeded_rng, Rng};
use trust_pcl_cli::commands::ablate::{arms, epsilon_arm_name, median, sample_std, steps_to_threshold};
use trust_pcl_cli::commands::grad_check::{run_checks, GRAD_TOLERANCE};
use trust_pcl_cli::commands::oracle_check::{check, VIOLATION_THRESHOLD};
use trust_pcl_cli::runfile::{self, RunSpec};

const SEEDS: [u64; 5] = [0, 1, 2, 3, 4];
const CONTROL_THRESHOLD: f64 = -5.0;
const CONTROL_BUDGET: u64 = 200_000;

struct Outcome {
    id: &'static str,
    name: &'static str,
    soft: bool,
    passed: bool,
    detail: String,
    elapsed: Duration,
}

impl Outcome {
    fn line(&self) -> String {
        format!(
            "[{}] {}{} {}: {} ({:.1} s)",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            if self.soft { " (soft)" } else { "" },
            self.name,
            self.detail,
            self.elapsed.as_secs_f64()
        )
    }
}

fn timed<F>(id: &'static str, name: &'static str, soft: bool, limit: Option<Duration>, f: F) -> Outcome
where
    F: FnOnce() -> (bool, String),
{
    let start = Instant::now();
    let (mut passed, mut detail) = f();
    let elapsed = start.elapsed();
    if let Some(limit) = limit {
        if elapsed > limit {
            passed = false;
            detail.push_str(&format!("; exceeded {} s limit", limit.as_secs()));
        }
    }
    let outcome = Outcome {
        id,
        name,
        soft,
        passed,
        detail,
        elapsed,
    };
    println!("{}", outcome.line());
    outcome
}

fn repo_file(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").join(name)
}

// ---------------------------------------------------------------------------
// Criterion 1
// ---------------------------------------------------------------------------

fn oracle_identity() -> (bool, String) {
    let report = check(&CORPUS_SEEDS, 5, false).expect("oracle check runs");
    let residual = report
        .mdps
        .iter()
        .flat_map(|m| m.settings.iter().map(|s| s.residual))
        .fold(0.0, f64::max);
    let count = report.mdps.len() * CORPUS_SETTINGS.len();
    (
        report.passed && residual <= DEFAULT_TOL,
        format!(
            "{count} solves, max residual {residual:.2e} (<= {DEFAULT_TOL:.0e}), max violation d=1..5 {:.2e} (<= {VIOLATION_THRESHOLD:.0e})",
            report.max_violation
        ),
    )
}

// ---------------------------------------------------------------------------
// Criterion 2
// ---------------------------------------------------------------------------

fn one_hot(n: usize, s: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[s] = 1.0;
    v
}

/// Steps `(s, a)`, end state, probability, and sequence id of one path.
type Path = (Vec<(usize, usize)>, usize, f64, usize);

/// Every (start state, action sequence, successor path) of length `d`, with
/// the path probability. Deterministic MDPs have one path per sequence.
fn enumerate_paths(mdp: &TabularMdp, d: usize) -> Vec<Path> {
    let mut out = Vec::new();
    let num_seq = mdp.num_actions.pow(d as u32);
    for s0 in 0..mdp.num_states {
        for seq in 0..num_seq {
            let actions: Vec<usize> = (0..d).map(|i| (seq / mdp.num_actions.pow(i as u32)) % mdp.num_actions).collect();
            let mut frontier = vec![(Vec::new(), s0, 1.0)];
            for &a in &actions {
                let mut next = Vec::new();
                for (steps, s, p) in frontier {
                    for (s2, q) in mdp.successors(s, a) {
                        let mut steps2: Vec<(usize, usize)> = steps.clone();
                        steps2.push((s, a));
                        next.push((steps2, s2, p * q));
                    }
                }
                frontier = next;
            }
            let id = s0 * num_seq + seq;
            out.extend(frontier.into_iter().map(|(steps, end, p)| (steps, end, p, id)));
        }
    }
    out
}

/// Largest |C| (deterministic) or |E[C]| over successor paths (stochastic)
/// for both the relative-entropy and the entropy-only forms.
fn optimum_errors(inst: &CorpusInstance, tau: f64, lambda: f64, d_max: usize) -> (f64, usize) {
    let mdp = &inst.mdp;
    let solution = softmax_value_iteration(mdp, &inst.prior, tau, lambda, DEFAULT_TOL).expect("solves");
    let (policy, value) = TabularValueModel::from_solution(&solution);
    let prior = TabularPolicyModel::new(&inst.prior);
    let models = Models {
        policy: &policy,
        value: &value,
        lagged_value: &value,
        prior: Prior::Policy(&prior),
    };
    let cfg = ConsistencyConfig {
        d: d_max,
        gamma: mdp.gamma,
        tau,
        lambda,
        huber_delta: 1.0,
    };
    let mut worst: f64 = 0.0;
    let mut windows = 0;
    for d in 1..=d_max {
        let paths = enumerate_paths(mdp, d);
        let num_ids = mdp.num_states * mdp.num_actions.pow(d as u32);
        let mut expected = vec![0.0; num_ids];
        let mut expected_entropy_only = vec![0.0; num_ids];
        for (steps, end, prob, id) in &paths {
            let transitions: Vec<Transition> = steps
                .iter()
                .map(|&(s, a)| Transition {
                    obs: one_hot(mdp.num_states, s),
                    action: Action::Discrete(a),
                    reward: mdp.rewards[s][a],
                    log_prob: 0.0,
                    terminal: false,
                    timeout: false,
                })
                .collect();
            let end_obs = one_hot(mdp.num_states, *end);
            let window = Window {
                steps: transitions.iter().collect(),
                end_obs: &end_obs,
                end: EndKind::Interior,
            };
            let c = consistency_error(&window, models, &cfg).expect("window evaluates").error;
            expected[*id] += prob * c;
            if lambda == 0.0 {
                expected_entropy_only[*id] += prob * entropy_only_error(&window, models, &cfg).expect("evaluates");
            }
            windows += 1;
        }
        for c in expected.iter().chain(&expected_entropy_only) {
            worst = worst.max(c.abs());
        }
    }
    (worst, windows)
}

fn consistency_at_optimum() -> (bool, String) {
    let mut worst_det: f64 = 0.0;
    let mut worst_sto: f64 = 0.0;
    let mut windows = 0;
    for &seed in &CORPUS_SEEDS {
        let inst = corpus_instance(seed);
        let deterministic = inst.mdp.is_deterministic();
        let d_max = if deterministic { 5 } else { 3 };
        for &(tau, lambda) in &CORPUS_SETTINGS {
            let (w, n) = optimum_errors(&inst, tau, lambda, d_max);
            windows += n;
            if deterministic {
                worst_det = worst_det.max(w);
            } else {
                worst_sto = worst_sto.max(w);
            }
        }
    }
    let worst = worst_det.max(worst_sto);
    (
        worst <= 1e-8,
        format!(
            "{windows} windows; deterministic MDPs max |C| {worst_det:.2e} (d=1..5), stochastic MDPs max |E[C]| {worst_sto:.2e} (d=1..3); both forms (<= 1e-8)"
        ),
    )
}

// ---------------------------------------------------------------------------
// Criterion 3
// ---------------------------------------------------------------------------

fn gradients() -> (bool, String) {
    let reports = run_checks(false).expect("gradient checks run");
    let worst = reports.iter().map(|r| r.max_rel_error).fold(0.0, f64::max);
    let parts: Vec<String> = reports.iter().map(|r| format!("{} {:.1e}", r.name, r.max_rel_error)).collect();
    (
        worst < GRAD_TOLERANCE,
        format!("max relative error {worst:.2e} (< {GRAD_TOLERANCE:.0e}); {}", parts.join(", ")),
    )
}

// ---------------------------------------------------------------------------
// Criterion 4
// ---------------------------------------------------------------------------

fn synthetic_return_sets() -> Vec<Vec<f64>> {
    (0..20u64)
        .map(|i| {
            let mut rng = seeded_rng(4000 + i);
            let n = rng.random_range(5..200);
            let scale = 10f64.powf(rng.random_range(-1.0..2.0));
            let offset = rng.random_range(-100.0..100.0);
            (0..n).map(|_| offset + scale * rng.random_range(-1.0..1.0f64).powi(3)).collect()
        })
        .collect()
}

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| (lo.ln() + (hi.ln() - lo.ln()) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// Deterministic layered MDP: 4 states, 3 actions, 5 steps, `γ = 1`.
fn layered_mdp() -> (TabularMdp, TabularPolicy) {
    let mut rng = seeded_rng(4242);
    let (s_count, a_count) = (4, 3);
    let transitions: Vec<Vec<Vec<f64>>> = (0..s_count)
        .map(|_| {
            (0..a_count)
                .map(|_| one_hot(s_count, rng.random_range(0..s_count)))
                .collect()
        })
        .collect();
    let rewards: Vec<Vec<f64>> = (0..s_count)
        .map(|_| (0..a_count).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let mdp = TabularMdp::new(transitions, rewards, 1.0, Some(5), 0).expect("valid mdp");
    let prior = TabularPolicy::new(
        (0..s_count)
            .map(|_| {
                let w: Vec<f64> = (0..a_count).map(|_| rng.random_range(0.2..1.0)).collect();
                let t: f64 = w.iter().sum();
                w.into_iter().map(|x| x / t).collect()
            })
            .collect(),
    )
    .expect("valid prior");
    (mdp, prior)
}

fn sample_return(mdp: &TabularMdp, policy: &TabularPolicy, rng: &mut Rng) -> f64 {
    let mut s = mdp.initial_state;
    let mut total = 0.0;
    for _ in 0..mdp.horizon.expect("finite horizon") {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut a = mdp.num_actions - 1;
        for (i, p) in policy.probs[s].iter().enumerate() {
            acc += p;
            if u < acc {
                a = i;
                break;
            }
        }
        total += mdp.rewards[s][a];
        s = mdp.successors(s, a).next().expect("deterministic").0;
    }
    total
}

fn lambda_tuner() -> (bool, String) {
    let sets = synthetic_return_sets();
    let solver = LambdaSolver::default();

    // (a) monotone over 6 decades
    let grid = log_grid(1e-2, 1e4, 121);
    let mut monotone = true;
    for returns in &sets {
        let kl: Vec<f64> = grid.iter().map(|&l| estimate_kl(returns, l).unwrap().kl).collect();
        monotone &= kl.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12) + 1e-300);
        monotone &= kl[0] > kl[kl.len() - 1];
    }

    // (b) target hit when attainable; (d) λ(ε) non-increasing
    let epsilons = log_grid(1e-4, 1.0, 30);
    let mut solved = 0;
    let mut worst_rel: f64 = 0.0;
    let mut lambda_monotone = true;
    for (i, returns) in sets.iter().enumerate() {
        let length = 10.0 + i as f64;
        let mut last = f64::INFINITY;
        for &eps in &epsilons {
            let target = eps * length;
            let sol = solver.solve_for_target(returns, target).unwrap();
            let attainable = estimate_kl(returns, 1e-4).unwrap().kl > target && estimate_kl(returns, 1e4).unwrap().kl < target;
            if attainable {
                solved += 1;
                worst_rel = worst_rel.max((sol.kl - target).abs() / target);
                if sol.status != LambdaStatus::Solved {
                    worst_rel = f64::INFINITY;
                }
            }
            lambda_monotone &= sol.lambda <= last;
            last = sol.lambda;
        }
    }

    // (c) Monte Carlo estimate against exact trajectory KL
    let (mdp, prior) = layered_mdp();
    let horizon = mdp.horizon.unwrap() as f64;
    let mut rng = seeded_rng(77);
    let returns: Vec<f64> = (0..1000).map(|_| sample_return(&mdp, &prior, &mut rng)).collect();
    let epsilon = 0.02;
    let sol = solver.solve_for_target(&returns, epsilon * horizon).unwrap();
    let solution = softmax_value_iteration(&mdp, &prior, 0.0, sol.lambda, DEFAULT_TOL).unwrap();
    let exact = exact_trajectory_kl(&mdp, &solution.stage_policies, std::slice::from_ref(&prior)).unwrap();
    let mc = estimate_kl(&returns, sol.lambda).unwrap().kl;
    let mc_rel = (mc - exact).abs() / exact;

    // Sampling spread of the same check over independent draws; reported
    // only, the pass condition uses the single draw above.
    let mut spread: Vec<f64> = (0..200u64)
        .map(|seed| {
            let mut rng = seeded_rng(10_000 + seed);
            let returns: Vec<f64> = (0..1000).map(|_| sample_return(&mdp, &prior, &mut rng)).collect();
            let sol = solver.solve_for_target(&returns, epsilon * horizon).unwrap();
            let solution = softmax_value_iteration(&mdp, &prior, 0.0, sol.lambda, DEFAULT_TOL).unwrap();
            let exact = exact_trajectory_kl(&mdp, &solution.stage_policies, std::slice::from_ref(&prior)).unwrap();
            (sol.kl - exact) / exact
        })
        .collect();
    let bias = spread.iter().sum::<f64>() / spread.len() as f64;
    spread.iter_mut().for_each(|e| *e = e.abs());
    spread.sort_by(f64::total_cmp);
    let over = spread.iter().filter(|&&e| e > 0.05).count();

    let passed = monotone && worst_rel <= 1e-3 && solved > 0 && mc_rel <= 0.05 && lambda_monotone;
    (
        passed,
        format!(
            "(a) KL monotone on 20 sets: {monotone}; (b) {solved} attainable targets, worst rel miss {worst_rel:.1e} (<= 1e-3); \
             (c) lambda {:.4}, MC KL {mc:.5} vs exact {exact:.5}, rel err {:.2}% (<= 5%) [200 independent draws: mean signed err {:.2}%, median |err| {:.2}%, {over}/200 over 5%]; \
             (d) lambda(eps) non-increasing: {lambda_monotone}",
            sol.lambda,
            100.0 * mc_rel,
            100.0 * bias,
            100.0 * spread[spread.len() / 2]
        ),
    )
}

// ---------------------------------------------------------------------------
// Criterion 5
// ---------------------------------------------------------------------------

fn chain_spec() -> RunSpec {
    runfile::load(Some(&repo_file("configs/chain6.conf")), &[], &[])
        .expect("chain config parses")
        .remove(0)
}

fn chain_tabular_convergence() -> (bool, String) {
    let spec = chain_spec();
    let table = ChainTable::chain6();
    let mdp = TabularMdp::from_chain(&table, false).unwrap();
    let uniform = TabularPolicy::uniform(table.num_states, table.num_actions);
    let config = &spec.config;
    assert_eq!(config.gamma, table.gamma);
    let target = softmax_value_iteration(&mdp, &uniform, config.tau.initial, 0.5, DEFAULT_TOL).unwrap();
    let mut parts = Vec::new();
    let mut reached = 0;
    for &seed in &spec.seeds {
        let mut trainer = Trainer::new(TrainConfig { seed, ..config.clone() }).unwrap();
        let mut hit = None;
        let mut tv = f64::INFINITY;
        while trainer.iteration() < config.steps {
            trainer.train_iteration().unwrap();
            if trainer.iteration().is_multiple_of(500) {
                let Policy::Categorical(p) = trainer.policy() else { unreachable!("discrete env") };
                let learned = TabularPolicy::new(
                    (0..table.num_states).map(|s| p.probs(&table.one_hot(s)).unwrap()).collect(),
                )
                .unwrap();
                tv = learned.max_total_variation(target.policy());
                if tv <= 0.05 {
                    hit = Some(trainer.iteration());
                    break;
                }
            }
        }
        match hit {
            Some(it) => {
                reached += 1;
                parts.push(format!("seed {seed}: TV {tv:.4} at {it} steps"));
            }
            None => parts.push(format!("seed {seed}: TV {tv:.4} after {} steps", config.steps)),
        }
    }
    (
        reached == spec.seeds.len(),
        format!("{reached}/{} seeds reach max per-state TV <= 0.05 within {} steps; {}", spec.seeds.len(), config.steps, parts.join(", ")),
    )
}

// ---------------------------------------------------------------------------
// Criteria 6 to 9: point-mass runs
// ---------------------------------------------------------------------------

fn off_policy_spec() -> RunSpec {
    let mut spec = runfile::load(Some(&repo_file("configs/off-policy.conf")), &[], &[])
        .expect("off-policy config parses")
        .remove(0);
    spec.config.steps = CONTROL_BUDGET / spec.config.collect_steps as u64;
    spec
}

fn train(config: &TrainConfig, seed: u64) -> Vec<TrainMetricsRow> {
    Trainer::new(TrainConfig { seed, ..config.clone() })
        .and_then(|mut t| t.run())
        .expect("training runs")
}

fn control(runs: &[Vec<TrainMetricsRow>]) -> (bool, String) {
    let parts: Vec<String> = runs
        .iter()
        .zip(SEEDS)
        .map(|(rows, seed)| match steps_to_threshold(rows, CONTROL_THRESHOLD) {
            Some(s) => format!("seed {seed}: {s} steps"),
            None => format!("seed {seed}: not reached (final {:.2})", rows.last().map_or(f64::NAN, |r| r.eval_return)),
        })
        .collect();
    let reached = runs
        .iter()
        .filter(|rows| matches!(steps_to_threshold(rows, CONTROL_THRESHOLD), Some(s) if s <= CONTROL_BUDGET))
        .count();
    (
        reached >= 4,
        format!("{reached}/5 seeds reach greedy return >= {CONTROL_THRESHOLD} within {CONTROL_BUDGET} steps; {}", parts.join(", ")),
    )
}

fn final_returns(runs: &[Vec<TrainMetricsRow>]) -> Vec<f64> {
    runs.iter().map(|rows| rows.last().expect("rows").eval_return).collect()
}

fn epsilon_ablation(trust: &[Vec<TrainMetricsRow>], unconstrained: &[Vec<TrainMetricsRow>]) -> (bool, String) {
    let (a, b) = (final_returns(trust), final_returns(unconstrained));
    let (std_a, std_b) = (sample_std(&a), sample_std(&b));
    let (med_a, med_b) = (median(&a), median(&b));
    let spread = std_b >= 2.0 * std_a;
    let lower = med_b < med_a;
    (
        spread || lower,
        format!(
            "final return std: eps=inf {std_b:.4} vs eps=0.01 {std_a:.4} (2x rule {spread}); median: eps=inf {med_b:.4} vs eps=0.01 {med_a:.4} (lower {lower})"
        ),
    )
}

fn on_off_policy(off: &[Vec<TrainMetricsRow>], on: &[Vec<TrainMetricsRow>]) -> (bool, String) {
    let mut wins = 0;
    let mut parts = Vec::new();
    for ((a, b), seed) in off.iter().zip(on).zip(SEEDS) {
        let (sa, sb) = (steps_to_threshold(a, CONTROL_THRESHOLD), steps_to_threshold(b, CONTROL_THRESHOLD));
        let win = match (sa, sb) {
            (Some(x), Some(y)) => x < y,
            (Some(_), None) => true,
            _ => false,
        };
        wins += win as usize;
        let show = |s: Option<u64>| s.map_or("none".to_string(), |v| v.to_string());
        parts.push(format!("seed {seed}: off {} vs on {}", show(sa), show(sb)));
    }
    (
        wins >= 4,
        format!("off-policy reaches the threshold first in {wins}/5 pairings; {}", parts.join(", ")),
    )
}

fn determinism(off_spec: &RunSpec, reference: &[TrainMetricsRow]) -> (bool, String) {
    let reload = |spec: &RunSpec| -> RunSpec {
        runfile::expand(&runfile::manifest_text(spec), &[], &[]).expect("manifest parses").remove(0)
    };
    let off = reload(off_spec);
    let control_same = metrics_csv(&train(&off.config, SEEDS[0])) == metrics_csv(reference);

    let mut chain = chain_spec();
    chain.config.steps = 2000;
    let chain = reload(&chain);
    let first = metrics_csv(&train(&chain.config, chain.seeds[0]));
    let second = metrics_csv(&train(&reload(&chain).config, chain.seeds[0]));
    let chain_same = first == second;
    (
        control_same && chain_same,
        format!("point-mass seed 0 rerun identical: {control_same}; chain seed {} rerun identical: {chain_same}", chain.seeds[0]),
    )
}

#[test]
fn acceptance() {
    let mut outcomes = vec![
        timed("1", "oracle consistency identity", false, Some(Duration::from_secs(30)), oracle_identity),
        timed("2", "consistency error zero at the optimum", false, Some(Duration::from_secs(30)), consistency_at_optimum),
        timed("3", "gradient correctness", false, Some(Duration::from_secs(10)), gradients),
        timed("4", "lambda tuner", false, Some(Duration::from_secs(60)), lambda_tuner),
        timed("5", "tabular learning convergence", false, Some(Duration::from_secs(300)), chain_tabular_convergence),
    ];

    let off = off_policy_spec();
    let start = Instant::now();
    let trust_runs: Vec<Vec<TrainMetricsRow>> = SEEDS.iter().map(|&s| train(&off.config, s)).collect();
    let trust_time = start.elapsed();
    let per_seed = trust_time / SEEDS.len() as u32;
    let mut outcome = timed("6", "point-mass off-policy control", false, None, || control(&trust_runs));
    outcome.elapsed = trust_time;
    if per_seed > Duration::from_secs(900) {
        outcome.passed = false;
    }
    println!("    training time {:.1} s per seed (limit 900 s)", per_seed.as_secs_f64());
    outcomes.push(outcome);

    let study = arms("epsilon", &off.config.env, &[]).expect("epsilon arms");
    let arm = |eps: Option<f64>| {
        let name = epsilon_arm_name(eps);
        let config = &study.iter().find(|a| a.name == name).expect("arm exists").config;
        assert_eq!(config.steps, off.config.steps);
        SEEDS.iter().map(|&s| train(config, s)).collect::<Vec<_>>()
    };
    let (trust_arm, free_arm) = (arm(Some(0.01)), arm(None));
    outcomes.push(timed("7", "epsilon ablation", true, None, || epsilon_ablation(&trust_arm, &free_arm)));

    let on = TrainConfig {
        env: off.config.env.clone(),
        stop_eval_return: Some(CONTROL_THRESHOLD),
        ..TrainConfig::on_policy()
    };
    let on_runs: Vec<Vec<TrainMetricsRow>> = SEEDS.iter().map(|&s| train(&on, s)).collect();
    outcomes.push(timed("8", "off-policy versus on-policy sample efficiency", true, None, || on_off_policy(&trust_runs, &on_runs)));

    outcomes.push(timed("9", "determinism", false, None, || determinism(&off, &trust_runs[0])));

    println!("\nacceptance summary");
    for o in &outcomes {
        println!("{}", o.line());
    }
    let failed: Vec<&str> = outcomes.iter().filter(|o| !o.passed).map(|o| o.id).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
