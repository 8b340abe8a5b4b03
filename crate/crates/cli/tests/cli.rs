//! End-to-end runs of the `trust-pcl` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use trust_pcl::oracle::CORPUS_SEEDS;
use trust_pcl::trainer::{parse_metrics_csv, METRICS_HEADER};
use trust_pcl_cli::commands::oracle_check::resolve_corpus;
use trust_pcl_cli::runfile;

const SMALL_RUN: [&str; 8] = [
    "--override",
    "steps=30",
    "--override",
    "eval.interval=10",
    "--override",
    "env.max_steps=20",
    "--override",
    "batch_transitions=20",
];

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_trust-pcl"));
    cmd.env_remove("TRUST_PCL_THREADS");
    cmd
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn repo_file(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").join(name)
}

fn path_str(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

#[test]
fn invalid_epsilon_exits_2_naming_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["train", "--out", path_str(dir.path()), "--override", "epsilon=-1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("epsilon"), "{}", stderr(&out));
}

#[test]
fn unknown_key_exits_2_naming_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["train", "--out", path_str(dir.path()), "--override", "learning_rate=1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("learning_rate"));
}

#[test]
fn bad_thread_cap_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["train", "--out", path_str(dir.path())])
        .args(SMALL_RUN)
        .env("TRUST_PCL_THREADS", "0")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("TRUST_PCL_THREADS"));
}

#[test]
fn two_seeds_write_two_csvs_and_reruns_match() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first");
    let out = bin()
        .args(["train", "--out", path_str(&first), "--seed", "3", "--seed", "8"])
        .args(SMALL_RUN)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    for seed in [3, 8] {
        let csv = fs::read_to_string(first.join(format!("metrics_seed{seed}.csv"))).unwrap();
        let rows = parse_metrics_csv(&csv).unwrap();
        assert_eq!(rows.len(), 3);
        assert!(rows.windows(2).all(|w| w[1].env_steps > w[0].env_steps));
        assert!(first.join(format!("checkpoint_seed{seed}/policy.json")).is_file());
        assert!(first.join(format!("checkpoint_seed{seed}/value.json")).is_file());
    }

    let second = dir.path().join("second");
    let manifest = first.join(runfile::MANIFEST_FILE);
    let out = run(&["train", "--config", path_str(&manifest), "--out", path_str(&second)]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    for seed in [3, 8] {
        let name = format!("metrics_seed{seed}.csv");
        assert_eq!(
            fs::read(first.join(&name)).unwrap(),
            fs::read(second.join(&name)).unwrap(),
            "{name} differs on rerun"
        );
    }
    assert_eq!(
        fs::read_to_string(&manifest).unwrap(),
        fs::read_to_string(second.join(runfile::MANIFEST_FILE)).unwrap()
    );

    let out = run(&[
        "evaluate",
        "--checkpoint",
        path_str(&first.join("checkpoint_seed3")),
        "--env",
        "point-mass",
        "--episodes",
        "3",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(stdout(&out).starts_with("mean_return = "));
}

#[test]
fn zero_steps_write_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["train", "--out", path_str(dir.path()), "--override", "steps=0"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let csv = fs::read_to_string(dir.path().join("metrics_seed0.csv")).unwrap();
    assert_eq!(csv, format!("{METRICS_HEADER}\n"));
}

#[test]
fn grid_config_writes_one_directory_per_point() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("grid.conf");
    fs::write(&config, "seeds = 0\nsteps = 2\nepsilon = 0.01 | inf\n").unwrap();
    let out = run(&["train", "--config", path_str(&config), "--out", path_str(&dir.path().join("out"))]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    for point in ["point0", "point1"] {
        assert!(dir.path().join("out").join(point).join("metrics_seed0.csv").is_file());
    }
}

#[test]
fn shipped_configs_parse() {
    for name in ["off-policy.conf", "on-policy.conf", "chain6.conf"] {
        let specs = runfile::load(Some(&repo_file(&format!("configs/{name}"))), &[], &[]).unwrap();
        assert_eq!(specs.len(), 1, "{name}");
    }
    let grid = runfile::load(Some(&repo_file("configs/hyperparameter-grid.conf")), &[], &[]).unwrap();
    assert_eq!(grid.len(), 8);
    let on = &runfile::load(Some(&repo_file("configs/on-policy.conf")), &[], &[]).unwrap()[0];
    assert_eq!((on.config.alpha, on.config.beta, on.config.collect_steps), (0.95, 0.1, 1000));
    assert_eq!(on.config.batch_transitions, 25 * on.config.collect_steps);
    let corpus = resolve_corpus(Some(path_str(&repo_file("configs/corpus_seeds.txt")))).unwrap();
    assert_eq!(corpus, CORPUS_SEEDS.to_vec());
}

#[test]
fn oracle_check_passes_and_detects_corruption() {
    let dir = tempfile::tempdir().unwrap();
    let report = |d: &str| -> serde_json::Value {
        let path = dir.path().join(format!("report{d}.json"));
        let out = run(&["oracle-check", "--d-max", d, "--report", path_str(&path)]);
        assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
        serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
    };
    let (one, five) = (report("1"), report("5"));
    let one = one["mdps"].as_array().unwrap();
    let five = five["mdps"].as_array().unwrap();
    assert_eq!(one.len(), 50);
    for (a, b) in one.iter().zip(five) {
        assert!(a["max_violation"].as_f64().unwrap() <= b["max_violation"].as_f64().unwrap());
    }
    let out = run(&["oracle-check", "--inject-fault"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn grad_check_passes_and_detects_a_broken_gradient() {
    let out = run(&["grad-check"]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    let text = stdout(&out);
    for name in ["gaussian", "categorical", "value network", "batch loss (policy)", "batch loss (value)"] {
        assert!(text.contains(name), "{text}");
    }
    assert!(text.contains("worst:"));
    assert_eq!(run(&["grad-check", "--inject-fault"]).status.code(), Some(1));
}

#[test]
fn lambda_trace_curves() {
    let dir = tempfile::tempdir().unwrap();
    let returns = dir.path().join("returns.txt");

    fs::write(&returns, "3 3 3\n3\n").unwrap();
    let out_dir = dir.path().join("equal");
    let out = run(&["lambda-trace", "--returns", path_str(&returns), "--out", path_str(&out_dir)]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let curve = fs::read_to_string(out_dir.join("lambda_curve.csv")).unwrap();
    for line in curve.lines().skip(1) {
        assert_eq!(line.split(',').nth(2), Some("0.0001"), "{line}");
    }
    let kl = fs::read_to_string(out_dir.join("kl_curve.csv")).unwrap();
    assert!(kl.lines().skip(1).all(|l| l.ends_with(",0")));

    fs::write(&returns, "0, 1  # two returns\n").unwrap();
    let out_dir = dir.path().join("two");
    let out = run(&[
        "lambda-trace",
        "--returns",
        path_str(&returns),
        "--epsilon",
        "0.001",
        "--epsilon",
        "0.01",
        "--out",
        path_str(&out_dir),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let kl: Vec<f64> = fs::read_to_string(out_dir.join("kl_curve.csv"))
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert!(kl.windows(2).all(|w| w[1] <= w[0]));
    assert!(kl[0] > kl[kl.len() - 1]);
    let lambdas: Vec<f64> = fs::read_to_string(out_dir.join("lambda_curve.csv"))
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(2).unwrap().parse().unwrap())
        .collect();
    assert!(lambdas[0] >= lambdas[1]);

    fs::write(&returns, "1\n").unwrap();
    assert_eq!(run(&["lambda-trace", "--returns", path_str(&returns)]).status.code(), Some(2));
    let out = run(&["lambda-trace", "--synthetic", "kind=normal,n=200,a=0,b=5,seed=1"]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn epsilon_ablation_grid() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "ablate",
        "--study",
        "epsilon",
        "--seeds",
        "2",
        "--out",
        path_str(dir.path()),
        "--override",
        "steps=20",
        "--override",
        "eval.interval=10",
        "--override",
        "env.max_steps=10",
        "--override",
        "batch_transitions=20",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let csv = fs::read_to_string(dir.path().join("epsilon.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), format!("arm,seed,{METRICS_HEADER}"));
    let rows: Vec<Vec<String>> = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    let mut runs: Vec<(String, String)> = rows.iter().map(|r| (r[0].clone(), r[1].clone())).collect();
    runs.dedup();
    assert_eq!(runs.len(), 5 * 2);
    let keys: Vec<(String, u64, u64)> = rows
        .iter()
        .map(|r| (r[0].clone(), r[1].parse().unwrap(), r[2].parse().unwrap()))
        .collect();
    let mut sorted = keys.clone();
    sorted.sort();
    assert_eq!(keys, sorted);
    assert!(rows.iter().filter(|r| r[0] == "eps=inf").all(|r| r[5] == "0"));
    assert!(dir.path().join("epsilon_summary.csv").is_file());
    assert_eq!(run(&["ablate", "--study", "bogus", "--out", path_str(dir.path())]).status.code(), Some(2));
}
