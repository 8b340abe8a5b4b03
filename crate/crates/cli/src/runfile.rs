//! Config files, overrides, value grids, and the run manifest.
//!
//! A config file holds `key = value` lines (see `TrainConfig`), plus an
//! optional `seeds = 0,1,2` line. A value written as `a | b | c` makes the
//! file a grid: it expands into the cartesian product of all alternatives,
//! in file order with the last key varying fastest.

use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};
use trust_pcl::trainer::TrainConfig;

use crate::error::{CliError, CliResult};

pub const MANIFEST_FILE: &str = "manifest.txt";

/// One resolved configuration and the seeds to run it with.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub config: TrainConfig,
    pub seeds: Vec<u64>,
}

#[derive(Debug, Clone)]
struct Line {
    key: String,
    alternatives: Vec<String>,
}

fn parse_lines(text: &str) -> CliResult<Vec<Line>> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("line {}: expected key = value, got {line:?}", n + 1)))?;
        out.push(Line {
            key: key.trim().to_string(),
            alternatives: value.split('|').map(|v| v.trim().to_string()).collect(),
        });
    }
    Ok(out)
}

pub fn parse_seeds(key: &str, value: &str) -> CliResult<Vec<u64>> {
    value
        .split(',')
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|e| CliError::Config(format!("{key}: invalid seed {s:?} ({e})")))
        })
        .collect()
}

/// Splits a `key=value` override.
pub fn parse_override(arg: &str) -> CliResult<(String, String)> {
    let (key, value) = arg
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override {arg:?}: expected key=value")))?;
    let key = key.trim();
    if key == "preset" {
        return Err(CliError::Config("preset: cannot be overridden; put it in the config file".into()));
    }
    Ok((key.to_string(), value.trim().to_string()))
}

/// Expands config text plus overrides into one spec per grid point.
/// Overrides replace every alternative of their key. `seeds` from the
/// command line (when non-empty) replace a `seeds` line.
pub fn expand(text: &str, overrides: &[String], cli_seeds: &[u64]) -> CliResult<Vec<RunSpec>> {
    let mut lines = parse_lines(text)?;
    for arg in overrides {
        let (key, value) = parse_override(arg)?;
        lines.push(Line {
            key,
            alternatives: vec![value],
        });
    }
    // Later lines win; keep each key once, at its first position.
    let mut merged: Vec<Line> = Vec::new();
    for line in lines {
        match merged.iter_mut().find(|l| l.key == line.key) {
            Some(existing) => existing.alternatives = line.alternatives,
            None => merged.push(line),
        }
    }

    let mut seeds = None;
    let mut preset = None;
    let mut axes = Vec::new();
    for line in merged {
        match line.key.as_str() {
            "seeds" => {
                let [value] = &line.alternatives[..] else {
                    return Err(CliError::Config("seeds: cannot be a grid".into()));
                };
                seeds = Some(parse_seeds("seeds", value)?);
            }
            "preset" => {
                let [value] = &line.alternatives[..] else {
                    return Err(CliError::Config("preset: cannot be a grid".into()));
                };
                preset = Some(value.clone());
            }
            _ => axes.push(line),
        }
    }
    let base = match preset {
        Some(name) => TrainConfig::preset(&name)?,
        None => TrainConfig::off_policy(),
    };

    let mut points = vec![base];
    for axis in &axes {
        let mut next = Vec::with_capacity(points.len() * axis.alternatives.len());
        for point in &points {
            for value in &axis.alternatives {
                let mut config = point.clone();
                config.set(&axis.key, value)?;
                next.push(config);
            }
        }
        points = next;
    }

    let mut specs = Vec::with_capacity(points.len());
    for config in points {
        config.validate()?;
        let seeds = if !cli_seeds.is_empty() {
            cli_seeds.to_vec()
        } else {
            seeds.clone().unwrap_or_else(|| vec![config.seed])
        };
        specs.push(RunSpec { config, seeds });
    }
    Ok(specs)
}

/// Reads a config file (or starts from the off-policy preset when `path` is
/// `None`) and expands it.
pub fn load(path: Option<&Path>, overrides: &[String], cli_seeds: &[u64]) -> CliResult<Vec<RunSpec>> {
    let text = match path {
        Some(p) => fs::read_to_string(p)
            .map_err(|e| CliError::Config(format!("config file {}: {e}", p.display())))?,
        None => String::new(),
    };
    expand(&text, overrides, cli_seeds)
}

/// SHA-256 of the canonical config text, hex encoded.
pub fn config_hash(config: &TrainConfig) -> String {
    hex::encode(Sha256::digest(config.to_text().as_bytes()))
}

pub fn metrics_file_name(seed: u64) -> String {
    format!("metrics_seed{seed}.csv")
}

pub fn checkpoint_dir_name(seed: u64) -> String {
    format!("checkpoint_seed{seed}")
}

/// Manifest text: every config key materialized, the seed list, and the
/// config hash. Loading it with [`load`] gives back the same spec.
pub fn manifest_text(spec: &RunSpec) -> String {
    let seeds: Vec<String> = spec.seeds.iter().map(u64::to_string).collect();
    let mut out = String::new();
    out.push_str("# trust-pcl run manifest\n");
    out.push_str(&format!("# config_hash = {}\n", config_hash(&spec.config)));
    out.push_str("# outputs: metrics_seed<S>.csv, checkpoint_seed<S>/policy.json, checkpoint_seed<S>/value.json\n");
    out.push_str(&format!("seeds = {}\n", seeds.join(",")));
    out.push_str(&spec.config.to_text());
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use trust_pcl::trainer::Epsilon;

    #[test]
    fn manifest_round_trip() {
        let spec = RunSpec {
            config: TrainConfig {
                epsilon: Epsilon::Infinite,
                lr_policy: 3e-4,
                ..TrainConfig::on_policy()
            },
            seeds: vec![3, 1, 4],
        };
        let back = expand(&manifest_text(&spec), &[], &[]).unwrap();
        assert_eq!(back, vec![spec.clone()]);
        assert_eq!(config_hash(&back[0].config), config_hash(&spec.config));
    }

    #[test]
    fn overrides_and_seeds() {
        let specs = expand("seeds = 1,2\nd = 5\n", &["d=7".into(), "gamma=0.9".into()], &[]).unwrap();
        assert_eq!(specs.len(), 1);
        assert_eq!(specs[0].config.d, 7);
        assert_eq!(specs[0].config.gamma, 0.9);
        assert_eq!(specs[0].seeds, vec![1, 2]);
        let specs = expand("seeds = 1,2\n", &[], &[9]).unwrap();
        assert_eq!(specs[0].seeds, vec![9]);
        let specs = expand("seed = 5\n", &[], &[]).unwrap();
        assert_eq!(specs[0].seeds, vec![5]);
    }

    #[test]
    fn bad_overrides_name_the_key() {
        let err = expand("", &["epsilon=-1".into()], &[]).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("epsilon"));
        let err = expand("", &["nonsense=1".into()], &[]).unwrap_err();
        assert!(err.to_string().contains("nonsense"));
        assert!(expand("", &["novalue".into()], &[]).is_err());
    }

    #[test]
    fn grids_expand_in_order() {
        let specs = expand("epsilon = 0.001 | 0.01\nd = 10 | 50\n", &[], &[]).unwrap();
        let points: Vec<(Epsilon, usize)> = specs.iter().map(|s| (s.config.epsilon, s.config.d)).collect();
        assert_eq!(
            points,
            vec![
                (Epsilon::Finite(0.001), 10),
                (Epsilon::Finite(0.001), 50),
                (Epsilon::Finite(0.01), 10),
                (Epsilon::Finite(0.01), 50),
            ]
        );
        let specs = expand("epsilon = 0.001 | 0.01\n", &["epsilon=0.5".into()], &[]).unwrap();
        assert_eq!(specs.len(), 1);
    }
}
