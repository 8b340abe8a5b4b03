//! Per-evaluation metrics rows and their CSV form.

use std::io::Write;

use crate::{Error, Result};

/// Column order of the metrics CSV.
pub const METRICS_HEADER: &str = "iteration,env_steps,eval_return,lambda,kl_estimate,kl_target,loss,tau,seconds";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainMetricsRow {
    /// Completed training iterations.
    pub iteration: u64,
    /// Cumulative environment steps (`iteration · P`).
    pub env_steps: u64,
    /// Mean undiscounted greedy return over the evaluation episodes.
    pub eval_return: f64,
    pub lambda: f64,
    /// KL estimate at the current `λ`; 0 when `λ` is not being tuned.
    pub kl_estimate: f64,
    /// `ε · mean episode length`; 0 when `λ` is not being tuned.
    pub kl_target: f64,
    /// Batch loss of the latest gradient step; 0 before the first one.
    pub loss: f64,
    pub tau: f64,
    /// Elapsed wall-clock seconds; 0 unless wall-clock recording is on.
    pub seconds: f64,
}

impl TrainMetricsRow {
    /// One CSV line without the trailing newline. Floats use the shortest
    /// representation that parses back to the same value.
    pub fn to_csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.iteration,
            self.env_steps,
            self.eval_return,
            self.lambda,
            self.kl_estimate,
            self.kl_target,
            self.loss,
            self.tau,
            self.seconds
        )
    }

    pub fn from_csv_line(line: &str) -> Result<Self> {
        let fields: Vec<&str> = line.trim().split(',').collect();
        if fields.len() != 9 {
            return Err(Error::Config(format!("metrics row needs 9 fields, got {}: {line:?}", fields.len())));
        }
        let int = |i: usize| -> Result<u64> {
            fields[i]
                .parse()
                .map_err(|e| Error::Config(format!("metrics field {i} {:?}: {e}", fields[i])))
        };
        let float = |i: usize| -> Result<f64> {
            fields[i]
                .parse()
                .map_err(|e| Error::Config(format!("metrics field {i} {:?}: {e}", fields[i])))
        };
        Ok(Self {
            iteration: int(0)?,
            env_steps: int(1)?,
            eval_return: float(2)?,
            lambda: float(3)?,
            kl_estimate: float(4)?,
            kl_target: float(5)?,
            loss: float(6)?,
            tau: float(7)?,
            seconds: float(8)?,
        })
    }
}

/// Header plus one line per row.
pub fn metrics_csv(rows: &[TrainMetricsRow]) -> String {
    let mut out = String::from(METRICS_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&row.to_csv_line());
        out.push('\n');
    }
    out
}

pub fn write_metrics_csv<W: Write>(mut writer: W, rows: &[TrainMetricsRow]) -> Result<()> {
    writer.write_all(metrics_csv(rows).as_bytes())?;
    Ok(())
}

/// Parses text produced by [`metrics_csv`].
pub fn parse_metrics_csv(text: &str) -> Result<Vec<TrainMetricsRow>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(header) if header.trim() == METRICS_HEADER => {}
        other => return Err(Error::Config(format!("unexpected metrics header {other:?}"))),
    }
    lines
        .filter(|l| !l.trim().is_empty())
        .map(TrainMetricsRow::from_csv_line)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_is_exact() {
        let rows = vec![
            TrainMetricsRow {
                iteration: 5,
                env_steps: 50,
                eval_return: -12.345678901234567,
                lambda: 1e-4,
                kl_estimate: 0.0,
                kl_target: 0.1 + 0.2,
                loss: 3.0,
                tau: 0.1 * 0.1f64.powf(0.3),
                seconds: 0.0,
            },
            TrainMetricsRow {
                iteration: 10,
                env_steps: 100,
                eval_return: f64::MIN_POSITIVE,
                lambda: 1e4,
                kl_estimate: 1.0 / 3.0,
                kl_target: 2.5,
                loss: 0.0,
                tau: 0.0,
                seconds: 1.25,
            },
        ];
        let text = metrics_csv(&rows);
        assert!(text.starts_with(METRICS_HEADER));
        assert_eq!(parse_metrics_csv(&text).unwrap(), rows);
        assert_eq!(metrics_csv(&[]), format!("{METRICS_HEADER}\n"));
    }

    #[test]
    fn malformed_rows_are_rejected() {
        assert!(parse_metrics_csv("a,b\n").is_err());
        assert!(parse_metrics_csv(&format!("{METRICS_HEADER}\n1,2,3\n")).is_err());
        assert!(parse_metrics_csv(&format!("{METRICS_HEADER}\n1,2,x,0,0,0,0,0,0\n")).is_err());
    }
}
