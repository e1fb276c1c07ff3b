//! Run reports, batch statistics and evolution-curve tables.

use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::decoder::{Metrics, Schedule};
use crate::iwoa::IwoaParams;
use crate::model::JobId;
use crate::woa::WoaParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Woa,
    Iwoa,
}

impl Algorithm {
    pub fn label(self) -> &'static str {
        match self {
            Algorithm::Woa => "WOA",
            Algorithm::Iwoa => "IWOA",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AlgorithmParams {
    Iwoa(IwoaParams),
    Woa(WoaParams),
}

impl AlgorithmParams {
    pub fn max_generations(&self) -> usize {
        match self {
            AlgorithmParams::Woa(p) => p.max_generations,
            AlgorithmParams::Iwoa(p) => p.woa.max_generations,
        }
    }
}

/// Everything one seeded optimizer run produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub algorithm: Algorithm,
    pub instance: String,
    pub seed: u64,
    pub params: AlgorithmParams,
    /// Best-so-far makespan after each generation.
    pub curve: Vec<f64>,
    pub evaluations: usize,
    pub obl_triggers: usize,
    pub best_sequence: Vec<JobId>,
    pub metrics: Metrics,
    pub schedule: Schedule,
    /// Left out unless timing was requested, so that reports stay
    /// reproducible byte for byte.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_clock_ms: Option<u64>,
}

impl RunReport {
    pub fn curve_is_monotone(&self) -> bool {
        self.curve.windows(2).all(|w| w[1] <= w[0])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub optimum: f64,
    pub worst: f64,
    pub average: f64,
}

impl Stat {
    /// Minimum, maximum and mean. Panics on an empty slice.
    pub fn of(values: &[f64]) -> Stat {
        assert!(!values.is_empty(), "statistics of no runs");
        let optimum = values.iter().copied().fold(f64::INFINITY, f64::min);
        let worst = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let average = values.iter().sum::<f64>() / values.len() as f64;
        // Summation rounding must not push the mean outside [min, max].
        Stat {
            optimum,
            worst,
            average: average.clamp(optimum, worst),
        }
    }
}

/// Optimum, worst and average of each metric over a batch of runs of one
/// algorithm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub algorithm: Algorithm,
    pub runs: usize,
    pub cmax: Stat,
    pub twip: Stat,
    pub ts: Stat,
    pub tpb: Stat,
}

impl BatchSummary {
    pub fn from_metrics(algorithm: Algorithm, metrics: &[Metrics]) -> BatchSummary {
        let stat = |f: fn(&Metrics) -> i64| Stat::of(&metrics.iter().map(|m| f(m) as f64).collect::<Vec<_>>());
        BatchSummary {
            algorithm,
            runs: metrics.len(),
            cmax: stat(|m| m.cmax),
            twip: stat(|m| m.twip),
            ts: stat(|m| m.ts),
            tpb: stat(|m| m.tpb),
        }
    }

    pub fn from_reports(algorithm: Algorithm, reports: &[RunReport]) -> BatchSummary {
        let metrics: Vec<Metrics> = reports.iter().map(|r| r.metrics).collect();
        BatchSummary::from_metrics(algorithm, &metrics)
    }

    fn stats(&self) -> [(&'static str, Stat); 4] {
        [
            ("Cmax", self.cmax),
            ("TWIP", self.twip),
            ("TS", self.ts),
            ("TPB", self.tpb),
        ]
    }
}

/// Aligned text table, one row per algorithm and statistic, values to two
/// decimals.
pub fn summary_table(summaries: &[BatchSummary]) -> String {
    let mut rows = vec![vec![
        "Algorithm".to_string(),
        "Statistic".to_string(),
        "Cmax".to_string(),
        "TWIP".to_string(),
        "TS".to_string(),
        "TPB".to_string(),
    ]];
    for s in summaries {
        let stats = s.stats();
        for (name, pick) in [
            ("Optimum", (|x: &Stat| x.optimum) as fn(&Stat) -> f64),
            ("Worst", |x| x.worst),
            ("Average", |x| x.average),
        ] {
            let mut row = vec![s.algorithm.to_string(), name.to_string()];
            row.extend(stats.iter().map(|(_, st)| format!("{:.2}", pick(st))));
            rows.push(row);
        }
    }
    align(&rows)
}

fn align(rows: &[Vec<String>]) -> String {
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|c| rows.iter().filter_map(|r| r.get(c)).map(String::len).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for row in rows {
        let line: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(c, cell)| {
                // Text columns flush left, numbers flush right.
                if c < 2 && cols > 2 {
                    format!("{cell:<w$}", w = widths[c])
                } else {
                    format!("{cell:>w$}", w = widths[c])
                }
            })
            .collect();
        writeln!(out, "{}", line.join("  ").trim_end()).unwrap();
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CurveError {
    #[error("no curves given")]
    Empty,
    #[error("curve {index} has {found} generations, expected {expected}")]
    LengthMismatch {
        index: usize,
        expected: usize,
        found: usize,
    },
}

fn check_lengths(curves: &[&[f64]]) -> Result<usize, CurveError> {
    let expected = curves.first().ok_or(CurveError::Empty)?.len();
    for (index, c) in curves.iter().enumerate() {
        if c.len() != expected {
            return Err(CurveError::LengthMismatch {
                index,
                expected,
                found: c.len(),
            });
        }
    }
    Ok(expected)
}

/// Arithmetic mean of equally long curves, generation by generation.
pub fn mean_curve(curves: &[&[f64]]) -> Result<Vec<f64>, CurveError> {
    let len = check_lengths(curves)?;
    let n = curves.len() as f64;
    Ok((0..len)
        .map(|g| curves.iter().map(|c| c[g]).sum::<f64>() / n)
        .collect())
}

/// Whitespace-separated columns: a 1-based generation number followed by
/// one column per curve, with a header line naming the columns.
pub fn curve_table(columns: &[(String, &[f64])]) -> Result<String, CurveError> {
    let curves: Vec<&[f64]> = columns.iter().map(|(_, c)| *c).collect();
    let len = check_lengths(&curves)?;
    let mut out = String::from("generation");
    for (name, _) in columns {
        write!(out, "\t{name}").unwrap();
    }
    out.push('\n');
    for g in 0..len {
        write!(out, "{}", g + 1).unwrap();
        for c in &curves {
            write!(out, "\t{}", c[g]).unwrap();
        }
        out.push('\n');
    }
    Ok(out)
}
