//! Long-format result tables and their CSV round trip.
//!
//! CSV output is UTF-8, LF line endings, floats at 17 significant digits so
//! round trips are exact and identical configs produce byte-identical files.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// One measured value: (trial, time, metric) -> value.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub trial: u64,
    pub t: f64,
    pub metric: String,
    pub value: f64,
}

/// Aggregate over trials at a fixed (metric, t).
#[derive(Debug, Clone, PartialEq)]
pub struct AggRow {
    pub metric: String,
    pub t: f64,
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

/// Per-experiment results: raw rows plus recomputable aggregates.
#[derive(Debug, Clone)]
pub struct ResultTable {
    pub experiment: String,
    pub rows: Vec<Row>,
}

/// 17-significant-digit float formatting shared by every CSV writer.
pub fn fmt_value(v: f64) -> String {
    format!("{:.16e}", v)
}

impl ResultTable {
    pub fn new(experiment: impl Into<String>) -> Self {
        ResultTable {
            experiment: experiment.into(),
            rows: Vec::new(),
        }
    }

    /// Canonical row order: (trial, t, metric). Sorting makes output
    /// independent of scheduling.
    pub fn sort(&mut self) {
        self.rows.sort_by(|a, b| {
            a.trial
                .cmp(&b.trial)
                .then(a.t.total_cmp(&b.t))
                .then(a.metric.cmp(&b.metric))
        });
    }

    /// Values of one metric at one time across trials, trial-ordered.
    pub fn metric_at(&self, metric: &str, t: f64) -> Vec<f64> {
        let mut pairs: Vec<(u64, f64)> = self
            .rows
            .iter()
            .filter(|r| r.metric == metric && r.t == t)
            .map(|r| (r.trial, r.value))
            .collect();
        pairs.sort_by_key(|&(trial, _)| trial);
        pairs.into_iter().map(|(_, v)| v).collect()
    }

    /// All distinct times of one metric, ascending.
    pub fn times_of(&self, metric: &str) -> Vec<f64> {
        let mut ts: Vec<f64> = self
            .rows
            .iter()
            .filter(|r| r.metric == metric)
            .map(|r| r.t)
            .collect();
        ts.sort_by(|a, b| a.total_cmp(b));
        ts.dedup();
        ts
    }

    pub fn trials(&self) -> Vec<u64> {
        let mut ids: Vec<u64> = self.rows.iter().map(|r| r.trial).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    /// Rows of one trial, in table order.
    pub fn trial_rows(&self, trial: u64) -> Vec<&Row> {
        self.rows.iter().filter(|r| r.trial == trial).collect()
    }

    /// Aggregates recomputed exactly from the raw rows: mean and sample
    /// standard deviation per (metric, t), ordered by (metric, t).
    pub fn aggregates(&self) -> Vec<AggRow> {
        let mut keys: Vec<(String, f64)> = self
            .rows
            .iter()
            .map(|r| (r.metric.clone(), r.t))
            .collect();
        keys.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
        keys.dedup_by(|a, b| a.0 == b.0 && a.1 == b.1);
        keys.into_iter()
            .map(|(metric, t)| {
                let vals = self.metric_at(&metric, t);
                let n = vals.len() as f64;
                let mean = vals.iter().sum::<f64>() / n;
                let std = if vals.len() > 1 {
                    (vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
                } else {
                    0.0
                };
                AggRow {
                    metric,
                    t,
                    mean,
                    std,
                    count: vals.len(),
                }
            })
            .collect()
    }

    /// Serializes the raw rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("experiment,trial,t,metric,value\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                self.experiment,
                r.trial,
                fmt_value(r.t),
                r.metric,
                fmt_value(r.value)
            );
        }
        out
    }

    /// Serializes the aggregates.
    pub fn to_agg_csv(&self) -> String {
        let mut out = String::from("experiment,metric,t,mean,std,count\n");
        for a in self.aggregates() {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                self.experiment,
                a.metric,
                fmt_value(a.t),
                fmt_value(a.mean),
                fmt_value(a.std),
                a.count
            );
        }
        out
    }

    /// Parses a raw-rows CSV produced by [`to_csv`].
    pub fn from_csv(text: &str) -> Result<ResultTable> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::spec("empty CSV"))?;
        if header != "experiment,trial,t,metric,value" {
            return Err(Error::spec(format!("unexpected CSV header: {header}")));
        }
        let mut table: Option<ResultTable> = None;
        for (idx, line) in lines.enumerate() {
            if line.is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split(',').collect();
            if parts.len() != 5 {
                return Err(Error::spec(format!("CSV line {}: expected 5 fields", idx + 2)));
            }
            let tab = table.get_or_insert_with(|| ResultTable::new(parts[0]));
            if tab.experiment != parts[0] {
                return Err(Error::spec("CSV mixes experiments"));
            }
            let parse = |s: &str| -> Result<f64> {
                s.parse()
                    .map_err(|_| Error::spec(format!("CSV line {}: bad float {s}", idx + 2)))
            };
            tab.rows.push(Row {
                trial: parts[1]
                    .parse()
                    .map_err(|_| Error::spec(format!("CSV line {}: bad trial", idx + 2)))?,
                t: parse(parts[2])?,
                metric: parts[3].to_string(),
                value: parse(parts[4])?,
            });
        }
        table.ok_or_else(|| Error::spec("CSV has no data rows"))
    }

    pub fn load(path: &Path) -> Result<ResultTable> {
        ResultTable::from_csv(&std::fs::read_to_string(path)?)
    }
}
