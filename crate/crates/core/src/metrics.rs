//! Masked MAE, RMSE and SMAPE, plus the result-row format shared by the harness.

use std::fmt;
use std::str::FromStr;

use geomae_tensor::Tensor;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Denominator guard of SMAPE.
pub const SMAPE_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub mae: f64,
    pub rmse: f64,
    /// factor-2 symmetric form, in `[0, 2]`
    pub smape: f64,
    pub count: u64,
}

/// Running sums for scoring many batches as one evaluation.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MetricAccumulator {
    abs: f64,
    sq: f64,
    sym: f64,
    count: u64,
}

impl MetricAccumulator {
    pub fn push(&mut self, y_hat: f64, y: f64) {
        let e = y_hat - y;
        self.abs += e.abs();
        self.sq += e * e;
        self.sym += 2.0 * e.abs() / (y.abs() + y_hat.abs() + SMAPE_EPS);
        self.count += 1;
    }

    /// Adds every entry whose target is present (`target_missing == 0`).
    pub fn add(&mut self, y_hat: &Tensor, y: &Tensor, target_missing: Option<&Tensor>) -> Result<()> {
        if y_hat.shape() != y.shape() {
            return Err(Error::Dimension(format!("metrics: prediction {:?} vs target {:?}", y_hat.shape(), y.shape())));
        }
        if let Some(m) = target_missing {
            if m.shape() != y.shape() {
                return Err(Error::Dimension(format!("metrics: mask {:?} vs target {:?}", m.shape(), y.shape())));
            }
        }
        for i in 0..y.len() {
            if target_missing.is_some_and(|m| m.data()[i] != 0.0) {
                continue;
            }
            self.push(y_hat.data()[i], y.data()[i]);
        }
        Ok(())
    }

    pub fn merge(&mut self, other: &MetricAccumulator) {
        self.abs += other.abs;
        self.sq += other.sq;
        self.sym += other.sym;
        self.count += other.count;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn report(&self) -> Result<MetricReport> {
        if self.count == 0 {
            return Err(Error::EmptyEvaluation);
        }
        let n = self.count as f64;
        Ok(MetricReport {
            mae: self.abs / n,
            rmse: (self.sq / n).sqrt(),
            smape: self.sym / n,
            count: self.count,
        })
    }
}

pub fn evaluate(y_hat: &Tensor, y: &Tensor, target_missing: Option<&Tensor>) -> Result<MetricReport> {
    let mut acc = MetricAccumulator::default();
    acc.add(y_hat, y, target_missing)?;
    acc.report()
}

impl MetricReport {
    /// `key=value` lines.
    pub fn to_key_value(&self) -> String {
        format!("mae={}\nrmse={}\nsmape={}\ncount={}\n", self.mae, self.rmse, self.smape, self.count)
    }

    pub fn from_key_value(text: &str) -> Result<MetricReport> {
        let (mut mae, mut rmse, mut smape, mut count) = (None, None, None, None);
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Schema(format!("metric line without '=': {}", line)))?;
            let bad = |_| Error::Schema(format!("bad metric value: {}", line));
            match k.trim() {
                "mae" => mae = Some(v.trim().parse::<f64>().map_err(bad)?),
                "rmse" => rmse = Some(v.trim().parse::<f64>().map_err(bad)?),
                "smape" => smape = Some(v.trim().parse::<f64>().map_err(bad)?),
                "count" => count = Some(v.trim().parse::<u64>().map_err(|_| Error::Schema(format!("bad count: {}", line)))?),
                other => return Err(Error::Schema(format!("unknown metric key {}", other))),
            }
        }
        match (mae, rmse, smape, count) {
            (Some(mae), Some(rmse), Some(smape), Some(count)) => Ok(MetricReport { mae, rmse, smape, count }),
            _ => Err(Error::Schema("metric report is missing a key".into())),
        }
    }

    pub fn values(&self) -> [(&'static str, f64); 3] {
        [("mae", self.mae), ("rmse", self.rmse), ("smape", self.smape)]
    }
}

/// One line of a result table: `scenario,pattern,rate,seed,metric,value`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub scenario: String,
    pub pattern: String,
    pub rate: f64,
    pub seed: u64,
    pub metric: String,
    pub value: f64,
}

pub const RESULT_HEADER: &str = "scenario,pattern,rate,seed,metric,value";

impl ResultRow {
    /// Three rows (mae, rmse, smape) for one report.
    pub fn from_report(scenario: &str, pattern: &str, rate: f64, seed: u64, r: &MetricReport) -> Vec<ResultRow> {
        r.values()
            .iter()
            .map(|(metric, value)| ResultRow {
                scenario: scenario.to_string(),
                pattern: pattern.to_string(),
                rate,
                seed,
                metric: metric.to_string(),
                value: *value,
            })
            .collect()
    }
}

impl fmt::Display for ResultRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{},{},{},{}", self.scenario, self.pattern, self.rate, self.seed, self.metric, self.value)
    }
}

impl FromStr for ResultRow {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(',').collect();
        let bad = || Error::Schema(format!("malformed result row: {}", s));
        if parts.len() != 6 {
            return Err(bad());
        }
        Ok(ResultRow {
            scenario: parts[0].to_string(),
            pattern: parts[1].to_string(),
            rate: parts[2].parse().map_err(|_| bad())?,
            seed: parts[3].parse().map_err(|_| bad())?,
            metric: parts[4].to_string(),
            value: parts[5].parse().map_err(|_| bad())?,
        })
    }
}

/// Renders rows with a header line.
pub fn write_rows(rows: &[ResultRow]) -> String {
    let mut out = String::from(RESULT_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.to_string());
        out.push('\n');
    }
    out
}

/// Parses a result table, skipping the header and blank lines.
pub fn read_rows(text: &str) -> Result<Vec<ResultRow>> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && *l != RESULT_HEADER)
        .map(str::parse)
        .collect()
}
