use std::sync::Arc;

use chrono::{NaiveDate, NaiveDateTime};

use super::window::{window_starts, PreparedSeries, WindowSet};
use super::Dataset;
use crate::error::{Error, Result};
use crate::preprocess::StandardizationStats;

/// Half-open timestamp interval `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TimeRange {
    pub start: NaiveDateTime,
    pub end: NaiveDateTime,
}

impl TimeRange {
    pub fn contains(&self, t: NaiveDateTime) -> bool {
        self.start <= t && t < self.end
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitPlan {
    pub train: TimeRange,
    pub validation: TimeRange,
    pub test: TimeRange,
}

fn year_start(y: i32) -> NaiveDateTime {
    NaiveDate::from_ymd_opt(y, 1, 1).unwrap().and_hms_opt(0, 0, 0).unwrap()
}

impl SplitPlan {
    /// One calendar year each for training, validation and test.
    pub fn by_years(train: i32, validation: i32, test: i32) -> SplitPlan {
        let r = |y| TimeRange { start: year_start(y), end: year_start(y + 1) };
        SplitPlan { train: r(train), validation: r(validation), test: r(test) }
    }

    /// Leading fractions of the grid for training and validation, the rest for test.
    pub fn fractions(timestamps: &[NaiveDateTime], train: f64, validation: f64) -> Result<SplitPlan> {
        let t = timestamps.len();
        if !(train > 0.0 && validation > 0.0 && train + validation < 1.0) {
            return Err(Error::contract(format!(
                "split fractions {} / {} must be positive and leave room for test",
                train, validation
            )));
        }
        let a = (t as f64 * train).round() as usize;
        let b = (t as f64 * (train + validation)).round() as usize;
        if a == 0 || b <= a || b >= t {
            return Err(Error::contract(format!("{} steps are too few to split", t)));
        }
        let end = *timestamps.last().unwrap() + (timestamps[1] - timestamps[0]);
        Ok(SplitPlan {
            train: TimeRange { start: timestamps[0], end: timestamps[a] },
            validation: TimeRange { start: timestamps[a], end: timestamps[b] },
            test: TimeRange { start: timestamps[b], end },
        })
    }

    pub fn validate(&self) -> Result<()> {
        for (name, r) in [("train", self.train), ("validation", self.validation), ("test", self.test)] {
            if r.start >= r.end {
                return Err(Error::contract(format!("{} range is empty", name)));
            }
        }
        if self.train.end > self.validation.start || self.validation.end > self.test.start {
            return Err(Error::contract("split ranges overlap or are out of chronological order"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowOptions {
    pub n_in: usize,
    pub n_out: usize,
    pub train_stride: usize,
    /// default `n_out`, so evaluation horizons do not overlap
    pub eval_stride: usize,
}

impl WindowOptions {
    pub fn new(n_in: usize, n_out: usize) -> Self {
        WindowOptions { n_in, n_out, train_stride: 1, eval_stride: n_out }
    }
}

/// Window sets per split plus the training statistics used to standardize all of them.
#[derive(Debug, Clone)]
pub struct Splits {
    pub stats: StandardizationStats,
    pub train: WindowSet,
    pub validation: WindowSet,
    pub test: WindowSet,
}

/// Standardizes with statistics from the training range only and cuts windows that lie
/// entirely inside each range.
pub fn split(ds: &Dataset, plan: &SplitPlan, opts: WindowOptions) -> Result<Splits> {
    plan.validate()?;
    ds.validate()?;
    let d = ds.schema.d_in();
    let t = ds.n_steps();
    let in_train: Vec<usize> = (0..t).filter(|&s| plan.train.contains(ds.timestamps[s])).collect();
    let mut values = Vec::with_capacity(in_train.len() * d * ds.n_nodes());
    let mut observed = Vec::with_capacity(values.capacity());
    for st in &ds.stations {
        for &s in &in_train {
            values.extend_from_slice(&st.values[s * d..(s + 1) * d]);
            observed.extend_from_slice(&st.observed[s * d..(s + 1) * d]);
        }
    }
    if !observed.iter().any(|&o| o) {
        return Err(Error::contract("training range holds no observed readings"));
    }
    let stats = StandardizationStats::fit(&values, &observed, d)?;
    let mut x = Vec::with_capacity(ds.n_nodes() * t * d);
    let mut m = Vec::with_capacity(x.capacity());
    for st in &ds.stations {
        for i in 0..t * d {
            if st.observed[i] {
                x.push(stats.standardize_value(i % d, st.values[i]));
                m.push(0.0);
            } else {
                x.push(0.0);
                m.push(1.0);
            }
        }
    }
    let series = Arc::new(PreparedSeries {
        timestamps: ds.timestamps.clone(),
        n_nodes: ds.n_nodes(),
        d_in: d,
        targets: ds.schema.target_indices(),
        x,
        m,
        stats: stats.clone(),
    });
    let cut = |r: &TimeRange, stride: usize| {
        let idx: Vec<usize> = (0..t).filter(|&s| r.contains(ds.timestamps[s])).collect();
        let starts = match idx.first() {
            None => Vec::new(),
            Some(&first) => window_starts(idx.len(), opts.n_in, opts.n_out, stride).into_iter().map(|s| s + first).collect(),
        };
        WindowSet::new(series.clone(), opts.n_in, opts.n_out, starts)
    };
    Ok(Splits {
        stats,
        train: cut(&plan.train, opts.train_stride),
        validation: cut(&plan.validation, opts.eval_stride),
        test: cut(&plan.test, opts.eval_stride),
    })
}
