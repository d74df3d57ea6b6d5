use std::sync::Arc;

use chrono::NaiveDateTime;
use geomae_tensor::Tensor;

use crate::preprocess::{ReadingWindow, StandardizationStats};
use crate::stafn::TimeStamps;

/// Number of sliding windows over `t` steps.
pub fn window_count(t: usize, n_in: usize, n_out: usize, stride: usize) -> usize {
    assert!(n_in >= 1 && n_out >= 1 && stride >= 1, "window extents and stride must be positive");
    if t < n_in + n_out {
        0
    } else {
        (t - n_in - n_out) / stride + 1
    }
}

/// First history index of every window; empty (with a warning) when `t` is too short.
pub fn window_starts(t: usize, n_in: usize, n_out: usize, stride: usize) -> Vec<usize> {
    let n = window_count(t, n_in, n_out, stride);
    if n == 0 {
        log::warn!("{} steps cannot hold a window of {} + {} steps", t, n_in, n_out);
    }
    (0..n).map(|i| i * stride).collect()
}

/// Standardized readings of all stations, node-major `[N, T, D]`, with the organic
/// missing indicator. Missing readings hold `0.0`.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedSeries {
    pub timestamps: Vec<NaiveDateTime>,
    pub n_nodes: usize,
    pub d_in: usize,
    pub targets: Vec<usize>,
    pub x: Vec<f64>,
    pub m: Vec<f64>,
    pub stats: StandardizationStats,
}

impl PreparedSeries {
    pub fn n_steps(&self) -> usize {
        self.timestamps.len()
    }

    fn slice(&self, start: usize, len: usize, features: &[usize]) -> (Tensor, Tensor) {
        let (t, d) = (self.n_steps(), self.d_in);
        let f = features.len();
        let mut x = Vec::with_capacity(self.n_nodes * len * f);
        let mut m = Vec::with_capacity(self.n_nodes * len * f);
        for n in 0..self.n_nodes {
            for s in start..start + len {
                let base = (n * t + s) * d;
                for &j in features {
                    x.push(self.x[base + j]);
                    m.push(self.m[base + j]);
                }
            }
        }
        let shape = vec![self.n_nodes, len, f];
        (Tensor::new(shape.clone(), x).expect("finite series"), Tensor::new(shape, m).expect("binary mask"))
    }
}

/// History readings, horizon targets and their timestamps.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleWindow {
    pub start: usize,
    /// standardized history `[N_l, N_in, D_in]` with its organic mask
    pub reading: ReadingWindow,
    /// standardized targets `[N_l, N_out, d_out]`
    pub target: Tensor,
    /// 1 where the ground truth is missing
    pub target_missing: Tensor,
    pub timestamps: TimeStamps,
}

/// Windows over a shared prepared series; materialized on access.
#[derive(Debug, Clone)]
pub struct WindowSet {
    series: Arc<PreparedSeries>,
    n_in: usize,
    n_out: usize,
    starts: Vec<usize>,
}

impl WindowSet {
    pub fn new(series: Arc<PreparedSeries>, n_in: usize, n_out: usize, starts: Vec<usize>) -> Self {
        assert!(starts.iter().all(|&s| s + n_in + n_out <= series.n_steps()), "window past the series end");
        WindowSet { series, n_in, n_out, starts }
    }

    pub fn len(&self) -> usize {
        self.starts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.starts.is_empty()
    }

    pub fn starts(&self) -> &[usize] {
        &self.starts
    }

    pub fn series(&self) -> &PreparedSeries {
        &self.series
    }

    pub fn n_in(&self) -> usize {
        self.n_in
    }

    pub fn n_out(&self) -> usize {
        self.n_out
    }

    /// First history timestamp and last target timestamp.
    pub fn span(&self, i: usize) -> (NaiveDateTime, NaiveDateTime) {
        let s = self.starts[i];
        (self.series.timestamps[s], self.series.timestamps[s + self.n_in + self.n_out - 1])
    }

    pub fn get(&self, i: usize) -> SampleWindow {
        let s = self.starts[i];
        let p = &self.series;
        let all: Vec<usize> = (0..p.d_in).collect();
        let (x, m) = p.slice(s, self.n_in, &all);
        let (target, target_missing) = p.slice(s + self.n_in, self.n_out, &p.targets);
        SampleWindow {
            start: s,
            reading: ReadingWindow::new(x, m).expect("prepared windows are well-formed"),
            target,
            target_missing,
            timestamps: TimeStamps {
                history: p.timestamps[s..s + self.n_in].to_vec(),
                horizon: p.timestamps[s + self.n_in..s + self.n_in + self.n_out].to_vec(),
            },
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = SampleWindow> + '_ {
        (0..self.len()).map(move |i| self.get(i))
    }
}
