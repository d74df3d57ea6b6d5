//! Calendar features for the shared temporal encoding.

use std::f64::consts::TAU;

use chrono::{Datelike, NaiveDateTime, Timelike};
use geomae_tensor::Tensor;

/// Sin/cos pairs for month, day of month, hour and day of week.
pub const CALENDAR_CHANNELS: usize = 8;

/// Timestamps of the history and the horizon of one sample.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimeStamps {
    pub history: Vec<NaiveDateTime>,
    pub horizon: Vec<NaiveDateTime>,
}

/// Periodic phase of each calendar field, each in `[0, 1)`.
fn phases(ts: &NaiveDateTime) -> [f64; 4] {
    let hour = ts.hour() as f64 + ts.minute() as f64 / 60.0 + ts.second() as f64 / 3600.0;
    [
        ts.month0() as f64 / 12.0,
        ts.day0() as f64 / 31.0,
        hour / 24.0,
        ts.weekday().num_days_from_monday() as f64 / 7.0,
    ]
}

/// `[T, 8]` fixed sin/cos features, channel pairs ordered month, day, hour, weekday.
pub fn calendar_features(ts: &[NaiveDateTime]) -> Tensor {
    assert!(!ts.is_empty(), "calendar features of an empty timestamp list");
    let mut data = Vec::with_capacity(ts.len() * CALENDAR_CHANNELS);
    for t in ts {
        for p in phases(t) {
            let angle = TAU * p;
            data.push(angle.sin());
            data.push(angle.cos());
        }
    }
    Tensor::new(vec![ts.len(), CALENDAR_CHANNELS], data).expect("trig values are finite")
}
