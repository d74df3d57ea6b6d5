//! Station time series: file formats, windowing, chronological splits and a synthetic generator.

mod graph;
mod io;
mod schema;
mod split;
mod stats;
mod synth;
mod window;

pub use graph::{haversine_km, GraphMeta};
pub use io::{load_dataset, parse_timestamp, time_grid, write_dataset, TIMESTAMP_FORMAT};
pub use schema::{Schema, StationMeta, SCHEMA_VERSION};
pub use split::{split, SplitPlan, Splits, TimeRange, WindowOptions};
pub use stats::{missing_summary, StationMissing};
pub use synth::{lag_autocorrelation, synth_generate, SynthConfig, SynthField};
pub use window::{window_count, window_starts, PreparedSeries, SampleWindow, WindowSet};

use chrono::{Duration, NaiveDateTime};

use crate::error::{Error, Result};

/// One station's readings on the dataset grid, row-major `[T, D_in]`.
///
/// Unobserved entries hold `0.0`.
#[derive(Debug, Clone, PartialEq)]
pub struct StationSeries {
    pub id: String,
    pub lat: f64,
    pub lon: f64,
    pub values: Vec<f64>,
    pub observed: Vec<bool>,
}

impl StationSeries {
    pub fn value(&self, step: usize, feature: usize, d: usize) -> Option<f64> {
        let i = step * d + feature;
        self.observed[i].then(|| self.values[i])
    }
}

/// All stations aligned to one equally spaced timestamp grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub schema: Schema,
    pub timestamps: Vec<NaiveDateTime>,
    pub stations: Vec<StationSeries>,
}

impl Dataset {
    pub fn n_steps(&self) -> usize {
        self.timestamps.len()
    }

    pub fn n_nodes(&self) -> usize {
        self.stations.len()
    }

    pub fn graph(&self) -> GraphMeta {
        GraphMeta::from_stations(&self.schema.stations)
    }

    pub fn validate(&self) -> Result<()> {
        self.schema.validate()?;
        let step = Duration::minutes(self.schema.interval_minutes as i64);
        if self.timestamps.is_empty() {
            return Err(Error::Schema("dataset has no timestamps".into()));
        }
        if let Some(w) = self.timestamps.windows(2).find(|w| w[1] - w[0] != step) {
            return Err(Error::Schema(format!(
                "timestamps {} and {} are not {} minutes apart",
                w[0], w[1], self.schema.interval_minutes
            )));
        }
        if self.stations.len() != self.schema.stations.len() {
            return Err(Error::Schema("station list differs from schema".into()));
        }
        let n = self.timestamps.len() * self.schema.d_in();
        for (s, meta) in self.stations.iter().zip(&self.schema.stations) {
            if s.id != meta.id {
                return Err(Error::Schema(format!("station {} out of schema order", s.id)));
            }
            if s.values.len() != n || s.observed.len() != n {
                return Err(Error::Schema(format!("station {} does not cover the grid", s.id)));
            }
            if s.values.iter().zip(&s.observed).any(|(v, &o)| !v.is_finite() || (!o && *v != 0.0)) {
                return Err(Error::Schema(format!("station {} has invalid placeholder values", s.id)));
            }
        }
        Ok(())
    }
}
