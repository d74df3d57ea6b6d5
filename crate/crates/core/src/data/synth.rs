//! Synthetic air-quality-like network.
//!
//! Each feature is a lower-triangular mix of latent signals
//! `g_j(lat, lon, t) = S_j(lat, lon) + A_j sin(2π t/24 + φ_j + κ_j (lon − lon₀)) + W sin(2π t/168 + ω_j)`,
//! where `S_j` is a sum of Gaussian bumps. On top come regional AR(1) noise (shared by
//! nearby stations through the same bump kernels) and i.i.d. noise, then organic gaps:
//! scattered point dropouts and multi-hour station outages.

use std::f64::consts::TAU;

use chrono::{Duration, NaiveDate, NaiveDateTime};
use rand::Rng as _;
use rand_distr::{Distribution, Normal};

use super::schema::{Schema, StationMeta, SCHEMA_VERSION};
use super::{Dataset, StationSeries};
use crate::rng::rng_from;

const LAT_RANGE: (f64, f64) = (39.6, 40.3);
const LON_RANGE: (f64, f64) = (116.0, 116.8);
const N_BUMPS: usize = 4;
const BUMP_WIDTH: f64 = 0.25;
const WEEKLY_AMP: f64 = 0.3;

const FEATURES: [(&str, &str, f64, f64); 8] = [
    ("pm25", "ug/m3", 60.0, 25.0),
    ("pm10", "ug/m3", 90.0, 30.0),
    ("no2", "ug/m3", 45.0, 12.0),
    ("co", "mg/m3", 1.2, 0.4),
    ("temperature", "C", 13.0, 6.0),
    ("humidity", "%", 55.0, 12.0),
    ("wind_speed", "m/s", 2.5, 0.8),
    ("pressure", "hPa", 1012.0, 5.0),
];

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n_nodes: usize,
    pub n_steps: usize,
    pub d_in: usize,
    pub seed: u64,
    pub interval_minutes: u32,
    pub start: NaiveDateTime,
    /// i.i.d. noise std in latent units
    pub noise_std: f64,
    /// regional AR(1) coefficient and stationary std
    pub ar_coef: f64,
    pub ar_std: f64,
    /// per-entry organic dropout probability
    pub point_missing: f64,
    /// per-step probability that a station outage starts
    pub outage_rate: f64,
    pub outage_len: (usize, usize),
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_nodes: 8,
            n_steps: 2000,
            d_in: 3,
            seed: 0,
            interval_minutes: 60,
            start: NaiveDate::from_ymd_opt(2015, 1, 1).unwrap().and_hms_opt(0, 0, 0).unwrap(),
            noise_std: 0.1,
            ar_coef: 0.95,
            ar_std: 0.3,
            point_missing: 0.02,
            outage_rate: 0.002,
            outage_len: (3, 24),
        }
    }
}

/// The noiseless generating field, fixed by the seed.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthField {
    d: usize,
    centers: Vec<(f64, f64)>,
    bump_amp: Vec<[f64; N_BUMPS]>,
    diurnal_amp: Vec<f64>,
    diurnal_phase: Vec<f64>,
    phase_gradient: Vec<f64>,
    weekly_phase: Vec<f64>,
    coupling: Vec<Vec<f64>>,
}

impl SynthField {
    pub fn new(d: usize, seed: u64) -> SynthField {
        let mut rng = rng_from(&[seed, 0xf1e1d]);
        let centers = (0..N_BUMPS)
            .map(|_| (rng.random_range(LAT_RANGE.0..LAT_RANGE.1), rng.random_range(LON_RANGE.0..LON_RANGE.1)))
            .collect();
        let bump_amp = (0..d).map(|_| std::array::from_fn(|_| rng.random_range(-1.0..1.0))).collect();
        let diurnal_amp = (0..d).map(|_| rng.random_range(0.8..1.5)).collect();
        let diurnal_phase = (0..d).map(|_| rng.random_range(0.0..TAU)).collect();
        let phase_gradient = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
        let weekly_phase = (0..d).map(|_| rng.random_range(0.0..TAU)).collect();
        let coupling = (0..d)
            .map(|f| (0..d).map(|j| if j == f { 1.0 } else if j < f { rng.random_range(-0.5..0.5) } else { 0.0 }).collect())
            .collect();
        SynthField { d, centers, bump_amp, diurnal_amp, diurnal_phase, phase_gradient, weekly_phase, coupling }
    }

    /// Gaussian kernel weight of each bump at a location.
    pub fn kernels(&self, lat: f64, lon: f64) -> [f64; N_BUMPS] {
        std::array::from_fn(|k| {
            let (cl, co) = self.centers[k];
            let r2 = (lat - cl).powi(2) + (lon - co).powi(2);
            (-r2 / (2.0 * BUMP_WIDTH * BUMP_WIDTH)).exp()
        })
    }

    fn latent(&self, lat: f64, lon: f64, hours: f64, j: usize) -> f64 {
        let kern = self.kernels(lat, lon);
        let spatial: f64 = kern.iter().zip(&self.bump_amp[j]).map(|(k, a)| k * a).sum();
        let lon0 = (LON_RANGE.0 + LON_RANGE.1) / 2.0;
        let diurnal = self.diurnal_amp[j]
            * (TAU * hours / 24.0 + self.diurnal_phase[j] + self.phase_gradient[j] * (lon - lon0)).sin();
        let weekly = WEEKLY_AMP * (TAU * hours / 168.0 + self.weekly_phase[j]).sin();
        spatial + diurnal + weekly
    }

    fn mix(&self, f: usize, latent: &[f64]) -> f64 {
        self.coupling[f].iter().zip(latent).map(|(c, g)| c * g).sum()
    }

    /// Noiseless value of feature `f` in latent units at `hours` since the start.
    pub fn clean(&self, lat: f64, lon: f64, hours: f64, f: usize) -> f64 {
        let g: Vec<f64> = (0..=f).map(|j| self.latent(lat, lon, hours, j)).collect();
        self.mix(f, &g)
    }

    pub fn d(&self) -> usize {
        self.d
    }
}

/// Offset and scale that map latent units to the reported feature units.
fn feature_meta(f: usize) -> (String, String, f64, f64) {
    match FEATURES.get(f) {
        Some(&(n, u, o, s)) => (n.to_string(), u.to_string(), o, s),
        None => (format!("feature{}", f), "1".to_string(), 0.0, 1.0),
    }
}

/// Deterministic synthetic dataset; feature 0 is the forecast target.
pub fn synth_generate(cfg: &SynthConfig) -> Dataset {
    assert!(cfg.n_nodes >= 1 && cfg.n_steps >= 2 && cfg.d_in >= 1, "synthetic extents must be positive");
    let field = SynthField::new(cfg.d_in, cfg.seed);
    let mut rng = rng_from(&[cfg.seed, 0x5e7]);
    let d = cfg.d_in;
    let stations: Vec<StationMeta> = (0..cfg.n_nodes)
        .map(|i| StationMeta {
            id: format!("s{:02}", i),
            lat: rng.random_range(LAT_RANGE.0..LAT_RANGE.1),
            lon: rng.random_range(LON_RANGE.0..LON_RANGE.1),
        })
        .collect();
    let metas: Vec<_> = (0..d).map(feature_meta).collect();
    let schema = Schema {
        version: SCHEMA_VERSION,
        features: metas.iter().map(|m| m.0.clone()).collect(),
        units: metas.iter().map(|m| m.1.clone()).collect(),
        targets: vec![metas[0].0.clone()],
        interval_minutes: cfg.interval_minutes,
        stations: stations.clone(),
    };
    let step = Duration::minutes(cfg.interval_minutes as i64);
    let timestamps: Vec<NaiveDateTime> = (0..cfg.n_steps).map(|s| cfg.start + step * s as i32).collect();

    // Regional AR(1) noise per (bump, latent signal), started from its stationary law.
    let innov = Normal::new(0.0, cfg.ar_std * (1.0 - cfg.ar_coef * cfg.ar_coef).sqrt()).unwrap();
    let stationary = Normal::new(0.0, cfg.ar_std).unwrap();
    let mut region: Vec<f64> = (0..N_BUMPS * d).map(|_| stationary.sample(&mut rng)).collect();
    let mut regional = Vec::with_capacity(cfg.n_steps);
    for _ in 0..cfg.n_steps {
        regional.push(region.clone());
        for r in region.iter_mut() {
            *r = cfg.ar_coef * *r + innov.sample(&mut rng);
        }
    }

    let iid = Normal::new(0.0, cfg.noise_std).unwrap();
    let hours_per_step = cfg.interval_minutes as f64 / 60.0;
    let series = stations
        .iter()
        .map(|st| {
            let kern = field.kernels(st.lat, st.lon);
            let norm: f64 = kern.iter().map(|k| k * k).sum::<f64>().sqrt().max(1e-12);
            let mut values = vec![0.0; cfg.n_steps * d];
            let mut observed = vec![true; cfg.n_steps * d];
            for s in 0..cfg.n_steps {
                let hours = s as f64 * hours_per_step;
                let latent: Vec<f64> = (0..d)
                    .map(|j| {
                        let noise: f64 = (0..N_BUMPS).map(|k| kern[k] * regional[s][k * d + j]).sum::<f64>() / norm;
                        field.latent(st.lat, st.lon, hours, j) + noise + iid.sample(&mut rng)
                    })
                    .collect();
                for f in 0..d {
                    let (_, _, offset, scale) = metas[f];
                    values[s * d + f] = offset + scale * field.mix(f, &latent);
                }
            }
            let mut s = 0;
            while s < cfg.n_steps {
                if rng.random::<f64>() < cfg.outage_rate {
                    let len = rng.random_range(cfg.outage_len.0..=cfg.outage_len.1);
                    for o in observed.iter_mut().take(((s + len).min(cfg.n_steps)) * d).skip(s * d) {
                        *o = false;
                    }
                    s += len;
                } else {
                    s += 1;
                }
            }
            for o in observed.iter_mut() {
                if rng.random::<f64>() < cfg.point_missing {
                    *o = false;
                }
            }
            for (v, &o) in values.iter_mut().zip(&observed) {
                if !o {
                    *v = 0.0;
                }
            }
            StationSeries { id: st.id.clone(), lat: st.lat, lon: st.lon, values, observed }
        })
        .collect();
    Dataset { schema, timestamps, stations: series }
}

/// Sample autocorrelation at `lag` around the series mean.
pub fn lag_autocorrelation(x: &[f64], lag: usize) -> f64 {
    assert!(lag < x.len(), "lag exceeds series length");
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    let den: f64 = x.iter().map(|v| (v - mean).powi(2)).sum();
    let num: f64 = x.windows(lag + 1).map(|w| (w[0] - mean) * (w[lag] - mean)).sum();
    num / den
}
