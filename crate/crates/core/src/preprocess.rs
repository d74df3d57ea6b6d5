//! Model-input preparation for windows with gaps.
//!
//! Missing readings are filled with small Gaussian noise instead of a
//! sentinel, and the missing indicator is turned into a balanced, per-window
//! standardized hint so its value distribution does not drift with the
//! missing rate.

use geomae_tensor::Tensor;
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;

/// Features whose spread falls below this are treated as constant.
pub const CONSTANT_STD: f64 = 1e-8;
/// Hint variance floor under which a window counts as degenerate.
pub const DEGENERATE_HINT_STD: f64 = 1e-12;
/// Default fill noise scale.
pub const DEFAULT_SIGMA: f64 = 0.2;

/// Per-feature mean and population std, fitted on training data only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizationStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl StandardizationStats {
    /// Fits on row-major `[rows, d]` values, skipping entries not marked observed.
    pub fn fit(values: &[f64], observed: &[bool], d: usize) -> Result<Self> {
        if d == 0 || values.len() % d != 0 || values.len() != observed.len() {
            return Err(Error::Dimension(format!(
                "{} values / {} flags do not tile {} features",
                values.len(),
                observed.len(),
                d
            )));
        }
        let mut count = vec![0usize; d];
        let mut sum = vec![0.0; d];
        for (i, (&v, &o)) in values.iter().zip(observed).enumerate() {
            if o {
                count[i % d] += 1;
                sum[i % d] += v;
            }
        }
        let mean: Vec<f64> = sum
            .iter()
            .zip(&count)
            .map(|(&s, &c)| if c > 0 { s / c as f64 } else { 0.0 })
            .collect();
        let mut sq = vec![0.0; d];
        for (i, (&v, &o)) in values.iter().zip(observed).enumerate() {
            if o {
                let dev = v - mean[i % d];
                sq[i % d] += dev * dev;
            }
        }
        let std = sq
            .iter()
            .zip(&count)
            .map(|(&s, &c)| if c > 0 { (s / c as f64).sqrt() } else { 0.0 })
            .collect();
        Ok(StandardizationStats { mean, std })
    }

    pub fn n_features(&self) -> usize {
        self.mean.len()
    }

    pub fn is_constant(&self, feature: usize) -> bool {
        self.std[feature] < CONSTANT_STD
    }

    pub fn standardize_value(&self, feature: usize, raw: f64) -> f64 {
        if self.is_constant(feature) {
            0.0
        } else {
            (raw - self.mean[feature]) / self.std[feature]
        }
    }

    pub fn destandardize_value(&self, feature: usize, z: f64) -> f64 {
        if self.is_constant(feature) {
            self.mean[feature]
        } else {
            z * self.std[feature] + self.mean[feature]
        }
    }
}

/// `(raw - mean) / std` along the last axis.
pub fn standardize(raw: &Tensor, stats: &StandardizationStats) -> Result<Tensor> {
    let d = *raw.shape().last().unwrap_or(&0);
    if d != stats.n_features() {
        return Err(Error::Dimension(format!(
            "input has {} features, statistics cover {}",
            d,
            stats.n_features()
        )));
    }
    Ok(Tensor::from_fn(raw.shape(), |i| stats.standardize_value(i % d, raw.data()[i]))?)
}

/// Standardized readings `x` and missing indicator `m` (1 = missing), both `[N_l, T, D]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReadingWindow {
    pub x: Tensor,
    pub m: Tensor,
}

impl ReadingWindow {
    pub fn new(x: Tensor, m: Tensor) -> Result<Self> {
        if x.shape() != m.shape() {
            return Err(Error::Dimension(format!(
                "readings {:?} vs mask {:?}",
                x.shape(),
                m.shape()
            )));
        }
        check_binary(&m)?;
        Ok(ReadingWindow { x, m })
    }

    pub fn with_mask(&self, m: Tensor) -> Result<Self> {
        Self::new(self.x.clone(), m)
    }
}

/// Standardized balanced mask fed next to the imputed readings.
#[derive(Debug, Clone, PartialEq)]
pub struct HintTensor {
    pub h: Tensor,
}

pub(crate) fn check_binary(m: &Tensor) -> Result<()> {
    if let Some(v) = m.data().iter().find(|&&v| v != 0.0 && v != 1.0) {
        return Err(Error::contract(format!("mask entry {} is not 0 or 1", v)));
    }
    Ok(())
}

/// Copies observed entries and draws missing ones from `Normal(0, sigma²)`.
pub fn impute_random(w: &ReadingWindow, sigma: f64, rng: &mut Rng) -> Result<Tensor> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::contract(format!("sigma must be finite and >= 0, got {}", sigma)));
    }
    let mut out = w.x.clone();
    for (v, &missing) in out.data_mut().iter_mut().zip(w.m.data()) {
        if missing == 1.0 {
            *v = if sigma == 0.0 {
                0.0
            } else {
                let z: f64 = rng.sample(StandardNormal);
                sigma * z
            };
        }
    }
    Ok(out)
}

/// Balanced ±1 mask standardized over the whole window; zeros when one class is absent.
pub fn build_hint(m: &Tensor) -> Result<HintTensor> {
    check_binary(m)?;
    let n = m.len() as f64;
    let missing = m.data().iter().filter(|&&v| v == 1.0).count() as f64;
    let observed = n - missing;
    // m_sym is +1 on observed, -1 on missing entries
    let mean = (observed - missing) / n;
    let var = (observed * (1.0 - mean).powi(2) + missing * (-1.0 - mean).powi(2)) / n;
    let std = var.sqrt();
    if std < DEGENERATE_HINT_STD {
        return Ok(HintTensor { h: Tensor::zeros(m.shape()) });
    }
    let obs_val = (1.0 - mean) / std;
    let miss_val = (-1.0 - mean) / std;
    let h = m.map(|v| if v == 1.0 { miss_val } else { obs_val })?;
    Ok(HintTensor { h })
}

/// Imputation followed by hint construction.
pub fn preprocess_sample(
    w: &ReadingWindow,
    sigma: f64,
    rng: &mut Rng,
) -> Result<(Tensor, HintTensor)> {
    let x_hat = impute_random(w, sigma, rng)?;
    let hint = build_hint(&w.m)?;
    Ok((x_hat, hint))
}

/// What the second input channel carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum HintMode {
    /// standardized balanced mask
    Standardized,
    /// raw 0/1 missing indicator
    ZeroOne,
    /// channel present but all zeros
    Zeros,
}

impl HintMode {
    pub fn as_str(self) -> &'static str {
        match self {
            HintMode::Standardized => "standardized",
            HintMode::ZeroOne => "zero_one",
            HintMode::Zeros => "none",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "standardized" => Some(HintMode::Standardized),
            "zero_one" | "01" => Some(HintMode::ZeroOne),
            "none" | "zeros" => Some(HintMode::Zeros),
            _ => None,
        }
    }
}

/// Fill scale plus hint construction, switchable for the ablation variants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Preprocessor {
    pub sigma: f64,
    pub hint: HintMode,
}

impl Default for Preprocessor {
    fn default() -> Self {
        Preprocessor { sigma: DEFAULT_SIGMA, hint: HintMode::Standardized }
    }
}

impl Preprocessor {
    pub fn apply(&self, w: &ReadingWindow, rng: &mut Rng) -> Result<(Tensor, Tensor)> {
        let x_hat = impute_random(w, self.sigma, rng)?;
        let hint = match self.hint {
            HintMode::Standardized => build_hint(&w.m)?.h,
            HintMode::ZeroOne => w.m.clone(),
            HintMode::Zeros => Tensor::zeros(w.m.shape()),
        };
        Ok((x_hat, hint))
    }
}
