//! Ablation variants: fixed training rate, no hint with zero fill, raw 0/1 hint with zero fill.

use std::path::Path;

use super::config::TrainConfig;
use super::eval::evaluate_grid;
use super::train::train;
use crate::data::Splits;
use crate::error::Result;
use crate::metrics::ResultRow;
use crate::preprocess::HintMode;
use crate::masking::RateSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    Full,
    /// training masks always at rate 0.5
    FixedRate,
    /// zero fill, hint channel zeroed
    NoMask,
    /// zero fill, raw 0/1 indicator as hint
    ZeroOne,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Full, Variant::FixedRate, Variant::NoMask, Variant::ZeroOne];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::FixedRate => "fm",
            Variant::NoMask => "nm",
            Variant::ZeroOne => "01",
        }
    }

    pub fn parse(s: &str) -> Option<Variant> {
        Variant::ALL.into_iter().find(|v| v.as_str() == s)
    }

    /// The base config with this variant's switches applied; nothing else changes.
    pub fn apply(self, base: &TrainConfig) -> TrainConfig {
        let mut cfg = base.clone();
        match self {
            Variant::Full => {}
            Variant::FixedRate => cfg.mask_train.rate = RateSpec::Range(0.5, 0.5),
            Variant::NoMask => {
                cfg.preprocess.sigma = 0.0;
                cfg.preprocess.hint = HintMode::Zeros;
            }
            Variant::ZeroOne => {
                cfg.preprocess.sigma = 0.0;
                cfg.preprocess.hint = HintMode::ZeroOne;
            }
        }
        cfg
    }
}

/// Trains each variant under each seed and scores it on the test grid of `base.eval`.
///
/// Rows carry the variant name as scenario and the training seed in the seed column;
/// each training seed is evaluated on one corruption draw shared by all variants.
pub fn ablate(
    base: &TrainConfig,
    splits: &Splits,
    variants: &[Variant],
    seeds: &[u64],
    out_dir: Option<&Path>,
) -> Result<Vec<ResultRow>> {
    let mut rows = Vec::new();
    for &v in variants {
        for &seed in seeds {
            let mut cfg = v.apply(base);
            cfg.seed = seed;
            cfg.eval.seeds = 1;
            let dir = out_dir.map(|d| d.join(format!("{}_seed{}", v.as_str(), seed)));
            let outcome = train(&cfg, splits, dir.as_deref())?;
            for mut r in evaluate_grid(&outcome.model, &splits.stats, &splits.test, &cfg, v.as_str())? {
                r.seed = seed;
                rows.push(r);
            }
        }
    }
    Ok(rows)
}

/// Median over seeds of one metric for a variant at one (pattern, rate).
pub fn median_metric(rows: &[ResultRow], variant: &str, pattern: &str, rate: f64, metric: &str) -> Option<f64> {
    let mut v: Vec<f64> = rows
        .iter()
        .filter(|r| r.scenario == variant && r.pattern == pattern && r.rate == rate && r.metric == metric)
        .map(|r| r.value)
        .collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { (v[n / 2 - 1] + v[n / 2]) / 2.0 })
}

/// Outcome of the expected orderings at one evaluation point.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderingCheck {
    pub description: String,
    pub holds: bool,
}

/// `full ≤ 01 ≤ nm` on median MAE at 90% point missing, and `full ≤ fm` at every
/// evaluated point rate other than 0.5.
pub fn ordering_checks(rows: &[ResultRow]) -> Vec<OrderingCheck> {
    let mut out = Vec::new();
    let med = |v: &str, rate: f64| median_metric(rows, v, "point", rate, "mae");
    if let (Some(f), Some(z), Some(n)) = (med("full", 0.9), med("01", 0.9), med("nm", 0.9)) {
        out.push(OrderingCheck {
            description: format!("point 0.9: full {:.4} <= 01 {:.4} <= nm {:.4}", f, z, n),
            holds: f <= z && z <= n,
        });
    }
    let mut rates: Vec<f64> = rows.iter().filter(|r| r.pattern == "point" && r.rate != 0.5).map(|r| r.rate).collect();
    rates.sort_by(f64::total_cmp);
    rates.dedup();
    for rate in rates {
        if let (Some(f), Some(m)) = (med("full", rate), med("fm", rate)) {
            out.push(OrderingCheck {
                description: format!("point {}: full {:.4} <= fm {:.4}", rate, f, m),
                holds: f <= m,
            });
        }
    }
    out
}
