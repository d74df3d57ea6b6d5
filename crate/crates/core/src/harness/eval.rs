//! Scoring a model on corrupted windows, alone or over a scenario grid.

use geomae_tensor::{Tape, Tensor};

use super::batch::{corrupted_input, to_step_major, STREAM_EVAL};
use super::config::TrainConfig;
use crate::data::WindowSet;
use crate::error::{Error, Result};
use crate::masking::{MaskSpec, Pattern};
use crate::metrics::{MetricAccumulator, MetricReport, ResultRow};
use crate::preprocess::{Preprocessor, StandardizationStats};
use crate::rng::rng_from;
use crate::stafn::{ModelInput, StafnModel};

/// Inputs and targets of a fixed evaluation set, already corrupted and batched.
#[derive(Debug, Clone)]
pub struct EvalSet {
    pub batches: Vec<(ModelInput, Tensor, Tensor)>,
}

impl EvalSet {
    /// `key` seeds each window's corruption and fill noise together with its start index.
    pub fn build(
        windows: &WindowSet,
        pre: &Preprocessor,
        corruption: Option<&MaskSpec>,
        key: &[u64],
        batch_size: usize,
    ) -> Result<EvalSet> {
        if windows.is_empty() {
            return Err(Error::EmptyEvaluation);
        }
        let mut batches = Vec::new();
        let idx: Vec<usize> = (0..windows.len()).collect();
        for chunk in idx.chunks(batch_size.max(1)) {
            let mut inputs = Vec::with_capacity(chunk.len());
            let mut targets = Vec::with_capacity(chunk.len());
            let mut missing = Vec::with_capacity(chunk.len());
            for &i in chunk {
                let w = windows.get(i);
                let mut parts = key.to_vec();
                parts.push(w.start as u64);
                let mut rng = rng_from(&parts);
                inputs.push(corrupted_input(pre, &w, corruption, &mut rng)?);
                targets.push(to_step_major(&w.target));
                missing.push(to_step_major(&w.target_missing));
            }
            batches.push((ModelInput::stack(&inputs)?, Tensor::stack(&targets)?, Tensor::stack(&missing)?));
        }
        Ok(EvalSet { batches })
    }

    /// Metrics in raw target units.
    pub fn score(&self, model: &StafnModel, stats: &StandardizationStats, targets: &[usize]) -> Result<MetricReport> {
        let mut acc = MetricAccumulator::default();
        for (input, target, missing) in &self.batches {
            let tape = Tape::new();
            let pred = model.bind(&tape, false).forward(input)?.prediction.to_tensor();
            let raw = |t: &Tensor| -> Tensor {
                let d = targets.len();
                let data = t.data().iter().enumerate().map(|(i, &z)| stats.destandardize_value(targets[i % d], z)).collect();
                Tensor::new(t.shape().to_vec(), data).expect("finite de-standardized values")
            };
            acc.add(&raw(&pred), &raw(target), Some(missing))?;
        }
        acc.report()
    }
}

/// Corruption seed stream for one scenario; shared by every model evaluated under `cfg.seed`.
fn scenario_key(cfg: &TrainConfig, pattern: Pattern, rate: f64, seed: u64) -> Vec<u64> {
    vec![cfg.seed, STREAM_EVAL, pattern as u64, rate.to_bits(), seed]
}

pub fn evaluate_scenario(
    model: &StafnModel,
    stats: &StandardizationStats,
    windows: &WindowSet,
    cfg: &TrainConfig,
    pattern: Pattern,
    rate: f64,
    seed: u64,
) -> Result<MetricReport> {
    let corruption = MaskSpec { block: cfg.mask_train.block, ..MaskSpec::fixed(pattern, rate, 0) };
    let set = EvalSet::build(
        windows,
        &cfg.preprocess,
        Some(&corruption),
        &scenario_key(cfg, pattern, rate, seed),
        cfg.eval.batch_size,
    )?;
    set.score(model, stats, &windows.series().targets)
}

/// Every (pattern, rate, seed) of `cfg.eval`, three metric rows per scenario.
///
/// Scenarios run on scoped threads; each draws from its own stream, so the rows do not
/// depend on the thread count.
pub fn evaluate_grid(
    model: &StafnModel,
    stats: &StandardizationStats,
    windows: &WindowSet,
    cfg: &TrainConfig,
    scenario: &str,
) -> Result<Vec<ResultRow>> {
    let mut cells = Vec::new();
    for &pattern in &cfg.eval.patterns {
        for &rate in &cfg.eval.rates {
            for seed in 0..cfg.eval.seeds as u64 {
                cells.push((pattern, rate, seed));
            }
        }
    }
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get()).min(cells.len()).max(1);
    let per = cells.len().div_ceil(threads);
    let reports: Vec<Result<MetricReport>> = std::thread::scope(|s| {
        let handles: Vec<_> = cells
            .chunks(per.max(1))
            .map(|chunk| {
                s.spawn(move || {
                    chunk
                        .iter()
                        .map(|&(p, r, seed)| evaluate_scenario(model, stats, windows, cfg, p, r, seed))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("evaluation thread panicked")).collect()
    });
    let mut rows = Vec::new();
    for (&(pattern, rate, seed), r) in cells.iter().zip(reports) {
        let r = r?;
        log::info!("{} {} rate {} seed {}: mae {:.4}", scenario, pattern.as_str(), rate, seed, r.mae);
        rows.extend(ResultRow::from_report(scenario, pattern.as_str(), rate, seed, &r));
    }
    Ok(rows)
}

/// Mean and sample std over seeds of one (scenario, pattern, rate, metric) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub scenario: String,
    pub pattern: String,
    pub rate: f64,
    pub metric: String,
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

/// Groups rows by everything but the seed, in first-appearance order.
pub fn summarize(rows: &[ResultRow]) -> Vec<SummaryRow> {
    let mut groups: Vec<(SummaryRow, Vec<f64>)> = Vec::new();
    for r in rows {
        let found = groups.iter_mut().find(|(g, _)| {
            g.scenario == r.scenario && g.pattern == r.pattern && g.rate == r.rate && g.metric == r.metric
        });
        match found {
            Some((_, v)) => v.push(r.value),
            None => groups.push((
                SummaryRow {
                    scenario: r.scenario.clone(),
                    pattern: r.pattern.clone(),
                    rate: r.rate,
                    metric: r.metric.clone(),
                    mean: 0.0,
                    std: 0.0,
                    n: 0,
                },
                vec![r.value],
            )),
        }
    }
    groups
        .into_iter()
        .map(|(mut g, v)| {
            let n = v.len();
            let mean = v.iter().sum::<f64>() / n as f64;
            let var = if n > 1 { v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64 } else { 0.0 };
            g.mean = mean;
            g.std = var.sqrt();
            g.n = n;
            g
        })
        .collect()
}
