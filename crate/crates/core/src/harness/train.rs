//! Epoch loop with frozen validation masks, best-weight retention and early stopping.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use geomae_tensor::{Tensor, TensorError};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::batch::{stack_train, train_sample, STREAM_SHUFFLE, STREAM_VALID};
use super::checkpoint::{Best, Checkpoint, RngCounters};
use super::config::TrainConfig;
use super::eval::EvalSet;
use super::optim::AdamW;
use crate::data::{Splits, WindowSet};
use crate::error::{Error, Result};
use crate::metrics::MetricReport;
use crate::objective::training_objective;
use crate::preprocess::StandardizationStats;
use crate::rng::rng_from;
use crate::stafn::StafnModel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// mean over the epoch's optimizer steps
    pub train_loss: f64,
    pub train_regression: f64,
    pub train_auxiliary: Option<f64>,
    pub step_losses: Vec<f64>,
    pub val: MetricReport,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct History {
    /// validation metrics of the untrained model
    pub initial_val: Option<MetricReport>,
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: Option<usize>,
    pub stopped_early: bool,
}

impl History {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,train_loss,train_regression,train_auxiliary,val_mae,val_rmse,val_smape\n");
        if let Some(v) = &self.initial_val {
            let _ = writeln!(s, "0,,,,{},{},{}", v.mae, v.rmse, v.smape);
        }
        for e in &self.epochs {
            let aux = e.train_auxiliary.map_or(String::new(), |a| a.to_string());
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{}",
                e.epoch, e.train_loss, e.train_regression, aux, e.val.mae, e.val.rmse, e.val.smape
            );
        }
        s
    }

    /// Every optimizer-step loss in order.
    pub fn loss_curve(&self) -> Vec<f64> {
        self.epochs.iter().flat_map(|e| e.step_losses.iter().copied()).collect()
    }
}

pub struct Trainer {
    cfg: TrainConfig,
    model: StafnModel,
    optim: AdamW,
    stats: StandardizationStats,
    train: WindowSet,
    valid: EvalSet,
    epoch: usize,
    best: Option<Best>,
    since_best: usize,
    history: History,
}

impl Trainer {
    pub fn new(cfg: &TrainConfig, splits: &Splits) -> Result<Trainer> {
        cfg.validate()?;
        let n_nodes = splits.train.series().n_nodes;
        let model = StafnModel::new(cfg.model.clone(), n_nodes, cfg.seed)?;
        let optim = AdamW::new(cfg.optim, model.params().values());
        let mut t = Trainer {
            cfg: cfg.clone(),
            model,
            optim,
            stats: splits.stats.clone(),
            train: splits.train.clone(),
            valid: validation_set(cfg, splits)?,
            epoch: 0,
            best: None,
            since_best: 0,
            history: History::default(),
        };
        if t.train.is_empty() {
            return Err(Error::contract("training split holds no complete windows"));
        }
        t.history.initial_val = Some(t.validate()?);
        Ok(t)
    }

    /// Resumes from a snapshot taken on the same splits.
    pub fn from_checkpoint(ckpt: &Checkpoint, splits: &Splits) -> Result<Trainer> {
        if ckpt.stats != splits.stats {
            return Err(Error::Checkpoint("standardization statistics differ from the data's training split".into()));
        }
        Ok(Trainer {
            cfg: ckpt.config.clone(),
            model: ckpt.model()?,
            optim: ckpt.optim.clone(),
            stats: ckpt.stats.clone(),
            train: splits.train.clone(),
            valid: validation_set(&ckpt.config, splits)?,
            epoch: ckpt.epoch,
            best: ckpt.best.clone(),
            since_best: ckpt.since_best,
            history: ckpt.history.clone(),
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn model(&self) -> &StafnModel {
        &self.model
    }

    /// Weights with the lowest validation MAE so far, else the current ones.
    pub fn best_model(&self) -> Result<StafnModel> {
        match &self.best {
            None => Ok(self.model.clone()),
            Some(b) => {
                let mut m = self.model.clone();
                m.params_mut().values_mut().clone_from_slice(&b.params);
                Ok(m)
            }
        }
    }

    pub fn history(&self) -> &History {
        &self.history
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn stats(&self) -> &StandardizationStats {
        &self.stats
    }

    pub fn finished(&self) -> bool {
        self.history.stopped_early || self.epoch >= self.cfg.train.epochs
    }

    /// Validation metrics of the current weights on the frozen masks.
    pub fn validate(&self) -> Result<MetricReport> {
        self.valid.score(&self.model, &self.stats, &self.train.series().targets)
    }

    /// Window indices of one epoch: a seeded shuffle, cut to the step cap.
    fn epoch_order(&self, epoch: usize) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.train.len()).collect();
        order.shuffle(&mut rng_from(&[self.cfg.seed, STREAM_SHUFFLE, epoch as u64]));
        let cap = self.cfg.train.steps_per_epoch;
        if cap > 0 {
            order.truncate(cap * self.cfg.train.batch_size);
        }
        order
    }

    /// Loss of the next optimizer step without taking it.
    pub fn peek_next_loss(&self) -> Result<f64> {
        let order = self.epoch_order(self.epoch);
        let chunk = &order[..order.len().min(self.cfg.train.batch_size)];
        let batch = self.batch(chunk)?;
        Ok(training_objective(&self.model, &batch, &self.cfg.loss)?.loss)
    }

    fn batch(&self, idx: &[usize]) -> Result<crate::objective::TrainBatch> {
        let samples = idx
            .iter()
            .map(|&i| train_sample(&self.cfg, &self.train.get(i), self.epoch))
            .collect::<Result<Vec<_>>>()?;
        stack_train(&samples)
    }

    pub fn run_epoch(&mut self) -> Result<&EpochRecord> {
        let order = self.epoch_order(self.epoch);
        let mut losses = Vec::new();
        let mut regs = Vec::new();
        let mut auxs = Vec::new();
        for (step, chunk) in order.chunks(self.cfg.train.batch_size).enumerate() {
            let batch = self.batch(chunk)?;
            let starts = || chunk.iter().map(|&i| self.train.starts()[i]).collect::<Vec<_>>();
            let out = match training_objective(&self.model, &batch, &self.cfg.loss) {
                Ok(out) => out,
                Err(Error::Tensor(e @ TensorError::NonFinite { .. })) => {
                    return Err(Error::Divergence {
                        epoch: self.epoch,
                        step,
                        detail: self.dump(&format!("forward/backward failed: {}", e), None, &starts()),
                    })
                }
                Err(e) => return Err(e),
            };
            let grads_finite = out.grads.iter().all(|g| g.data().iter().all(|x| x.is_finite()));
            if !out.loss.is_finite() || !grads_finite {
                let what = format!("loss={} regression={} auxiliary={:?}", out.loss, out.regression, out.auxiliary);
                return Err(Error::Divergence {
                    epoch: self.epoch,
                    step,
                    detail: self.dump(&what, Some(&out.grads), &starts()),
                });
            }
            self.optim.step(self.model.params_mut().values_mut(), &out.grads)?;
            losses.push(out.loss);
            regs.push(out.regression);
            if let Some(a) = out.auxiliary {
                auxs.push(a);
            }
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len().max(1) as f64;
        let val = self.validate()?;
        self.epoch += 1;
        if self.best.as_ref().is_none_or(|b| val.mae < b.val_mae) {
            self.best = Some(Best { epoch: self.epoch, val_mae: val.mae, params: self.model.params().values().to_vec() });
            self.history.best_epoch = Some(self.epoch);
            self.since_best = 0;
        } else {
            self.since_best += 1;
        }
        let patience = self.cfg.train.patience;
        if patience > 0 && self.since_best >= patience {
            self.history.stopped_early = true;
        }
        log::info!(
            "epoch {} loss {:.5} val mae {:.4}{}",
            self.epoch,
            mean(&losses),
            val.mae,
            if self.since_best == 0 { " *" } else { "" }
        );
        self.history.epochs.push(EpochRecord {
            epoch: self.epoch,
            train_loss: mean(&losses),
            train_regression: mean(&regs),
            train_auxiliary: (!auxs.is_empty()).then(|| mean(&auxs)),
            step_losses: losses,
            val,
        });
        Ok(self.history.epochs.last().unwrap())
    }

    fn dump(&self, what: &str, grads: Option<&[Tensor]>, starts: &[usize]) -> String {
        let norm = |t: &Tensor| t.data().iter().map(|x| x * x).sum::<f64>().sqrt();
        let mut s = String::new();
        let _ = writeln!(s, "{}", what);
        let _ = writeln!(s, "window_starts={:?}", starts);
        let _ = writeln!(s, "optimizer_steps={}", self.optim.t);
        for (i, (name, p)) in self.model.params().iter().enumerate() {
            match grads {
                Some(g) => {
                    let _ = writeln!(s, "{} |w|={} |g|={}", name, norm(p), norm(&g[i]));
                }
                None => {
                    let _ = writeln!(s, "{} |w|={}", name, norm(p));
                }
            }
        }
        s
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            config: self.cfg.clone(),
            stats: self.stats.clone(),
            n_nodes: self.model.n_nodes(),
            epoch: self.epoch,
            names: self.model.params().names().to_vec(),
            params: self.model.params().values().to_vec(),
            optim: self.optim.clone(),
            best: self.best.clone(),
            since_best: self.since_best,
            history: self.history.clone(),
            rng: RngCounters { seed: self.cfg.seed, next_epoch: self.epoch as u64 },
        }
    }

    /// Runs remaining epochs. With an output directory, writes `latest.ckpt` and
    /// `history.csv` after each epoch and `best.ckpt` whenever validation improves.
    pub fn run(&mut self, out_dir: Option<&Path>) -> Result<()> {
        while !self.finished() {
            match self.run_epoch() {
                Ok(_) => {}
                Err(e @ Error::Divergence { .. }) => {
                    if let (Some(dir), Error::Divergence { detail, .. }) = (out_dir, &e) {
                        std::fs::write(dir.join("divergence.txt"), format!("{}\n{}", e, detail))?;
                    }
                    return Err(e);
                }
                Err(e) => return Err(e),
            }
            if let Some(dir) = out_dir {
                let ckpt = self.checkpoint();
                ckpt.save(&dir.join("latest.ckpt"))?;
                if self.since_best == 0 {
                    ckpt.save(&dir.join("best.ckpt"))?;
                }
                std::fs::write(dir.join("history.csv"), self.history.to_csv())?;
            }
        }
        Ok(())
    }
}

/// Validation inputs corrupted once per run with masks from the training spec.
fn validation_set(cfg: &TrainConfig, splits: &Splits) -> Result<EvalSet> {
    EvalSet::build(
        &splits.validation,
        &cfg.preprocess,
        Some(&cfg.mask_train),
        &[cfg.seed, cfg.mask_train.seed, STREAM_VALID],
        cfg.eval.batch_size,
    )
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub model: StafnModel,
    pub history: History,
    pub checkpoint: Checkpoint,
    pub out_dir: Option<PathBuf>,
}

/// Trains from scratch and returns the best weights.
pub fn train(cfg: &TrainConfig, splits: &Splits, out_dir: Option<&Path>) -> Result<TrainOutcome> {
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
    }
    let mut t = Trainer::new(cfg, splits)?;
    t.run(out_dir)?;
    Ok(TrainOutcome {
        model: t.best_model()?,
        history: t.history.clone(),
        checkpoint: t.checkpoint(),
        out_dir: out_dir.map(Path::to_path_buf),
    })
}
