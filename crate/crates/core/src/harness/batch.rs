//! Turning windows into model-ready batches.

use geomae_tensor::Tensor;

use super::config::TrainConfig;
use crate::data::SampleWindow;
use crate::error::Result;
use crate::masking::{compose, make_augmented, MaskSpec};
use crate::objective::TrainBatch;
use crate::preprocess::Preprocessor;
use crate::rng::{rng_from, Rng};
use crate::stafn::{calendar_features, ModelInput};

pub(crate) const STREAM_TRAIN: u64 = 0x7a11;
pub(crate) const STREAM_AUG: u64 = 0xa46;
pub(crate) const STREAM_SHUFFLE: u64 = 0x5f1;
pub(crate) const STREAM_VALID: u64 = 0x7a1d;
pub(crate) const STREAM_EVAL: u64 = 0xe7a1;

/// `[N, T, d]` to the prediction layout `[T, N, d]`.
pub fn to_step_major(t: &Tensor) -> Tensor {
    t.permute(&[1, 0, 2]).expect("rank-3 window tensor")
}

pub fn model_input(x_hat: Tensor, hint: Tensor, w: &SampleWindow) -> ModelInput {
    ModelInput {
        x_hat,
        hint,
        calendar_his: calendar_features(&w.timestamps.history),
        calendar_fur: calendar_features(&w.timestamps.horizon),
    }
}

/// Base input and `k` augmented inputs for one training window.
///
/// A training mask from `mask_train` is composed onto the organic gaps first; the
/// augmented variants add `mask_aug` on top of that.
pub struct TrainSample {
    pub base: ModelInput,
    pub variants: Vec<ModelInput>,
    pub target: Tensor,
    pub target_missing: Tensor,
}

pub fn train_sample(cfg: &TrainConfig, w: &SampleWindow, epoch: usize) -> Result<TrainSample> {
    let key = [cfg.seed, cfg.mask_train.seed, STREAM_TRAIN, epoch as u64, w.start as u64];
    let mut rng = rng_from(&key);
    let (_, _, extra) = cfg.mask_train.draw(w.reading.m.shape(), &mut rng)?;
    let corrupted = w.reading.with_mask(compose(&w.reading.m, &extra)?)?;
    let (x_hat, hint) = cfg.preprocess.apply(&corrupted, &mut rng)?;
    let variants = if cfg.loss.lambda == 0.0 {
        Vec::new()
    } else {
        let mut arng = rng_from(&[cfg.seed, cfg.mask_aug.seed, STREAM_AUG, epoch as u64, w.start as u64]);
        make_augmented(&corrupted, cfg.loss.k, &cfg.mask_aug, &cfg.preprocess, &mut arng)?
            .variants
            .into_iter()
            .map(|v| model_input(v.x_hat, v.hint, w))
            .collect()
    };
    Ok(TrainSample {
        base: model_input(x_hat, hint, w),
        variants,
        target: to_step_major(&w.target),
        target_missing: to_step_major(&w.target_missing),
    })
}

pub fn stack_train(samples: &[TrainSample]) -> Result<TrainBatch> {
    let base: Vec<ModelInput> = samples.iter().map(|s| s.base.clone()).collect();
    let k = samples.first().map_or(0, |s| s.variants.len());
    let variants = (0..k)
        .map(|i| ModelInput::stack(&samples.iter().map(|s| s.variants[i].clone()).collect::<Vec<_>>()))
        .collect::<Result<Vec<_>>>()?;
    let target = Tensor::stack(&samples.iter().map(|s| s.target.clone()).collect::<Vec<_>>())?;
    let missing = Tensor::stack(&samples.iter().map(|s| s.target_missing.clone()).collect::<Vec<_>>())?;
    Ok(TrainBatch { base: ModelInput::stack(&base)?, variants, target, target_missing: Some(missing) })
}

/// Model input after composing an optional extra mask onto the organic gaps.
///
/// `rng` drives both the extra mask and the imputation noise.
pub fn corrupted_input(
    pre: &Preprocessor,
    w: &SampleWindow,
    corruption: Option<&MaskSpec>,
    rng: &mut Rng,
) -> Result<ModelInput> {
    let reading = match corruption {
        None => w.reading.clone(),
        Some(spec) => {
            let (_, _, extra) = spec.draw(w.reading.m.shape(), rng)?;
            w.reading.with_mask(compose(&w.reading.m, &extra)?)?
        }
    };
    let (x_hat, hint) = pre.apply(&reading, rng)?;
    Ok(model_input(x_hat, hint, w))
}
