//! Regression loss plus the masked-autoencoder auxiliary loss.

use geomae_tensor::{Tape, Tensor, Var};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stafn::{ModelInput, StafnModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RegressionNorm {
    L1,
    L2,
}

impl RegressionNorm {
    pub fn as_str(self) -> &'static str {
        match self {
            RegressionNorm::L1 => "l1",
            RegressionNorm::L2 => "l2",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "l1" => Some(RegressionNorm::L1),
            "l2" => Some(RegressionNorm::L2),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    /// weight of the base-side alignment term
    pub phi: f64,
    /// weight of the auxiliary loss in the total
    pub lambda: f64,
    /// augmented variants per sample
    pub k: usize,
    pub norm: RegressionNorm,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig { phi: 0.25, lambda: 0.75, k: 4, norm: RegressionNorm::L1 }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.phi >= 0.0 && self.phi.is_finite()) {
            return Err(Error::contract(format!("loss.phi must be finite and >= 0, got {}", self.phi)));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::contract(format!("loss.lambda must be finite and >= 0, got {}", self.lambda)));
        }
        if self.k == 0 {
            return Err(Error::contract("loss.k must be >= 1"));
        }
        Ok(())
    }
}

fn weights_from_missing(missing: &Tensor) -> Result<(Tensor, usize)> {
    let count = missing.data().iter().filter(|&&m| m == 0.0).count();
    let w = missing.map(|m| if m == 0.0 { 1.0 } else { 0.0 })?;
    Ok((w, count))
}

/// Mean absolute (L1) or squared (L2) error over entries whose target is present.
///
/// With every target missing the loss is a constant zero.
pub fn regression_loss<'t>(
    y_hat: Var<'t>,
    y: &Tensor,
    target_missing: Option<&Tensor>,
    norm: RegressionNorm,
) -> Result<Var<'t>> {
    let tape = y_hat.tape();
    if y_hat.shape() != y.shape() {
        return Err(Error::Dimension(format!(
            "regression_loss: prediction {:?} vs target {:?}",
            y_hat.shape(),
            y.shape()
        )));
    }
    let e = y_hat.sub(tape.constant(y.clone()))?;
    let e = match norm {
        RegressionNorm::L1 => e.abs()?,
        RegressionNorm::L2 => e.square()?,
    };
    match target_missing {
        None => Ok(e.mean()?),
        Some(m) => {
            if m.shape() != y.shape() {
                return Err(Error::Dimension(format!(
                    "regression_loss: target mask {:?} vs target {:?}",
                    m.shape(),
                    y.shape()
                )));
            }
            let (w, count) = weights_from_missing(m)?;
            let scale = if count == 0 { 0.0 } else { 1.0 / count as f64 };
            Ok(e.mul(tape.constant(w))?.sum()?.scale(scale)?)
        }
    }
}

fn mse<'t>(a: Var<'t>, b: Var<'t>) -> Result<Var<'t>> {
    Ok(a.sub(b)?.square()?.mean()?)
}

/// `(1/k) Σ_i [ MSE(h_i, sg(h_base)) + φ·MSE(h_base, sg(h_i)) ]`.
pub fn mae_aux_loss<'t>(h_base: Var<'t>, variants: &[Var<'t>], phi: f64) -> Result<Var<'t>> {
    if variants.is_empty() {
        return Err(Error::contract("mae_aux_loss needs at least one variant"));
    }
    let base_target = h_base.stop_gradient();
    let mut acc: Option<Var<'t>> = None;
    for (i, &h) in variants.iter().enumerate() {
        if h.shape() != h_base.shape() {
            return Err(Error::contract(format!(
                "variant {} representation {:?} differs from base {:?}",
                i,
                h.shape(),
                h_base.shape()
            )));
        }
        let mut term = mse(h, base_target)?;
        if phi != 0.0 {
            term = term.add(mse(h_base, h.stop_gradient())?.scale(phi)?)?;
        }
        acc = Some(match acc {
            None => term,
            Some(a) => a.add(term)?,
        });
    }
    Ok(acc.unwrap().scale(1.0 / variants.len() as f64)?)
}

pub fn total_loss<'t>(l_reg: Var<'t>, l_mae: Var<'t>, lambda: f64) -> Result<Var<'t>> {
    Ok(l_reg.add(l_mae.scale(lambda)?)?)
}

/// One optimization batch: base inputs, `k` augmented inputs of the same shape, and
/// targets laid out like the prediction, `[.., N_out, N_l, d_out]`.
#[derive(Debug, Clone)]
pub struct TrainBatch {
    pub base: ModelInput,
    pub variants: Vec<ModelInput>,
    pub target: Tensor,
    pub target_missing: Option<Tensor>,
}

#[derive(Debug, Clone)]
pub struct ObjectiveOutput {
    pub loss: f64,
    pub regression: f64,
    /// `None` when the auxiliary branch was skipped (`lambda == 0`)
    pub auxiliary: Option<f64>,
    /// gradient per parameter, in parameter-store order
    pub grads: Vec<Tensor>,
}

/// Forward on the base batch and every variant, total loss, and backward pass.
pub fn training_objective(model: &StafnModel, batch: &TrainBatch, cfg: &LossConfig) -> Result<ObjectiveOutput> {
    cfg.validate()?;
    let tape = Tape::new();
    let bound = model.bind(&tape, true);
    let base = bound.forward(&batch.base)?;
    let l_reg = regression_loss(base.prediction, &batch.target, batch.target_missing.as_ref(), cfg.norm)?;
    let (loss, l_mae) = if cfg.lambda == 0.0 {
        (l_reg, None)
    } else {
        if batch.variants.len() != cfg.k {
            return Err(Error::contract(format!(
                "expected {} augmented variants, got {}",
                cfg.k,
                batch.variants.len()
            )));
        }
        let hs = batch
            .variants
            .iter()
            .map(|v| bound.forward(v).map(|f| f.h_fur))
            .collect::<Result<Vec<_>>>()?;
        let l_mae = mae_aux_loss(base.h_fur, &hs, cfg.phi)?;
        (total_loss(l_reg, l_mae, cfg.lambda)?, Some(l_mae))
    };
    let loss_value = loss.value().item();
    let regression = l_reg.value().item();
    let auxiliary = l_mae.map(|v| v.value().item());
    let mut grads = tape.backward(loss)?;
    let grads = bound.param_vars().iter().map(|&p| grads.take(p)).collect();
    Ok(ObjectiveOutput { loss: loss_value, regression, auxiliary, grads })
}
