//! Binary training snapshot: a JSON header followed by raw little-endian `f64` blocks.
//!
//! Layout: magic `GMCK`, `u32` format version, `u64` header length, header, then the
//! parameter values, the two optimizer moments and, if present, the best weights, each
//! in parameter order with the shapes listed in the header.

use std::path::Path;

use geomae_tensor::Tensor;
use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use super::optim::AdamW;
use super::train::History;
use crate::error::{Error, Result};
use crate::preprocess::StandardizationStats;
use crate::stafn::StafnModel;

const MAGIC: &[u8; 4] = b"GMCK";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Every random draw in training is keyed by `(seed, stream, epoch, window start)`, so the
/// next epoch index is the complete generator state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngCounters {
    pub seed: u64,
    pub next_epoch: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Best {
    pub epoch: usize,
    pub val_mae: f64,
    pub params: Vec<Tensor>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: TrainConfig,
    pub stats: StandardizationStats,
    pub n_nodes: usize,
    /// completed epochs
    pub epoch: usize,
    pub names: Vec<String>,
    pub params: Vec<Tensor>,
    pub optim: AdamW,
    pub best: Option<Best>,
    pub since_best: usize,
    pub history: History,
    pub rng: RngCounters,
}

#[derive(Serialize, Deserialize)]
struct Header {
    config: String,
    config_hash: String,
    stats: StandardizationStats,
    n_nodes: usize,
    epoch: usize,
    params: Vec<(String, Vec<usize>)>,
    optim_t: u64,
    best: Option<(usize, f64)>,
    since_best: usize,
    history: History,
    rng: RngCounters,
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Checkpoint(msg.into())
}

impl Checkpoint {
    /// Model holding the current weights.
    pub fn model(&self) -> Result<StafnModel> {
        self.model_with(&self.params)
    }

    /// Model holding the best validation weights, or the current ones if none were kept.
    pub fn best_model(&self) -> Result<StafnModel> {
        self.model_with(self.best.as_ref().map_or(&self.params, |b| &b.params))
    }

    fn model_with(&self, values: &[Tensor]) -> Result<StafnModel> {
        let mut model = StafnModel::new(self.config.model.clone(), self.n_nodes, self.config.seed)?;
        if model.params().names() != self.names.as_slice() {
            return Err(bad("parameter names do not match the configured model"));
        }
        for (name, v) in self.names.iter().zip(values) {
            model.params_mut().set(name, v.clone())?;
        }
        Ok(model)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = Header {
            config: self.config.to_text(),
            config_hash: self.config.hash(),
            stats: self.stats.clone(),
            n_nodes: self.n_nodes,
            epoch: self.epoch,
            params: self.names.iter().cloned().zip(self.params.iter().map(|p| p.shape().to_vec())).collect(),
            optim_t: self.optim.t,
            best: self.best.as_ref().map(|b| (b.epoch, b.val_mae)),
            since_best: self.since_best,
            history: self.history.clone(),
            rng: self.rng,
        };
        let json = serde_json::to_vec(&header).map_err(|e| bad(e.to_string()))?;
        let mut out = Vec::with_capacity(16 + json.len() + 8 * 4 * self.optim.m.iter().map(Tensor::len).sum::<usize>());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        let mut blocks = vec![&self.params, &self.optim.m, &self.optim.v];
        if let Some(b) = &self.best {
            blocks.push(&b.params);
        }
        for block in blocks {
            for t in block {
                for x in t.data() {
                    out.extend_from_slice(&x.to_le_bytes());
                }
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Checkpoint> {
        if bytes.len() < 16 || &bytes[..4] != MAGIC {
            return Err(bad("not a checkpoint file"));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != CHECKPOINT_VERSION {
            return Err(bad(format!("unsupported checkpoint version {}", version)));
        }
        let len = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
        let json = bytes.get(16..16 + len).ok_or_else(|| bad("truncated header"))?;
        let h: Header = serde_json::from_slice(json).map_err(|e| bad(e.to_string()))?;
        let config = TrainConfig::parse(&h.config, None)?;
        if config.hash() != h.config_hash {
            return Err(bad("config hash mismatch"));
        }
        let mut cursor = &bytes[16 + len..];
        let mut read_block = || -> Result<Vec<Tensor>> {
            h.params
                .iter()
                .map(|(_, shape)| {
                    let n: usize = shape.iter().product();
                    if cursor.len() < 8 * n {
                        return Err(bad("truncated payload"));
                    }
                    let (head, rest) = cursor.split_at(8 * n);
                    cursor = rest;
                    let data = head.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
                    Ok(Tensor::new(shape.clone(), data)?)
                })
                .collect()
        };
        let params = read_block()?;
        let m = read_block()?;
        let v = read_block()?;
        let best = match h.best {
            Some((epoch, val_mae)) => Some(Best { epoch, val_mae, params: read_block()? }),
            None => None,
        };
        if !cursor.is_empty() {
            return Err(bad(format!("{} trailing bytes", cursor.len())));
        }
        let optim = AdamW { hyper: config.optim, t: h.optim_t, m, v };
        Ok(Checkpoint {
            config,
            stats: h.stats,
            n_nodes: h.n_nodes,
            epoch: h.epoch,
            names: h.params.into_iter().map(|(n, _)| n).collect(),
            params,
            optim,
            best,
            since_best: h.since_best,
            history: h.history,
            rng: h.rng,
        })
    }

    /// Writes through a temporary file so a crash never leaves a torn checkpoint.
    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("ckpt.tmp");
        std::fs::write(&tmp, self.to_bytes()?)?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Checkpoint> {
        Checkpoint::from_bytes(&std::fs::read(path)?)
    }
}
