use geomae_tensor::Activation;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Denominator of the attention scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ScoreScale {
    /// `sqrt(d_model / n_heads)`
    PerHead,
    /// `sqrt(d_model)` regardless of head count
    Model,
}

/// How the parallel temporal and spatial branches of an encoder block merge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Fusion {
    /// sum, then a shared position-wise MLP
    SumMlp,
    /// plain sum
    Sum,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub n_blocks: usize,
    pub d_model: usize,
    pub n_heads: usize,
    pub d_in: usize,
    pub d_out: usize,
    pub n_in: usize,
    pub n_out: usize,
    pub mlp_hidden: usize,
    pub residual: bool,
    pub layer_norm: bool,
    #[serde(with = "activation_serde")]
    pub activation: Activation,
    pub score_scale: ScoreScale,
    pub fusion: Fusion,
}

impl ModelConfig {
    /// Small model used by tests and synthetic experiments.
    pub fn desk(d_in: usize, d_out: usize, n_in: usize, n_out: usize) -> Self {
        ModelConfig {
            n_blocks: 1,
            d_model: 16,
            n_heads: 2,
            d_in,
            d_out,
            n_in,
            n_out,
            mlp_hidden: 32,
            residual: true,
            layer_norm: true,
            activation: Activation::Gelu,
            score_scale: ScoreScale::PerHead,
            fusion: Fusion::SumMlp,
        }
    }

    /// Full-size model: four encoder and four decoder blocks at width 512.
    pub fn paper(d_in: usize, d_out: usize, n_in: usize, n_out: usize) -> Self {
        ModelConfig {
            n_blocks: 4,
            d_model: 512,
            n_heads: 8,
            mlp_hidden: 1024,
            ..Self::desk(d_in, d_out, n_in, n_out)
        }
    }

    pub fn d_head(&self) -> usize {
        self.d_model / self.n_heads
    }

    pub fn validate(&self) -> Result<()> {
        let extents = [
            ("d_model", self.d_model),
            ("n_heads", self.n_heads),
            ("d_in", self.d_in),
            ("d_out", self.d_out),
            ("n_in", self.n_in),
            ("n_out", self.n_out),
            ("mlp_hidden", self.mlp_hidden),
        ];
        if let Some((name, _)) = extents.iter().find(|(_, v)| *v == 0) {
            return Err(Error::contract(format!("model.{} must be >= 1", name)));
        }
        if self.d_model % self.n_heads != 0 {
            return Err(Error::contract(format!(
                "d_model {} is not divisible by n_heads {}",
                self.d_model, self.n_heads
            )));
        }
        if self.d_model % 2 != 0 {
            return Err(Error::contract(format!(
                "temporal encoding needs an even d_model, got {}",
                self.d_model
            )));
        }
        Ok(())
    }
}

pub(crate) fn activation_name(a: Activation) -> &'static str {
    match a {
        Activation::Gelu => "gelu",
        Activation::Relu => "relu",
    }
}

pub(crate) fn parse_activation(s: &str) -> Option<Activation> {
    match s {
        "gelu" => Some(Activation::Gelu),
        "relu" => Some(Activation::Relu),
        _ => None,
    }
}

mod activation_serde {
    use geomae_tensor::Activation;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(a: &Activation, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(super::activation_name(*a))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Activation, D::Error> {
        let name = String::deserialize(d)?;
        super::parse_activation(&name)
            .ok_or_else(|| serde::de::Error::custom(format!("unknown activation {}", name)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        assert!(ModelConfig::desk(3, 1, 12, 12).validate().is_ok());
        assert!(ModelConfig::paper(12, 1, 12, 12).validate().is_ok());
        let mut c = ModelConfig::desk(3, 1, 12, 12);
        c.n_heads = 3;
        assert!(c.validate().is_err());
        let mut c = ModelConfig::desk(3, 1, 12, 12);
        c.d_model = 7;
        c.n_heads = 1;
        assert!(c.validate().is_err());
        let mut c = ModelConfig::desk(3, 1, 12, 12);
        c.n_out = 0;
        assert!(c.validate().is_err());
    }
}
