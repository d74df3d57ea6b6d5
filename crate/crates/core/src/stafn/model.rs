use geomae_tensor::{concat_last, Tape, Tensor, Var};
use rand::Rng as _;
use rand_distr::{Distribution, Normal, Uniform};

use super::config::{Fusion, ModelConfig, ScoreScale};
use super::params::{ParamId, ParamStore};
use super::temporal::CALENDAR_CHANNELS;
use crate::error::{Error, Result};
use crate::rng::{rng_from, Rng};

const LN_EPS: f64 = 1e-5;
const NODE_EMBEDDING_STD: f64 = 0.1;

#[derive(Debug, Clone)]
struct Linear {
    w: ParamId,
    b: Option<ParamId>,
}

#[derive(Debug, Clone)]
struct Norm {
    gamma: ParamId,
    beta: ParamId,
}

#[derive(Debug, Clone)]
struct Mlp {
    up: Linear,
    down: Linear,
}

/// Q/K/V projections plus the position-wise MLP (and optional norms) of one attention module.
#[derive(Debug, Clone)]
pub struct AttentionWeights {
    wq: ParamId,
    wk: ParamId,
    wv: ParamId,
    mlp: Mlp,
    norm_attn: Option<Norm>,
    norm_mlp: Option<Norm>,
}

#[derive(Debug, Clone)]
struct FusionWeights {
    mlp: Mlp,
    norm: Option<Norm>,
}

#[derive(Debug, Clone)]
pub struct EncoderBlock {
    pub temporal: AttentionWeights,
    pub spatial: AttentionWeights,
    fusion: Option<FusionWeights>,
}

#[derive(Debug, Clone)]
pub struct DecoderBlock {
    pub forecast: AttentionWeights,
    pub spatial: AttentionWeights,
}

#[derive(Debug, Clone)]
struct Layout {
    input: Linear,
    time: Linear,
    node_embedding: ParamId,
    encoder: Vec<EncoderBlock>,
    decoder: Vec<DecoderBlock>,
    head: Linear,
}

/// All learnable state of the spatio-temporal attention forecaster.
#[derive(Debug, Clone)]
pub struct StafnModel {
    config: ModelConfig,
    n_nodes: usize,
    params: ParamStore,
    layout: Layout,
}

struct Init<'a> {
    store: &'a mut ParamStore,
    rng: Rng,
}

impl Init<'_> {
    fn glorot(&mut self, name: String, fan_in: usize, fan_out: usize) -> ParamId {
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let dist = Uniform::new_inclusive(-limit, limit).expect("finite limit");
        let rng = &mut self.rng;
        let t = Tensor::from_fn(&[fan_in, fan_out], |_| dist.sample(rng)).expect("finite init");
        self.store.add(name, t)
    }

    fn constant(&mut self, name: String, shape: &[usize], value: f64) -> ParamId {
        self.store.add(name, Tensor::full(shape, value))
    }

    fn linear(&mut self, prefix: &str, fan_in: usize, fan_out: usize, bias: bool) -> Linear {
        let w = self.glorot(format!("{}.w", prefix), fan_in, fan_out);
        let b = bias.then(|| self.constant(format!("{}.b", prefix), &[fan_out], 0.0));
        Linear { w, b }
    }

    fn norm(&mut self, prefix: &str, d: usize) -> Norm {
        Norm {
            gamma: self.constant(format!("{}.gamma", prefix), &[d], 1.0),
            beta: self.constant(format!("{}.beta", prefix), &[d], 0.0),
        }
    }

    fn mlp(&mut self, prefix: &str, d: usize, hidden: usize) -> Mlp {
        Mlp {
            up: self.linear(&format!("{}.up", prefix), d, hidden, true),
            down: self.linear(&format!("{}.down", prefix), hidden, d, true),
        }
    }

    fn attention(&mut self, prefix: &str, cfg: &ModelConfig) -> AttentionWeights {
        let d = cfg.d_model;
        AttentionWeights {
            wq: self.glorot(format!("{}.wq", prefix), d, d),
            wk: self.glorot(format!("{}.wk", prefix), d, d),
            wv: self.glorot(format!("{}.wv", prefix), d, d),
            mlp: self.mlp(&format!("{}.mlp", prefix), d, cfg.mlp_hidden),
            norm_attn: cfg.layer_norm.then(|| self.norm(&format!("{}.norm_attn", prefix), d)),
            norm_mlp: cfg.layer_norm.then(|| self.norm(&format!("{}.norm_mlp", prefix), d)),
        }
    }
}

impl StafnModel {
    /// Freshly initialized model for `n_nodes` sensors.
    pub fn new(config: ModelConfig, n_nodes: usize, seed: u64) -> Result<Self> {
        config.validate()?;
        if n_nodes == 0 {
            return Err(Error::contract("model needs at least one node"));
        }
        let mut params = ParamStore::default();
        let mut init = Init { store: &mut params, rng: rng_from(&[seed, 0x5afe]) };
        let d = config.d_model;
        let input = init.linear("input", 2 * config.d_in, d, true);
        let time = init.linear("time", CALENDAR_CHANNELS, d, false);
        let normal = Normal::new(0.0, NODE_EMBEDDING_STD).expect("valid std");
        let emb_rng = &mut init.rng;
        let emb = Tensor::from_fn(&[n_nodes, d], |_| normal.sample(emb_rng)).expect("finite init");
        let node_embedding = init.store.add("node_embedding".into(), emb);
        let encoder = (0..config.n_blocks)
            .map(|i| EncoderBlock {
                temporal: init.attention(&format!("enc.{}.temporal", i), &config),
                spatial: init.attention(&format!("enc.{}.spatial", i), &config),
                fusion: (config.fusion == Fusion::SumMlp).then(|| FusionWeights {
                    mlp: init.mlp(&format!("enc.{}.fusion.mlp", i), d, config.mlp_hidden),
                    norm: config.layer_norm.then(|| init.norm(&format!("enc.{}.fusion.norm", i), d)),
                }),
            })
            .collect();
        let decoder = (0..config.n_blocks)
            .map(|i| DecoderBlock {
                forecast: init.attention(&format!("dec.{}.forecast", i), &config),
                spatial: init.attention(&format!("dec.{}.spatial", i), &config),
            })
            .collect();
        let head = init.linear("head", d, config.d_out, true);
        let layout = Layout { input, time, node_embedding, encoder, decoder, head };
        Ok(StafnModel { config, n_nodes, params, layout })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    pub fn encoder_block(&self, i: usize) -> &EncoderBlock {
        &self.layout.encoder[i]
    }

    pub fn decoder_block(&self, i: usize) -> &DecoderBlock {
        &self.layout.decoder[i]
    }

    /// Records every weight on `tape`; `trainable` weights receive gradients.
    pub fn bind<'m, 't>(&'m self, tape: &'t Tape, trainable: bool) -> Bound<'m, 't> {
        let vars = self.params.values().iter().map(|v| tape.var(v.clone(), trainable)).collect();
        Bound { model: self, tape, vars }
    }
}

/// Model inputs: readings and hint `[.., N_l, N_in, D_in]`, calendar features `[.., T, 8]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelInput {
    pub x_hat: Tensor,
    pub hint: Tensor,
    pub calendar_his: Tensor,
    pub calendar_fur: Tensor,
}

impl ModelInput {
    /// Stacks single samples into a batch along a new leading axis.
    pub fn stack(items: &[ModelInput]) -> Result<ModelInput> {
        let pick = |f: fn(&ModelInput) -> &Tensor| -> Result<Tensor> {
            let parts: Vec<Tensor> = items.iter().map(|i| f(i).clone()).collect();
            Ok(Tensor::stack(&parts)?)
        };
        Ok(ModelInput {
            x_hat: pick(|i| &i.x_hat)?,
            hint: pick(|i| &i.hint)?,
            calendar_his: pick(|i| &i.calendar_his)?,
            calendar_fur: pick(|i| &i.calendar_fur)?,
        })
    }
}

/// Outputs of a forward pass.
pub struct Forward<'t> {
    /// `[.., N_out, N_l, d_out]`
    pub prediction: Var<'t>,
    /// decoder output `[.., N_out, N_l, d_model]`
    pub h_fur: Var<'t>,
}

/// A model whose weights are recorded on a tape.
pub struct Bound<'m, 't> {
    model: &'m StafnModel,
    tape: &'t Tape,
    vars: Vec<Var<'t>>,
}

impl<'m, 't> Bound<'m, 't> {
    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    pub fn model(&self) -> &'m StafnModel {
        self.model
    }

    /// Weight vars in parameter-store order.
    pub fn param_vars(&self) -> &[Var<'t>] {
        &self.vars
    }

    fn p(&self, id: ParamId) -> Var<'t> {
        self.vars[id.0]
    }

    fn linear(&self, x: Var<'t>, l: &Linear) -> Result<Var<'t>> {
        let y = x.matmul(self.p(l.w))?;
        Ok(match l.b {
            Some(b) => y.add_broadcast(self.p(b))?,
            None => y,
        })
    }

    fn mlp(&self, x: Var<'t>, m: &Mlp) -> Result<Var<'t>> {
        let h = self.linear(x, &m.up)?.activation(self.model.config.activation)?;
        self.linear(h, &m.down)
    }

    fn norm(&self, x: Var<'t>, n: &Option<Norm>) -> Result<Var<'t>> {
        match n {
            Some(n) => Ok(x.layer_norm(self.p(n.gamma), self.p(n.beta), LN_EPS)?),
            None => Ok(x),
        }
    }

    fn split_heads(&self, x: Var<'t>) -> Result<Var<'t>> {
        let h = self.model.config.n_heads;
        if h == 1 {
            return Ok(x);
        }
        let mut shape = x.shape();
        let d = shape.pop().unwrap();
        let r = shape.len();
        shape.push(h);
        shape.push(d / h);
        // [.., S, H, dh] -> [.., H, S, dh]
        Ok(x.reshape(&shape)?.swap_axes(r - 1, r)?)
    }

    fn merge_heads(&self, x: Var<'t>) -> Result<Var<'t>> {
        let h = self.model.config.n_heads;
        if h == 1 {
            return Ok(x);
        }
        let r = x.shape().len();
        let x = x.swap_axes(r - 3, r - 2)?;
        let mut shape = x.shape();
        let dh = shape.pop().unwrap();
        *shape.last_mut().unwrap() *= dh;
        Ok(x.reshape(&shape)?)
    }

    fn score_scale(&self) -> f64 {
        let c = &self.model.config;
        let denom = match c.score_scale {
            ScoreScale::PerHead => c.d_head(),
            ScoreScale::Model => c.d_model,
        };
        1.0 / (denom as f64).sqrt()
    }

    /// Row-softmaxed scores `[.., H, S_q, S_kv]` (head axis omitted for one head).
    pub fn attention_weights(
        &self,
        q_src: Var<'t>,
        kv_src: Var<'t>,
        w: &AttentionWeights,
    ) -> Result<Var<'t>> {
        let q = self.split_heads(q_src.matmul(self.p(w.wq))?)?;
        let k = self.split_heads(kv_src.matmul(self.p(w.wk))?)?;
        let scores = q.matmul(k.transpose_last_two()?)?.scale(self.score_scale())?;
        Ok(scores.softmax_last()?)
    }

    /// Multi-head scaled dot-product attention before the MLP: `[.., S_q, d_model]`.
    pub fn attend(&self, q_src: Var<'t>, kv_src: Var<'t>, w: &AttentionWeights) -> Result<Var<'t>> {
        let alpha = self.attention_weights(q_src, kv_src, w)?;
        let v = self.split_heads(kv_src.matmul(self.p(w.wv))?)?;
        self.merge_heads(alpha.matmul(v)?)
    }

    /// MLP over the attention output, with optional residuals and norms around both.
    fn post(&self, q_src: Var<'t>, a: Var<'t>, w: &AttentionWeights) -> Result<Var<'t>> {
        let residual = self.model.config.residual;
        let z = if residual { q_src.add(a)? } else { a };
        let z = self.norm(z, &w.norm_attn)?;
        let m = self.mlp(z, &w.mlp)?;
        let out = if residual { z.add(m)? } else { m };
        self.norm(out, &w.norm_mlp)
    }

    fn check_rank(h: Var<'t>, op: &str) -> Result<usize> {
        let r = h.shape().len();
        if r < 3 {
            return Err(Error::Dimension(format!("{} expects [.., T, N_l, d_model], got {:?}", op, h.shape())));
        }
        Ok(r)
    }

    /// Self-attention across nodes, independently at each time step. `h`: `[.., T, N_l, d_model]`.
    pub fn spatial_attention(&self, h: Var<'t>, w: &AttentionWeights) -> Result<Var<'t>> {
        Self::check_rank(h, "spatial_attention")?;
        let a = self.attend(h, h, w)?;
        self.post(h, a, w)
    }

    /// Self-attention across time steps, independently per node. `h`: `[.., T, N_l, d_model]`.
    pub fn temporal_attention(&self, h: Var<'t>, w: &AttentionWeights) -> Result<Var<'t>> {
        let r = Self::check_rank(h, "temporal_attention")?;
        let hn = h.swap_axes(r - 3, r - 2)?;
        let a = self.attend(hn, hn, w)?;
        self.post(hn, a, w)?.swap_axes(r - 3, r - 2).map_err(Into::into)
    }

    /// Per-node cross-attention: horizon queries from `h_fur`, keys and values from `h_his`.
    pub fn forecast_attention(
        &self,
        h_fur: Var<'t>,
        h_his: Var<'t>,
        w: &AttentionWeights,
    ) -> Result<Var<'t>> {
        let r = Self::check_rank(h_fur, "forecast_attention")?;
        let (fs, hs) = (h_fur.shape(), h_his.shape());
        if hs.len() != r || fs[..r - 3] != hs[..r - 3] || fs[r - 2..] != hs[r - 2..] {
            return Err(Error::Dimension(format!(
                "forecast_attention: horizon {:?} and history {:?} disagree off the time axis",
                fs, hs
            )));
        }
        let f = h_fur.swap_axes(r - 3, r - 2)?;
        let hh = h_his.swap_axes(r - 3, r - 2)?;
        let a = self.attend(f, hh, w)?;
        self.post(f, a, w)?.swap_axes(r - 3, r - 2).map_err(Into::into)
    }

    /// Calendar features `[.., T, 8]` projected to `[.., T, d_model]`.
    pub fn temporal_encoding(&self, calendar: Var<'t>) -> Result<Var<'t>> {
        if calendar.shape().last() != Some(&CALENDAR_CHANNELS) {
            return Err(Error::Dimension(format!(
                "calendar features need {} channels, got {:?}",
                CALENDAR_CHANNELS,
                calendar.shape()
            )));
        }
        self.linear(calendar, &self.model.layout.time)
    }

    /// Temporal encoding plus node embedding, broadcast to `[.., T, N_l, d_model]`.
    fn encodings(&self, calendar: Var<'t>) -> Result<Var<'t>> {
        let te = self.temporal_encoding(calendar)?;
        let mut shape = te.shape();
        let d = shape.pop().unwrap();
        shape.push(1);
        shape.push(d);
        let te = te.reshape(&shape)?;
        *shape.iter_mut().rev().nth(1).unwrap() = self.model.n_nodes;
        let te = te.broadcast_to(&shape)?;
        let v = self.p(self.model.layout.node_embedding).broadcast_to(&shape)?;
        Ok(te.add(v)?)
    }

    /// `H⁰` from readings and hint `[.., N_l, N_in, D_in]`: projection plus encodings.
    pub fn input_embedding(&self, x_hat: Var<'t>, hint: Var<'t>, calendar_his: Var<'t>) -> Result<Var<'t>> {
        let c = &self.model.config;
        let xs = x_hat.shape();
        let r = xs.len();
        if r < 3 || xs[r - 3] != self.model.n_nodes || xs[r - 1] != c.d_in || hint.shape() != xs {
            return Err(Error::Dimension(format!(
                "readings {:?} / hint {:?} do not match [.., {}, T, {}]",
                xs,
                hint.shape(),
                self.model.n_nodes,
                c.d_in
            )));
        }
        let inp = concat_last(&[x_hat, hint])?.swap_axes(r - 3, r - 2)?;
        let proj = self.linear(inp, &self.model.layout.input)?;
        let enc = self.encodings(calendar_his)?;
        if enc.shape() != proj.shape() {
            return Err(Error::Dimension(format!(
                "history calendar {:?} does not line up with readings {:?}",
                calendar_his.shape(),
                xs
            )));
        }
        Ok(proj.add(enc)?)
    }

    fn encoder_block(&self, h: Var<'t>, blk: &EncoderBlock) -> Result<Var<'t>> {
        let t = self.temporal_attention(h, &blk.temporal)?;
        let s = self.spatial_attention(h, &blk.spatial)?;
        let f = t.add(s)?;
        match &blk.fusion {
            None => Ok(f),
            Some(fw) => {
                let m = self.mlp(f, &fw.mlp)?;
                let out = if self.model.config.residual { f.add(m)? } else { m };
                self.norm(out, &fw.norm)
            }
        }
    }

    /// History representation `[.., N_in, N_l, d_model]` after all encoder blocks.
    pub fn encode_history(&self, x_hat: Var<'t>, hint: Var<'t>, calendar_his: Var<'t>) -> Result<Var<'t>> {
        let mut h = self.input_embedding(x_hat, hint, calendar_his)?;
        for blk in &self.model.layout.encoder {
            h = self.encoder_block(h, blk)?;
        }
        Ok(h)
    }

    /// Horizon representation `[.., N_out, N_l, d_model]`: encodings, then forecast and
    /// spatial attention in series per block.
    pub fn decode_future(&self, h_his: Var<'t>, calendar_fur: Var<'t>) -> Result<Var<'t>> {
        let mut h = self.encodings(calendar_fur)?;
        for blk in &self.model.layout.decoder {
            let f = self.forecast_attention(h, h_his, &blk.forecast)?;
            h = self.spatial_attention(f, &blk.spatial)?;
        }
        Ok(h)
    }

    /// Affine head, `[.., N_out, N_l, d_out]`.
    pub fn predict(&self, h_fur: Var<'t>) -> Result<Var<'t>> {
        self.linear(h_fur, &self.model.layout.head)
    }

    pub fn forward(&self, input: &ModelInput) -> Result<Forward<'t>> {
        let tape = self.tape;
        let x = tape.constant(input.x_hat.clone());
        let hint = tape.constant(input.hint.clone());
        let cal_his = tape.constant(input.calendar_his.clone());
        let cal_fur = tape.constant(input.calendar_fur.clone());
        let h_his = self.encode_history(x, hint, cal_his)?;
        let h_fur = self.decode_future(h_his, cal_fur)?;
        let prediction = self.predict(h_fur)?;
        Ok(Forward { prediction, h_fur })
    }
}

/// Random model input of the right shapes; used by tests and gradient checks.
pub fn random_input(cfg: &ModelConfig, n_nodes: usize, lead: &[usize], rng: &mut Rng) -> ModelInput {
    let mut gen = |tail: &[usize]| {
        let mut shape = lead.to_vec();
        shape.extend_from_slice(tail);
        Tensor::from_fn(&shape, |_| rng.random_range(-1.0..1.0)).unwrap()
    };
    ModelInput {
        x_hat: gen(&[n_nodes, cfg.n_in, cfg.d_in]),
        hint: gen(&[n_nodes, cfg.n_in, cfg.d_in]),
        calendar_his: gen(&[cfg.n_in, CALENDAR_CHANNELS]),
        calendar_fur: gen(&[cfg.n_out, CALENDAR_CHANNELS]),
    }
}
