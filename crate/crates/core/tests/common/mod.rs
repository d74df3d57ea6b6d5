//! Independent scalar-loop reference implementations used as test oracles.
#![allow(dead_code)]

use geomae::objective::{LossConfig, RegressionNorm, TrainBatch};
use geomae::stafn::{Fusion, ModelConfig, ModelInput, ScoreScale, StafnModel};
use geomae_tensor::{Activation, Tape, Tensor};

pub type Mat = Vec<Vec<f64>>;

pub fn mat(t: &Tensor) -> Mat {
    let s = t.shape();
    assert_eq!(s.len(), 2, "expected a matrix, got {:?}", s);
    (0..s[0]).map(|i| (0..s[1]).map(|j| t.get(&[i, j])).collect()).collect()
}

pub fn vector(t: &Tensor) -> Vec<f64> {
    assert_eq!(t.rank(), 1);
    t.data().to_vec()
}

fn param(model: &StafnModel, name: &str) -> Tensor {
    model.params().get(name).unwrap_or_else(|| panic!("missing parameter {}", name)).clone()
}

pub fn act(a: Activation, x: f64) -> f64 {
    match a {
        Activation::Relu => {
            if x > 0.0 {
                x
            } else {
                0.0
            }
        }
        Activation::Gelu => {
            let c = (2.0 / std::f64::consts::PI).sqrt();
            0.5 * x * (1.0 + (c * (x + 0.044715 * x * x * x)).tanh())
        }
    }
}

/// `row · W + b` for one row vector.
pub fn affine(x: &[f64], w: &Mat, b: Option<&[f64]>) -> Vec<f64> {
    let n = w[0].len();
    let mut out = vec![0.0; n];
    for j in 0..n {
        let mut s = 0.0;
        for (i, xi) in x.iter().enumerate() {
            s += xi * w[i][j];
        }
        out[j] = s + b.map_or(0.0, |b| b[j]);
    }
    out
}

pub fn layer_norm(x: &[f64], gamma: &[f64], beta: &[f64]) -> Vec<f64> {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let r = 1.0 / (var + 1e-5).sqrt();
    x.iter().enumerate().map(|(i, v)| (v - mean) * r * gamma[i] + beta[i]).collect()
}

/// Weights of one attention module, read out of the parameter store.
pub struct AttnRef {
    pub wq: Mat,
    pub wk: Mat,
    pub wv: Mat,
    pub up_w: Mat,
    pub up_b: Vec<f64>,
    pub down_w: Mat,
    pub down_b: Vec<f64>,
    pub norms: Option<[Vec<f64>; 4]>,
}

impl AttnRef {
    pub fn load(model: &StafnModel, prefix: &str) -> AttnRef {
        let p = |s: &str| param(model, &format!("{}.{}", prefix, s));
        let norms = model.config().layer_norm.then(|| {
            [
                vector(&p("norm_attn.gamma")),
                vector(&p("norm_attn.beta")),
                vector(&p("norm_mlp.gamma")),
                vector(&p("norm_mlp.beta")),
            ]
        });
        AttnRef {
            wq: mat(&p("wq")),
            wk: mat(&p("wk")),
            wv: mat(&p("wv")),
            up_w: mat(&p("mlp.up.w")),
            up_b: vector(&p("mlp.up.b")),
            down_w: mat(&p("mlp.down.w")),
            down_b: vector(&p("mlp.down.b")),
            norms,
        }
    }
}

/// Scaled dot-product attention, head by head, over explicit loops. Returns `[S_q][d]`.
pub fn attention_loops(q_src: &Mat, kv_src: &Mat, w: &AttnRef, heads: usize, scale: ScoreScale) -> Mat {
    let d = q_src[0].len();
    let dh = d / heads;
    let denom = match scale {
        ScoreScale::PerHead => (dh as f64).sqrt(),
        ScoreScale::Model => (d as f64).sqrt(),
    };
    let q: Mat = q_src.iter().map(|r| affine(r, &w.wq, None)).collect();
    let k: Mat = kv_src.iter().map(|r| affine(r, &w.wk, None)).collect();
    let v: Mat = kv_src.iter().map(|r| affine(r, &w.wv, None)).collect();
    let mut out = vec![vec![0.0; d]; q_src.len()];
    for h in 0..heads {
        let lo = h * dh;
        for e in 0..q.len() {
            let mut scores = vec![0.0; k.len()];
            for (g, s) in scores.iter_mut().enumerate() {
                let mut dot = 0.0;
                for c in lo..lo + dh {
                    dot += q[e][c] * k[g][c];
                }
                *s = dot / denom;
            }
            let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
            let z: f64 = exps.iter().sum();
            for (g, ex) in exps.iter().enumerate() {
                for c in lo..lo + dh {
                    out[e][c] += ex / z * v[g][c];
                }
            }
        }
    }
    out
}

fn mlp(x: &[f64], up_w: &Mat, up_b: &[f64], down_w: &Mat, down_b: &[f64], a: Activation) -> Vec<f64> {
    let h: Vec<f64> = affine(x, up_w, Some(up_b)).into_iter().map(|v| act(a, v)).collect();
    affine(&h, down_w, Some(down_b))
}

fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

/// Full attention module: attention, then MLP with optional residuals and norms.
pub fn module_loops(q_src: &Mat, kv_src: &Mat, w: &AttnRef, cfg: &ModelConfig) -> Mat {
    let a = attention_loops(q_src, kv_src, w, cfg.n_heads, cfg.score_scale);
    q_src
        .iter()
        .zip(&a)
        .map(|(q, a)| {
            let mut z = if cfg.residual { add(q, a) } else { a.clone() };
            if let Some(n) = &w.norms {
                z = layer_norm(&z, &n[0], &n[1]);
            }
            let m = mlp(&z, &w.up_w, &w.up_b, &w.down_w, &w.down_b, cfg.activation);
            let mut out = if cfg.residual { add(&z, &m) } else { m };
            if let Some(n) = &w.norms {
                out = layer_norm(&out, &n[2], &n[3]);
            }
            out
        })
        .collect()
}

/// `[T][N][d]` representation.
pub type Rep = Vec<Vec<Vec<f64>>>;

pub fn rep_from(t: &Tensor) -> Rep {
    let s = t.shape();
    assert_eq!(s.len(), 3);
    (0..s[0])
        .map(|a| (0..s[1]).map(|b| (0..s[2]).map(|c| t.get(&[a, b, c])).collect()).collect())
        .collect()
}

pub fn max_rep_diff(a: &Rep, b: &Rep) -> f64 {
    let mut m: f64 = 0.0;
    for (x, y) in a.iter().zip(b) {
        for (u, v) in x.iter().zip(y) {
            for (p, q) in u.iter().zip(v) {
                m = m.max((p - q).abs());
            }
        }
    }
    m
}

pub fn spatial_loops(h: &Rep, w: &AttnRef, cfg: &ModelConfig) -> Rep {
    h.iter().map(|step| module_loops(step, step, w, cfg)).collect()
}

fn node_seq(h: &Rep, n: usize) -> Mat {
    h.iter().map(|step| step[n].clone()).collect()
}

pub fn temporal_loops(h: &Rep, w: &AttnRef, cfg: &ModelConfig) -> Rep {
    let (t, n) = (h.len(), h[0].len());
    let mut out = vec![vec![Vec::new(); n]; t];
    for node in 0..n {
        let seq = node_seq(h, node);
        for (step, row) in module_loops(&seq, &seq, w, cfg).into_iter().enumerate() {
            out[step][node] = row;
        }
    }
    out
}

pub fn forecast_loops(h_fur: &Rep, h_his: &Rep, w: &AttnRef, cfg: &ModelConfig) -> Rep {
    let (t, n) = (h_fur.len(), h_fur[0].len());
    let mut out = vec![vec![Vec::new(); n]; t];
    for node in 0..n {
        let q = node_seq(h_fur, node);
        let kv = node_seq(h_his, node);
        for (step, row) in module_loops(&q, &kv, w, cfg).into_iter().enumerate() {
            out[step][node] = row;
        }
    }
    out
}

/// Calendar projection plus node embedding at every (step, node).
fn encodings(model: &StafnModel, calendar: &Tensor) -> Rep {
    let wt = mat(&param(model, "time.w"));
    let v = mat(&param(model, "node_embedding"));
    let cal = mat(calendar);
    cal.iter()
        .map(|c| {
            let te = affine(c, &wt, None);
            v.iter().map(|vn| add(&te, vn)).collect()
        })
        .collect()
}

pub fn encode_loops(model: &StafnModel, input: &ModelInput) -> Rep {
    let cfg = model.config();
    let w_in = mat(&param(model, "input.w"));
    let b_in = vector(&param(model, "input.b"));
    let enc = encodings(model, &input.calendar_his);
    let (n, t, d) = (model.n_nodes(), cfg.n_in, cfg.d_in);
    let mut h: Rep = vec![vec![Vec::new(); n]; t];
    for step in 0..t {
        for node in 0..n {
            let mut feat = Vec::with_capacity(2 * d);
            for f in 0..d {
                feat.push(input.x_hat.get(&[node, step, f]));
            }
            for f in 0..d {
                feat.push(input.hint.get(&[node, step, f]));
            }
            h[step][node] = add(&affine(&feat, &w_in, Some(&b_in)), &enc[step][node]);
        }
    }
    for i in 0..cfg.n_blocks {
        let tw = AttnRef::load(model, &format!("enc.{}.temporal", i));
        let sw = AttnRef::load(model, &format!("enc.{}.spatial", i));
        let ta = temporal_loops(&h, &tw, cfg);
        let sa = spatial_loops(&h, &sw, cfg);
        let mut fused: Rep = ta
            .iter()
            .zip(&sa)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| add(x, y)).collect())
            .collect();
        if cfg.fusion == Fusion::SumMlp {
            let p = |s: &str| param(model, &format!("enc.{}.fusion.{}", i, s));
            let (uw, ub, dw, db) =
                (mat(&p("mlp.up.w")), vector(&p("mlp.up.b")), mat(&p("mlp.down.w")), vector(&p("mlp.down.b")));
            let norm = cfg.layer_norm.then(|| (vector(&p("norm.gamma")), vector(&p("norm.beta"))));
            for step in fused.iter_mut() {
                for row in step.iter_mut() {
                    let m = mlp(row, &uw, &ub, &dw, &db, cfg.activation);
                    let mut out = if cfg.residual { add(row, &m) } else { m };
                    if let Some((g, b)) = &norm {
                        out = layer_norm(&out, g, b);
                    }
                    *row = out;
                }
            }
        }
        h = fused;
    }
    h
}

pub fn decode_loops(model: &StafnModel, h_his: &Rep, calendar_fur: &Tensor) -> Rep {
    let cfg = model.config();
    let mut h = encodings(model, calendar_fur);
    for i in 0..cfg.n_blocks {
        let fw = AttnRef::load(model, &format!("dec.{}.forecast", i));
        let sw = AttnRef::load(model, &format!("dec.{}.spatial", i));
        let f = forecast_loops(&h, h_his, &fw, cfg);
        h = spatial_loops(&f, &sw, cfg);
    }
    h
}

/// Prediction `[N_out][N][d_out]` and decoder output.
pub fn forward_loops(model: &StafnModel, input: &ModelInput) -> (Rep, Rep) {
    let h_his = encode_loops(model, input);
    let h_fur = decode_loops(model, &h_his, &input.calendar_fur);
    let w = mat(&param(model, "head.w"));
    let b = vector(&param(model, "head.b"));
    let pred = h_fur.iter().map(|s| s.iter().map(|r| affine(r, &w, Some(&b))).collect()).collect();
    (pred, h_fur)
}

/// Small config with residuals, norms and fusion switched off, one head, `sqrt(d_model)` scaling.
pub fn literal_config(d_model: usize, n_in: usize, n_out: usize) -> ModelConfig {
    ModelConfig {
        n_blocks: 1,
        d_model,
        n_heads: 1,
        mlp_hidden: 2 * d_model,
        residual: false,
        layer_norm: false,
        score_scale: ScoreScale::Model,
        fusion: Fusion::Sum,
        ..ModelConfig::desk(2, 1, n_in, n_out)
    }
}

/// Plain forward: (prediction, decoder output).
pub fn forward(model: &StafnModel, input: &ModelInput) -> (Tensor, Tensor) {
    let tape = Tape::new();
    let f = model.bind(&tape, false).forward(input).unwrap();
    (f.prediction.to_tensor(), f.h_fur.to_tensor())
}

pub fn mse(a: &Tensor, b: &Tensor) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64
}

pub fn regression(pred: &Tensor, y: &Tensor, miss: Option<&Tensor>, norm: RegressionNorm) -> f64 {
    let mut s = 0.0;
    let mut n = 0;
    for i in 0..y.len() {
        if miss.is_some_and(|m| m.data()[i] != 0.0) {
            continue;
        }
        let e = pred.data()[i] - y.data()[i];
        s += match norm {
            RegressionNorm::L1 => e.abs(),
            RegressionNorm::L2 => e * e,
        };
        n += 1;
    }
    s / n as f64
}

/// The objective with each stop-gradient side replaced by its value at the reference
/// parameters; its ordinary derivative at the reference is the expected gradient.
pub struct Surrogate {
    hb0: Tensor,
    hs0: Vec<Tensor>,
}

impl Surrogate {
    pub fn at(model: &StafnModel, b: &TrainBatch) -> Surrogate {
        Surrogate { hb0: forward(model, &b.base).1, hs0: b.variants.iter().map(|v| forward(model, v).1).collect() }
    }

    pub fn value(&self, model: &StafnModel, b: &TrainBatch, cfg: &LossConfig) -> f64 {
        let (pred, hb) = forward(model, &b.base);
        let mut aux = 0.0;
        for (v, h0) in b.variants.iter().zip(&self.hs0) {
            let h = forward(model, v).1;
            aux += mse(&h, &self.hb0) + cfg.phi * mse(&hb, h0);
        }
        regression(&pred, &b.target, b.target_missing.as_ref(), cfg.norm) + cfg.lambda * aux / b.variants.len() as f64
    }
}
