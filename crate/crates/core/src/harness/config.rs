//! Flat `key=value` run configuration.

use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::masking::{MaskSpec, MixWeights, Pattern, PatternChoice, RateSpec};
use crate::objective::{LossConfig, RegressionNorm};
use crate::preprocess::{HintMode, Preprocessor};
use crate::stafn::{activation_name, parse_activation, Fusion, ModelConfig, ScoreScale};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimConfig {
    pub lr: f64,
    pub weight_decay: f64,
    pub betas: (f64, f64),
    pub eps: f64,
}

impl Default for OptimConfig {
    fn default() -> Self {
        OptimConfig { lr: 2e-4, weight_decay: 1e-3, betas: (0.9, 0.999), eps: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainSchedule {
    pub batch_size: usize,
    pub epochs: usize,
    /// epochs without validation improvement before stopping
    pub patience: usize,
    /// cap on optimizer steps per epoch; 0 means a full pass
    pub steps_per_epoch: usize,
    pub stride: usize,
}

impl Default for TrainSchedule {
    fn default() -> Self {
        TrainSchedule { batch_size: 32, epochs: 100, patience: 10, steps_per_epoch: 0, stride: 1 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub rates: Vec<f64>,
    pub patterns: Vec<Pattern>,
    pub seeds: usize,
    pub stride: usize,
    pub batch_size: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            rates: vec![0.25, 0.5, 0.75, 0.9],
            patterns: vec![Pattern::Point, Pattern::Block],
            seeds: 3,
            stride: 0,
            batch_size: 64,
        }
    }
}

/// Where the data comes from and how it is cut.
#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Synthetic { n_nodes: usize, n_steps: usize, d_in: usize },
    File { data: PathBuf, schema: PathBuf },
}

#[derive(Debug, Clone, PartialEq)]
pub enum SplitConfig {
    Fractions { train: f64, validation: f64 },
    Years { train: i32, validation: i32, test: i32 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub seed: u64,
    pub model: ModelConfig,
    pub loss: LossConfig,
    pub preprocess: Preprocessor,
    pub mask_train: MaskSpec,
    pub mask_aug: MaskSpec,
    pub optim: OptimConfig,
    pub train: TrainSchedule,
    pub eval: EvalConfig,
    pub data: DataSource,
    pub split: SplitConfig,
}

impl TrainConfig {
    /// Small network on the synthetic dataset.
    pub fn desk() -> Self {
        TrainConfig {
            seed: 0,
            model: ModelConfig::desk(3, 1, 12, 12),
            loss: LossConfig { k: 2, ..LossConfig::default() },
            preprocess: Preprocessor::default(),
            mask_train: MaskSpec::mixed_range(0.25, 0.9, 0),
            mask_aug: MaskSpec::mixed_range(0.1, 0.5, 1),
            optim: OptimConfig { lr: 2e-3, ..OptimConfig::default() },
            train: TrainSchedule { steps_per_epoch: 20, ..TrainSchedule::default() },
            eval: EvalConfig::default(),
            data: DataSource::Synthetic { n_nodes: 8, n_steps: 2000, d_in: 3 },
            split: SplitConfig::Fractions { train: 0.7, validation: 0.1 },
        }
    }

    /// Full-size settings for the 35-station, 12-feature air-quality layout.
    pub fn paper() -> Self {
        TrainConfig {
            model: ModelConfig::paper(12, 1, 12, 12),
            loss: LossConfig::default(),
            optim: OptimConfig::default(),
            train: TrainSchedule::default(),
            data: DataSource::Synthetic { n_nodes: 35, n_steps: 26_304, d_in: 12 },
            split: SplitConfig::Years { train: 2015, validation: 2016, test: 2017 },
            ..Self::desk()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate().map_err(as_config)?;
        self.loss.validate().map_err(as_config)?;
        self.mask_train.validate().map_err(as_config)?;
        self.mask_aug.validate().map_err(as_config)?;
        if !(self.preprocess.sigma >= 0.0 && self.preprocess.sigma.is_finite()) {
            return Err(Error::Config("preprocess.sigma must be >= 0".into()));
        }
        let o = &self.optim;
        if !(o.lr > 0.0 && o.lr.is_finite()) {
            return Err(Error::Config("optim.lr must be > 0".into()));
        }
        if !(o.weight_decay >= 0.0) || !(0.0..1.0).contains(&o.betas.0) || !(0.0..1.0).contains(&o.betas.1) || !(o.eps > 0.0) {
            return Err(Error::Config("optim.weight_decay >= 0, betas in [0, 1), eps > 0".into()));
        }
        let t = &self.train;
        if t.epochs == 0 || t.batch_size == 0 || t.stride == 0 {
            return Err(Error::Config("train.epochs, train.batch_size and train.stride must be >= 1".into()));
        }
        if self.eval.seeds == 0 || self.eval.batch_size == 0 || self.eval.rates.iter().any(|r| !(0.0..=1.0).contains(r)) {
            return Err(Error::Config("eval.seeds >= 1, eval.batch_size >= 1, eval.rates in [0, 1]".into()));
        }
        if let DataSource::Synthetic { n_nodes, n_steps, d_in } = self.data {
            if n_nodes == 0 || n_steps == 0 || d_in == 0 {
                return Err(Error::Config("synth extents must be >= 1".into()));
            }
            if d_in != self.model.d_in || self.model.d_out != 1 {
                return Err(Error::Config(format!(
                    "synthetic data has {} features and one target; model expects {} and {}",
                    d_in, self.model.d_in, self.model.d_out
                )));
            }
        }
        Ok(())
    }

    pub fn eval_stride(&self) -> usize {
        if self.eval.stride == 0 {
            self.model.n_out
        } else {
            self.eval.stride
        }
    }

    /// All keys in a fixed order.
    pub fn entries(&self) -> Vec<(String, String)> {
        let mut e: Vec<(String, String)> = Vec::new();
        let mut put = |k: &str, v: String| e.push((k.to_string(), v));
        let m = &self.model;
        put("seed", self.seed.to_string());
        put("model.n_blocks", m.n_blocks.to_string());
        put("model.d_model", m.d_model.to_string());
        put("model.n_heads", m.n_heads.to_string());
        put("model.d_in", m.d_in.to_string());
        put("model.d_out", m.d_out.to_string());
        put("model.n_in", m.n_in.to_string());
        put("model.n_out", m.n_out.to_string());
        put("model.mlp_hidden", m.mlp_hidden.to_string());
        put("model.residual", m.residual.to_string());
        put("model.layer_norm", m.layer_norm.to_string());
        put("model.activation", activation_name(m.activation).to_string());
        put("model.score_scale", score_scale_name(m.score_scale).to_string());
        put("model.fusion", fusion_name(m.fusion).to_string());
        put("loss.phi", self.loss.phi.to_string());
        put("loss.lambda", self.loss.lambda.to_string());
        put("loss.k", self.loss.k.to_string());
        put("loss.norm", self.loss.norm.as_str().to_string());
        put("preprocess.sigma", self.preprocess.sigma.to_string());
        put("preprocess.hint", self.preprocess.hint.as_str().to_string());
        for (prefix, spec) in [("mask.train", &self.mask_train), ("mask.aug", &self.mask_aug)] {
            for (k, v) in mask_entries(spec) {
                put(&format!("{}.{}", prefix, k), v);
            }
        }
        let o = &self.optim;
        put("optim.lr", o.lr.to_string());
        put("optim.weight_decay", o.weight_decay.to_string());
        put("optim.beta1", o.betas.0.to_string());
        put("optim.beta2", o.betas.1.to_string());
        put("optim.eps", o.eps.to_string());
        let t = &self.train;
        put("train.batch_size", t.batch_size.to_string());
        put("train.epochs", t.epochs.to_string());
        put("train.patience", t.patience.to_string());
        put("train.steps_per_epoch", t.steps_per_epoch.to_string());
        put("train.stride", t.stride.to_string());
        let ev = &self.eval;
        put("eval.rates", join(&ev.rates));
        put("eval.patterns", ev.patterns.iter().map(|p| p.as_str()).collect::<Vec<_>>().join(","));
        put("eval.seeds", ev.seeds.to_string());
        put("eval.stride", ev.stride.to_string());
        put("eval.batch_size", ev.batch_size.to_string());
        match &self.data {
            DataSource::Synthetic { n_nodes, n_steps, d_in } => {
                put("data.source", "synthetic".into());
                put("synth.n_nodes", n_nodes.to_string());
                put("synth.n_steps", n_steps.to_string());
                put("synth.d_in", d_in.to_string());
            }
            DataSource::File { data, schema } => {
                put("data.source", "file".into());
                put("data.path", data.display().to_string());
                put("data.schema", schema.display().to_string());
            }
        }
        match &self.split {
            SplitConfig::Fractions { train, validation } => {
                put("split.mode", "fractions".into());
                put("split.train", train.to_string());
                put("split.validation", validation.to_string());
            }
            SplitConfig::Years { train, validation, test } => {
                put("split.mode", "years".into());
                put("split.years", format!("{},{},{}", train, validation, test));
            }
        }
        e
    }

    pub fn to_text(&self) -> String {
        self.entries().iter().map(|(k, v)| format!("{}={}\n", k, v)).collect()
    }

    /// SHA-256 of the canonical text form.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_text().as_bytes());
        digest.iter().map(|b| format!("{:02x}", b)).collect()
    }

    /// Applies one `key=value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        let bad = || Error::Config(format!("invalid value {:?} for {}", v, key));
        let m = &mut self.model;
        match key {
            "seed" => self.seed = num(v, key)?,
            "model.n_blocks" => m.n_blocks = num(v, key)?,
            "model.d_model" => m.d_model = num(v, key)?,
            "model.n_heads" => m.n_heads = num(v, key)?,
            "model.d_in" => m.d_in = num(v, key)?,
            "model.d_out" => m.d_out = num(v, key)?,
            "model.n_in" => m.n_in = num(v, key)?,
            "model.n_out" => m.n_out = num(v, key)?,
            "model.mlp_hidden" => m.mlp_hidden = num(v, key)?,
            "model.residual" => m.residual = num(v, key)?,
            "model.layer_norm" => m.layer_norm = num(v, key)?,
            "model.activation" => m.activation = parse_activation(v).ok_or_else(bad)?,
            "model.score_scale" => m.score_scale = parse_score_scale(v).ok_or_else(bad)?,
            "model.fusion" => m.fusion = parse_fusion(v).ok_or_else(bad)?,
            "loss.phi" => self.loss.phi = num(v, key)?,
            "loss.lambda" => self.loss.lambda = num(v, key)?,
            "loss.k" => self.loss.k = num(v, key)?,
            "loss.norm" => self.loss.norm = RegressionNorm::parse(v).ok_or_else(bad)?,
            "preprocess.sigma" => self.preprocess.sigma = num(v, key)?,
            "preprocess.hint" => self.preprocess.hint = HintMode::parse(v).ok_or_else(bad)?,
            "optim.lr" => self.optim.lr = num(v, key)?,
            "optim.weight_decay" => self.optim.weight_decay = num(v, key)?,
            "optim.beta1" => self.optim.betas.0 = num(v, key)?,
            "optim.beta2" => self.optim.betas.1 = num(v, key)?,
            "optim.eps" => self.optim.eps = num(v, key)?,
            "train.batch_size" => self.train.batch_size = num(v, key)?,
            "train.epochs" => self.train.epochs = num(v, key)?,
            "train.patience" => self.train.patience = num(v, key)?,
            "train.steps_per_epoch" => self.train.steps_per_epoch = num(v, key)?,
            "train.stride" => self.train.stride = num(v, key)?,
            "eval.rates" => self.eval.rates = nums(v, key)?,
            "eval.patterns" => {
                self.eval.patterns = v.split(',').map(|p| Pattern::parse(p.trim()).ok_or_else(bad)).collect::<Result<_>>()?
            }
            "eval.seeds" => self.eval.seeds = num(v, key)?,
            "eval.stride" => self.eval.stride = num(v, key)?,
            "eval.batch_size" => self.eval.batch_size = num(v, key)?,
            "data.source" => {
                self.data = match v {
                    "synthetic" => match &self.data {
                        s @ DataSource::Synthetic { .. } => s.clone(),
                        _ => DataSource::Synthetic { n_nodes: 8, n_steps: 2000, d_in: 3 },
                    },
                    "file" => match &self.data {
                        f @ DataSource::File { .. } => f.clone(),
                        _ => DataSource::File { data: PathBuf::new(), schema: PathBuf::new() },
                    },
                    _ => return Err(bad()),
                }
            }
            "synth.n_nodes" | "synth.n_steps" | "synth.d_in" => {
                let (mut n, mut t, mut d) = match self.data {
                    DataSource::Synthetic { n_nodes, n_steps, d_in } => (n_nodes, n_steps, d_in),
                    _ => (8, 2000, 3),
                };
                let x = num(v, key)?;
                match key {
                    "synth.n_nodes" => n = x,
                    "synth.n_steps" => t = x,
                    _ => d = x,
                }
                self.data = DataSource::Synthetic { n_nodes: n, n_steps: t, d_in: d };
            }
            "data.path" | "data.schema" => {
                let (mut data, mut schema) = match &self.data {
                    DataSource::File { data, schema } => (data.clone(), schema.clone()),
                    _ => (PathBuf::new(), PathBuf::new()),
                };
                if key == "data.path" {
                    data = PathBuf::from(v);
                } else {
                    schema = PathBuf::from(v);
                }
                self.data = DataSource::File { data, schema };
            }
            "split.mode" => {
                self.split = match v {
                    "fractions" => SplitConfig::Fractions { train: 0.7, validation: 0.1 },
                    "years" => SplitConfig::Years { train: 2015, validation: 2016, test: 2017 },
                    _ => return Err(bad()),
                }
            }
            "split.train" | "split.validation" => {
                let (mut a, mut b) = match self.split {
                    SplitConfig::Fractions { train, validation } => (train, validation),
                    _ => (0.7, 0.1),
                };
                if key == "split.train" {
                    a = num(v, key)?;
                } else {
                    b = num(v, key)?;
                }
                self.split = SplitConfig::Fractions { train: a, validation: b };
            }
            "split.years" => {
                let y: Vec<i32> = nums(v, key)?;
                if y.len() != 3 {
                    return Err(bad());
                }
                self.split = SplitConfig::Years { train: y[0], validation: y[1], test: y[2] };
            }
            _ => {
                if let Some(rest) = key.strip_prefix("mask.train.") {
                    set_mask(&mut self.mask_train, rest, v).map_err(|_| bad())?;
                } else if let Some(rest) = key.strip_prefix("mask.aug.") {
                    set_mask(&mut self.mask_aug, rest, v).map_err(|_| bad())?;
                } else {
                    return Err(Error::Config(format!("unknown key {}", key)));
                }
            }
        }
        Ok(())
    }

    /// Desk defaults overridden by the file's settings. Relative data paths resolve
    /// against the config file's directory.
    pub fn parse(text: &str, base_dir: Option<&Path>) -> Result<TrainConfig> {
        let mut cfg = TrainConfig::desk();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key=value", i + 1)))?;
            cfg.set(k.trim(), v).map_err(|e| Error::Config(format!("line {}: {}", i + 1, e)))?;
        }
        if let (Some(base), DataSource::File { data, schema }) = (base_dir, &mut cfg.data) {
            for p in [data, schema] {
                if p.is_relative() && !p.as_os_str().is_empty() {
                    *p = base.join(&*p);
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<TrainConfig> {
        TrainConfig::parse(&std::fs::read_to_string(path)?, path.parent())
    }
}

fn as_config(e: Error) -> Error {
    match e {
        Error::Contract(m) => Error::Config(m),
        other => other,
    }
}

fn num<T: std::str::FromStr>(v: &str, key: &str) -> Result<T> {
    v.parse().map_err(|_| Error::Config(format!("invalid value {:?} for {}", v, key)))
}

fn nums<T: std::str::FromStr>(v: &str, key: &str) -> Result<Vec<T>> {
    v.split(',').map(|x| num(x.trim(), key)).collect()
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn score_scale_name(s: ScoreScale) -> &'static str {
    match s {
        ScoreScale::PerHead => "per_head",
        ScoreScale::Model => "model",
    }
}

fn parse_score_scale(s: &str) -> Option<ScoreScale> {
    match s {
        "per_head" => Some(ScoreScale::PerHead),
        "model" => Some(ScoreScale::Model),
        _ => None,
    }
}

fn fusion_name(f: Fusion) -> &'static str {
    match f {
        Fusion::SumMlp => "sum_mlp",
        Fusion::Sum => "sum",
    }
}

fn parse_fusion(s: &str) -> Option<Fusion> {
    match s {
        "sum_mlp" => Some(Fusion::SumMlp),
        "sum" => Some(Fusion::Sum),
        _ => None,
    }
}

fn mask_entries(spec: &MaskSpec) -> Vec<(&'static str, String)> {
    let mut e = Vec::new();
    match spec.pattern {
        PatternChoice::Single(p) => e.push(("pattern", p.as_str().to_string())),
        PatternChoice::Mixed(w) => {
            e.push(("pattern", "mixed".to_string()));
            e.push(("weights", join(&w.0)));
        }
    }
    match spec.rate {
        RateSpec::Fixed(r) => e.push(("rate", r.to_string())),
        RateSpec::Range(lo, hi) => e.push(("rate_range", format!("{},{}", lo, hi))),
    }
    e.push(("block_min", spec.block.min_len.to_string()));
    e.push(("block_max", spec.block.max_len.map_or(0, |m| m).to_string()));
    e.push(("seed", spec.seed.to_string()));
    e
}

fn set_mask(spec: &mut MaskSpec, key: &str, v: &str) -> Result<()> {
    match key {
        "pattern" => {
            spec.pattern = match v {
                "mixed" => match spec.pattern {
                    PatternChoice::Mixed(w) => PatternChoice::Mixed(w),
                    _ => PatternChoice::Mixed(MixWeights::point_row_column()),
                },
                p => PatternChoice::Single(Pattern::parse(p).ok_or_else(|| Error::Config(p.into()))?),
            }
        }
        "weights" => {
            let w: Vec<f64> = nums(v, key)?;
            let w: [f64; 4] = w.try_into().map_err(|_| Error::Config("four weights".into()))?;
            spec.pattern = PatternChoice::Mixed(MixWeights(w));
        }
        "rate" => spec.rate = RateSpec::Fixed(num(v, key)?),
        "rate_range" => {
            let r: Vec<f64> = nums(v, key)?;
            if r.len() != 2 {
                return Err(Error::Config("rate_range needs lo,hi".into()));
            }
            spec.rate = RateSpec::Range(r[0], r[1]);
        }
        "block_min" => spec.block.min_len = num(v, key)?,
        "block_max" => {
            let m: usize = num(v, key)?;
            spec.block.max_len = (m > 0).then_some(m);
        }
        "seed" => spec.seed = num(v, key)?,
        _ => return Err(Error::Config(format!("unknown mask key {}", key))),
    }
    Ok(())
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig::desk()
    }
}
