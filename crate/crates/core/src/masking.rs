//! Synthetic missing-value patterns.
//!
//! All masks are `[N_l, T, D]` tensors with 1 marking a missing entry.
//! Row masks blank every feature of a (node, time) pair, column masks blank a
//! (node, feature) pair across the whole window, block masks blank contiguous
//! time spans of a node across all features.

use std::fs;
use std::io::Write;
use std::path::Path;

use geomae_tensor::Tensor;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preprocess::{check_binary, Preprocessor, ReadingWindow};
use crate::rng::{derive_seed, rng_from, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Pattern {
    Point,
    Row,
    Column,
    Block,
}

impl Pattern {
    pub const ALL: [Pattern; 4] = [Pattern::Point, Pattern::Row, Pattern::Column, Pattern::Block];

    pub fn as_str(self) -> &'static str {
        match self {
            Pattern::Point => "point",
            Pattern::Row => "row",
            Pattern::Column => "column",
            Pattern::Block => "block",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Pattern::ALL.into_iter().find(|p| p.as_str() == s)
    }
}

/// Mixture weights over the four single patterns, in [`Pattern::ALL`] order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixWeights(pub [f64; 4]);

impl MixWeights {
    /// Equal thirds over point, row and column.
    pub fn point_row_column() -> Self {
        MixWeights([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 0.0])
    }

    fn validate(&self) -> Result<()> {
        if self.0.iter().any(|&w| !(w >= 0.0) || !w.is_finite()) {
            return Err(Error::contract(format!("mix weights must be >= 0: {:?}", self.0)));
        }
        let total: f64 = self.0.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::contract(format!("mix weights sum to {}, not 1", total)));
        }
        Ok(())
    }

    fn sample(&self, rng: &mut Rng) -> Pattern {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (p, &w) in Pattern::ALL.iter().zip(&self.0) {
            acc += w;
            if u < acc {
                return *p;
            }
        }
        // u landed in the rounding gap above the last cumulative weight
        let last = self.0.iter().rposition(|&w| w > 0.0).unwrap_or(0);
        Pattern::ALL[last]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PatternChoice {
    Single(Pattern),
    Mixed(MixWeights),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum RateSpec {
    Fixed(f64),
    Range(f64, f64),
}

impl RateSpec {
    fn validate(&self) -> Result<()> {
        let ok = |r: f64| (0.0..=1.0).contains(&r);
        match *self {
            RateSpec::Fixed(r) if ok(r) => Ok(()),
            RateSpec::Range(lo, hi) if ok(lo) && ok(hi) && lo <= hi => Ok(()),
            _ => Err(Error::contract(format!("rate {:?} outside [0, 1]", self))),
        }
    }

    pub fn sample(&self, rng: &mut Rng) -> f64 {
        match *self {
            RateSpec::Fixed(r) => r,
            RateSpec::Range(lo, hi) if lo == hi => lo,
            RateSpec::Range(lo, hi) => rng.random_range(lo..=hi),
        }
    }
}

/// Block lengths in time steps; `max_len = None` means the window length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockLengths {
    pub min_len: usize,
    pub max_len: Option<usize>,
}

impl Default for BlockLengths {
    fn default() -> Self {
        BlockLengths { min_len: 2, max_len: None }
    }
}

/// Declarative missing-pattern scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaskSpec {
    pub pattern: PatternChoice,
    pub rate: RateSpec,
    pub block: BlockLengths,
    pub seed: u64,
}

impl MaskSpec {
    pub fn fixed(pattern: Pattern, rate: f64, seed: u64) -> Self {
        MaskSpec {
            pattern: PatternChoice::Single(pattern),
            rate: RateSpec::Fixed(rate),
            block: BlockLengths::default(),
            seed,
        }
    }

    /// Mixed point/row/column masks with rates drawn from `[lo, hi]`.
    pub fn mixed_range(lo: f64, hi: f64, seed: u64) -> Self {
        MaskSpec {
            pattern: PatternChoice::Mixed(MixWeights::point_row_column()),
            rate: RateSpec::Range(lo, hi),
            block: BlockLengths::default(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.rate.validate()?;
        if let PatternChoice::Mixed(w) = &self.pattern {
            w.validate()?;
        }
        if self.block.min_len == 0 {
            return Err(Error::contract("block min_len must be >= 1"));
        }
        Ok(())
    }

    /// Draws a pattern and rate, then a mask of that kind.
    pub fn draw(&self, shape: &[usize], rng: &mut Rng) -> Result<(Pattern, f64, Tensor)> {
        self.validate()?;
        let pattern = match &self.pattern {
            PatternChoice::Single(p) => *p,
            PatternChoice::Mixed(w) => w.sample(rng),
        };
        let rate = self.rate.sample(rng);
        let mask = generate(pattern, shape, rate, self.block, rng)?;
        Ok((pattern, rate, mask))
    }
}

pub fn generate(
    pattern: Pattern,
    shape: &[usize],
    rate: f64,
    block: BlockLengths,
    rng: &mut Rng,
) -> Result<Tensor> {
    match pattern {
        Pattern::Point => gen_point(shape, rate, rng),
        Pattern::Row => gen_row(shape, rate, rng),
        Pattern::Column => gen_column(shape, rate, rng),
        Pattern::Block => {
            let (_, t, _) = dims(shape)?;
            let max = block.max_len.unwrap_or(t).min(t);
            gen_block(shape, rate, rng, block.min_len.min(max), max)
        }
    }
}

fn dims(shape: &[usize]) -> Result<(usize, usize, usize)> {
    match *shape {
        [n, t, d] if n > 0 && t > 0 && d > 0 => Ok((n, t, d)),
        _ => Err(Error::Dimension(format!("mask shape must be [N_l, T, D], got {:?}", shape))),
    }
}

fn check_rate(rate: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&rate) {
        return Err(Error::contract(format!("rate {} outside [0, 1]", rate)));
    }
    Ok(())
}

fn bernoulli(rng: &mut Rng, rate: f64) -> bool {
    rng.random::<f64>() < rate
}

/// Independent Bernoulli(rate) per entry.
pub fn gen_point(shape: &[usize], rate: f64, rng: &mut Rng) -> Result<Tensor> {
    dims(shape)?;
    check_rate(rate)?;
    Ok(Tensor::from_fn(shape, |_| bernoulli(rng, rate) as u8 as f64)?)
}

/// Bernoulli(rate) per (node, time); a hit blanks all features there.
pub fn gen_row(shape: &[usize], rate: f64, rng: &mut Rng) -> Result<Tensor> {
    let (n, t, d) = dims(shape)?;
    check_rate(rate)?;
    let mut m = Tensor::zeros(shape);
    let data = m.data_mut();
    for pair in 0..n * t {
        if bernoulli(rng, rate) {
            data[pair * d..(pair + 1) * d].fill(1.0);
        }
    }
    Ok(m)
}

/// Bernoulli(rate) per (node, feature); a hit blanks that feature for the whole window.
pub fn gen_column(shape: &[usize], rate: f64, rng: &mut Rng) -> Result<Tensor> {
    let (n, t, d) = dims(shape)?;
    check_rate(rate)?;
    let mut m = Tensor::zeros(shape);
    let data = m.data_mut();
    for node in 0..n {
        for f in 0..d {
            if bernoulli(rng, rate) {
                for step in 0..t {
                    data[(node * t + step) * d + f] = 1.0;
                }
            }
        }
    }
    Ok(m)
}

/// Contiguous per-node time spans over all features, added until the missing
/// fraction reaches `rate`. Overshoot is at most one block.
pub fn gen_block(
    shape: &[usize],
    rate: f64,
    rng: &mut Rng,
    min_len: usize,
    max_len: usize,
) -> Result<Tensor> {
    let (n, t, d) = dims(shape)?;
    check_rate(rate)?;
    if min_len < 1 || min_len > max_len || max_len > t {
        return Err(Error::contract(format!(
            "block lengths need 1 <= min_len ({}) <= max_len ({}) <= window ({})",
            min_len, max_len, t
        )));
    }
    let mut m = Tensor::zeros(shape);
    let total = n * t;
    let target = (rate * total as f64).ceil() as usize;
    let mut masked = vec![false; total];
    let mut count = 0usize;
    let data = m.data_mut();
    while count < target {
        let node = rng.random_range(0..n);
        let len = rng.random_range(min_len..=max_len);
        let start = rng.random_range(0..=t - len);
        for step in start..start + len {
            let pair = node * t + step;
            if !masked[pair] {
                masked[pair] = true;
                count += 1;
                data[pair * d..(pair + 1) * d].fill(1.0);
            }
        }
    }
    Ok(m)
}

/// Elementwise OR.
pub fn compose(base: &Tensor, extra: &Tensor) -> Result<Tensor> {
    if base.shape() != extra.shape() {
        return Err(Error::Dimension(format!(
            "cannot compose masks {:?} and {:?}",
            base.shape(),
            extra.shape()
        )));
    }
    check_binary(base)?;
    check_binary(extra)?;
    Ok(base.zip_map(extra, f64::max)?)
}

pub fn missing_fraction(m: &Tensor) -> f64 {
    m.sum() / m.len() as f64
}

/// One extra-masked copy of a sample, ready for the model.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedVariant {
    pub x_hat: Tensor,
    pub hint: Tensor,
    pub m: Tensor,
    pub pattern: Pattern,
    pub extra_rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedSet {
    pub variants: Vec<AugmentedVariant>,
}

/// `k` variants of `sample`, each with an extra mask drawn from `spec` OR-ed
/// onto the sample's own mask, then re-imputed and re-hinted.
pub fn make_augmented(
    sample: &ReadingWindow,
    k: usize,
    spec: &MaskSpec,
    pre: &Preprocessor,
    rng: &mut Rng,
) -> Result<AugmentedSet> {
    if k == 0 {
        return Err(Error::contract("k must be >= 1"));
    }
    spec.validate()?;
    let stream: u64 = rng.random();
    let variants = (0..k)
        .map(|i| {
            let mut vrng = rng_from(&[stream, i as u64]);
            let (pattern, extra_rate, extra) = spec.draw(sample.m.shape(), &mut vrng)?;
            let m = compose(&sample.m, &extra)?;
            let w = sample.with_mask(m.clone())?;
            let (x_hat, hint) = pre.apply(&w, &mut vrng)?;
            Ok(AugmentedVariant { x_hat, hint, m, pattern, extra_rate })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AugmentedSet { variants })
}

/// Per-(run, sample, variant) seed.
pub fn variant_seed(global: u64, sample: u64, variant: u64) -> u64 {
    derive_seed(&[global, sample, variant])
}

const MASK_MAGIC: [u8; 4] = *b"GMSK";
const MASK_VERSION: u16 = 1;
const HEADER_LEN: usize = 16;

/// Writes masks of one shape as a 16-byte header followed by one byte per entry.
///
/// Header, little-endian: magic `GMSK`, version `u16`, `N_l` `u32`, `N_in` `u32`, `D_in` `u16`.
pub fn write_masks(path: &Path, masks: &[Tensor]) -> Result<()> {
    let first = masks.first().ok_or_else(|| Error::contract("no masks to write"))?;
    let (n, t, d) = dims(first.shape())?;
    if d > u16::MAX as usize || n > u32::MAX as usize || t > u32::MAX as usize {
        return Err(Error::contract(format!("mask shape {:?} exceeds header limits", first.shape())));
    }
    let mut buf = Vec::with_capacity(HEADER_LEN + masks.len() * first.len());
    buf.extend_from_slice(&MASK_MAGIC);
    buf.extend_from_slice(&MASK_VERSION.to_le_bytes());
    buf.extend_from_slice(&(n as u32).to_le_bytes());
    buf.extend_from_slice(&(t as u32).to_le_bytes());
    buf.extend_from_slice(&(d as u16).to_le_bytes());
    for m in masks {
        if m.shape() != first.shape() {
            return Err(Error::Dimension(format!("mask {:?} vs {:?}", m.shape(), first.shape())));
        }
        check_binary(m)?;
        buf.extend(m.data().iter().map(|&v| v as u8));
    }
    let mut f = fs::File::create(path)?;
    f.write_all(&buf)?;
    Ok(())
}

pub fn read_masks(path: &Path) -> Result<Vec<Tensor>> {
    let bytes = fs::read(path)?;
    let bad = |msg: String| Error::Parse { path: path.to_path_buf(), line: 0, msg };
    if bytes.len() < HEADER_LEN || bytes[..4] != MASK_MAGIC {
        return Err(bad("not a mask file".into()));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != MASK_VERSION {
        return Err(bad(format!("unsupported mask file version {}", version)));
    }
    let n = u32::from_le_bytes(bytes[6..10].try_into().unwrap()) as usize;
    let t = u32::from_le_bytes(bytes[10..14].try_into().unwrap()) as usize;
    let d = u16::from_le_bytes([bytes[14], bytes[15]]) as usize;
    let per = n * t * d;
    let body = &bytes[HEADER_LEN..];
    if per == 0 || body.len() % per != 0 {
        return Err(bad(format!("body of {} bytes does not tile [{}, {}, {}]", body.len(), n, t, d)));
    }
    body.chunks(per)
        .map(|chunk| {
            if let Some(b) = chunk.iter().find(|&&b| b > 1) {
                return Err(bad(format!("mask byte {} is not 0 or 1", b)));
            }
            Ok(Tensor::new(vec![n, t, d], chunk.iter().map(|&b| b as f64).collect())?)
        })
        .collect()
}
