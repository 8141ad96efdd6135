//! Dual attention heads over per-fact representations.
//!
//! For each head (contradiction `c`, entailment `e`) and fact `i`:
//!
//! ```text
//! logit_i      = w_logit . R_i + b_logit
//! raw_i        = sigmoid(w2 . tanh(W1 R_i + b1) + b2)
//! attention_i  = raw_i / sum_k raw_k
//! obs_logit    = sum_i attention_i * logit_i
//! probability  = sigmoid(w3 * obs_logit + b3)
//! ```
//!
//! Both heads read the same representations. Normalisation is done in the
//! log domain so that fully saturated scorers still produce a finite
//! distribution.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::encoder::{EncoderConfig, Representation};
use crate::error::{Error, Result};

pub const DEFAULT_HIDDEN: usize = 32;
pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Head {
    #[serde(rename = "c")]
    Contradiction,
    #[serde(rename = "e")]
    Entailment,
}

impl Head {
    pub const BOTH: [Head; 2] = [Head::Contradiction, Head::Entailment];
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(sigmoid(x))` without overflow or catastrophic underflow.
fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

/// Trainable tensors of one head. `w1` is `h x d`, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadParams {
    #[serde(rename = "W1")]
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    #[serde(rename = "W2")]
    pub w2: Vec<f64>,
    pub b2: f64,
    #[serde(rename = "W_logit")]
    pub w_logit: Vec<f64>,
    pub b_logit: f64,
    #[serde(rename = "W3")]
    pub w3: f64,
    pub b3: f64,
}

impl HeadParams {
    pub fn zeros(d: usize, h: usize) -> Self {
        HeadParams {
            w1: vec![0.0; h * d],
            b1: vec![0.0; h],
            w2: vec![0.0; h],
            b2: 0.0,
            w_logit: vec![0.0; d],
            b_logit: 0.0,
            w3: 0.0,
            b3: 0.0,
        }
    }

    /// Weights uniform in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`, biases zero.
    fn random(d: usize, h: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut uniform = |fan_in: usize, n: usize| -> Vec<f64> {
            let bound = 1.0 / (fan_in as f64).sqrt();
            (0..n).map(|_| rng.random_range(-bound..=bound)).collect()
        };
        let w1 = uniform(d, h * d);
        let w2 = uniform(h, h);
        let w_logit = uniform(d, d);
        let w3 = uniform(1, 1)[0];
        HeadParams {
            w1,
            b1: vec![0.0; h],
            w2,
            b2: 0.0,
            w_logit,
            b_logit: 0.0,
            w3,
            b3: 0.0,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w_logit.len()
    }

    pub fn hidden(&self) -> usize {
        self.b1.len()
    }

    pub fn check_shapes(&self, d: usize, h: usize) -> Result<()> {
        let ok = self.w1.len() == h * d
            && self.b1.len() == h
            && self.w2.len() == h
            && self.w_logit.len() == d;
        if !ok {
            return Err(Error::ShapeMismatch(format!(
                "head params do not match d={d}, h={h}"
            )));
        }
        if self.iter_values().any(|v| !v.is_finite()) {
            return Err(Error::ShapeMismatch("head params contain non-finite values".into()));
        }
        Ok(())
    }

    pub fn num_params(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + self.w_logit.len() + 4
    }

    fn iter_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.w1
            .iter()
            .chain(&self.b1)
            .chain(&self.w2)
            .chain([&self.b2])
            .chain(&self.w_logit)
            .chain([&self.b_logit, &self.w3, &self.b3])
            .copied()
    }

    /// Flat order: W1, b1, W2, b2, W_logit, b_logit, W3, b3.
    pub fn write_flat(&self, out: &mut Vec<f64>) {
        out.extend(self.iter_values());
    }

    /// Inverse of [`write_flat`](Self::write_flat); returns the unread tail.
    pub fn read_flat<'a>(&mut self, flat: &'a [f64]) -> &'a [f64] {
        fn take<'b>(dst: &mut [f64], src: &'b [f64]) -> &'b [f64] {
            let (head, tail) = src.split_at(dst.len());
            dst.copy_from_slice(head);
            tail
        }
        let mut rest = take(&mut self.w1, flat);
        rest = take(&mut self.b1, rest);
        rest = take(&mut self.w2, rest);
        self.b2 = rest[0];
        rest = take(&mut self.w_logit, &rest[1..]);
        self.b_logit = rest[0];
        self.w3 = rest[1];
        self.b3 = rest[2];
        &rest[3..]
    }

    fn hidden_activations(&self, r: &[f64]) -> Vec<f64> {
        let d = r.len();
        self.w1
            .chunks_exact(d)
            .zip(&self.b1)
            .map(|(row, b)| (dot(row, r) + b).tanh())
            .collect()
    }

    fn attention_pre_activation(&self, hidden: &[f64]) -> f64 {
        dot(&self.w2, hidden) + self.b2
    }

    fn fact_logit(&self, r: &[f64]) -> f64 {
        dot(&self.w_logit, r) + self.b_logit
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `sigmoid(W2 . tanh(W1 R + b1) + b2)` for one representation.
pub fn raw_attention(r: &Representation, params: &HeadParams) -> Result<f64> {
    check_input(r, params)?;
    let hidden = params.hidden_activations(r.values());
    Ok(sigmoid(params.attention_pre_activation(&hidden)))
}

/// Divide each raw score by their sum. Entries must be positive.
pub fn normalize_attention(raw: &[f64]) -> Result<Vec<f64>> {
    if raw.is_empty() {
        return Err(Error::EmptyInput("attention list"));
    }
    if raw.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(Error::ShapeMismatch("raw attention must be positive and finite".into()));
    }
    let total: f64 = raw.iter().sum();
    Ok(raw.iter().map(|v| v / total).collect())
}

fn check_input(r: &Representation, params: &HeadParams) -> Result<()> {
    if r.dim() != params.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: params.input_dim(),
            found: r.dim(),
        });
    }
    if params.w1.len() != params.hidden() * params.input_dim() || params.w2.len() != params.hidden() {
        return Err(Error::ShapeMismatch("inconsistent head parameter shapes".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HeadScores {
    pub logits: Vec<f64>,
    pub raw_attention: Vec<f64>,
    pub norm_attention: Vec<f64>,
}

impl HeadScores {
    pub fn len(&self) -> usize {
        self.raw_attention.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw_attention.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FactScores {
    pub contradiction: HeadScores,
    pub entailment: HeadScores,
}

impl FactScores {
    pub fn head(&self, head: Head) -> &HeadScores {
        match head {
            Head::Contradiction => &self.contradiction,
            Head::Entailment => &self.entailment,
        }
    }

    pub fn len(&self) -> usize {
        self.contradiction.len()
    }

    pub fn is_empty(&self) -> bool {
        self.contradiction.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HeadOutput {
    pub logit: f64,
    pub probability: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ObservationLogits {
    pub contradiction: HeadOutput,
    pub entailment: HeadOutput,
}

impl ObservationLogits {
    pub fn head(&self, head: Head) -> HeadOutput {
        match head {
            Head::Contradiction => self.contradiction,
            Head::Entailment => self.entailment,
        }
    }
}

/// Intermediate values of one head's forward pass, kept for backprop.
#[derive(Debug, Clone)]
pub(crate) struct HeadTrace {
    pub hidden: Vec<Vec<f64>>,
    pub scores: HeadScores,
    pub output: HeadOutput,
}

pub(crate) fn head_forward(facts: &[Representation], params: &HeadParams) -> Result<HeadTrace> {
    if facts.is_empty() {
        return Err(Error::EmptyInput("fact list"));
    }
    let n = facts.len();
    let mut hidden = Vec::with_capacity(n);
    let mut logits = Vec::with_capacity(n);
    let mut pre = Vec::with_capacity(n);
    for r in facts {
        check_input(r, params)?;
        let u = params.hidden_activations(r.values());
        pre.push(params.attention_pre_activation(&u));
        logits.push(params.fact_logit(r.values()));
        hidden.push(u);
    }
    let raw: Vec<f64> = pre.iter().map(|&s| sigmoid(s)).collect();
    let log_raw: Vec<f64> = pre.iter().map(|&s| log_sigmoid(s)).collect();
    let max_log = log_raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let shifted: Vec<f64> = log_raw.iter().map(|l| (l - max_log).exp()).collect();
    let total: f64 = shifted.iter().sum();
    let norm: Vec<f64> = shifted.iter().map(|v| v / total).collect();
    let logit = dot(&norm, &logits);
    let probability = sigmoid(params.w3 * logit + params.b3);
    Ok(HeadTrace {
        hidden,
        scores: HeadScores {
            logits,
            raw_attention: raw,
            norm_attention: norm,
        },
        output: HeadOutput { logit, probability },
    })
}

/// All trainable tensors of both heads plus the metadata a checkpoint carries.
#[derive(Debug, Clone, PartialEq)]
pub struct LogicHeadParams {
    d: usize,
    h: usize,
    seed: u64,
    pub contradiction: HeadParams,
    pub entailment: HeadParams,
}

impl LogicHeadParams {
    pub fn init(d: usize, h: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let contradiction = HeadParams::random(d, h, &mut rng);
        let entailment = HeadParams::random(d, h, &mut rng);
        LogicHeadParams {
            d,
            h,
            seed,
            contradiction,
            entailment,
        }
    }

    pub fn from_heads(contradiction: HeadParams, entailment: HeadParams, seed: u64) -> Result<Self> {
        let (d, h) = (contradiction.input_dim(), contradiction.hidden());
        contradiction.check_shapes(d, h)?;
        entailment.check_shapes(d, h)?;
        Ok(LogicHeadParams {
            d,
            h,
            seed,
            contradiction,
            entailment,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.d
    }

    pub fn hidden(&self) -> usize {
        self.h
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn head(&self, head: Head) -> &HeadParams {
        match head {
            Head::Contradiction => &self.contradiction,
            Head::Entailment => &self.entailment,
        }
    }

    pub fn head_mut(&mut self, head: Head) -> &mut HeadParams {
        match head {
            Head::Contradiction => &mut self.contradiction,
            Head::Entailment => &mut self.entailment,
        }
    }

    pub fn num_params(&self) -> usize {
        self.contradiction.num_params() + self.entailment.num_params()
    }

    /// Contradiction head first, then entailment.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        self.contradiction.write_flat(&mut out);
        self.entailment.write_flat(&mut out);
        out
    }

    pub fn set_flat(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.num_params(), "flat parameter length");
        let rest = self.contradiction.read_flat(flat);
        self.entailment.read_flat(rest);
    }
}

/// Score every fact with both heads and aggregate to observation logits.
pub fn forward(facts: &[Representation], params: &LogicHeadParams) -> Result<(FactScores, ObservationLogits)> {
    let c = head_forward(facts, &params.contradiction)?;
    let e = head_forward(facts, &params.entailment)?;
    Ok((
        FactScores {
            contradiction: c.scores,
            entailment: e.scores,
        },
        ObservationLogits {
            contradiction: c.output,
            entailment: e.output,
        },
    ))
}

#[derive(Debug, Serialize, Deserialize)]
struct CheckpointHeads {
    c: HeadParams,
    e: HeadParams,
}

#[derive(Debug, Serialize, Deserialize)]
struct CheckpointFile {
    format_version: u32,
    d: usize,
    h: usize,
    seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    encoder: Option<EncoderConfig>,
    heads: CheckpointHeads,
}

/// Trained parameters together with the encoder they were trained against.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: LogicHeadParams,
    pub encoder: Option<EncoderConfig>,
}

impl Checkpoint {
    pub fn to_json(&self) -> Result<String> {
        let file = CheckpointFile {
            format_version: CHECKPOINT_FORMAT_VERSION,
            d: self.params.d,
            h: self.params.h,
            seed: self.params.seed,
            encoder: self.encoder,
            heads: CheckpointHeads {
                c: self.params.contradiction.clone(),
                e: self.params.entailment.clone(),
            },
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: CheckpointFile = serde_json::from_str(text)?;
        if file.format_version != CHECKPOINT_FORMAT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported format_version {}",
                file.format_version
            )));
        }
        file.heads.c.check_shapes(file.d, file.h)?;
        file.heads.e.check_shapes(file.d, file.h)?;
        Ok(Checkpoint {
            params: LogicHeadParams {
                d: file.d,
                h: file.h,
                seed: file.seed,
                contradiction: file.heads.c,
                entailment: file.heads.e,
            },
            encoder: file.encoder,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()? + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))
    }
}
