//! Joint (fact, hypothesis) representations.
//!
//! The built-in [`HashingEncoder`] needs no model files. It hashes unigrams
//! and bigrams with signed 64-bit FNV-1a:
//!
//! * `bucket = fnv1a64(feature) mod (width / 2)`
//! * `sign = -1` when the top bit of the hash is set, else `+1`
//!
//! Fact features land in coordinates `[0, width/2)`, hypothesis features in
//! `[width/2, width)`, and each block is scaled to unit L2 norm (a block whose
//! signed counts cancel stays zero). One trailing coordinate holds the cosine
//! similarity of the two unigram count vectors, so the output dimension is
//! `width + 1` and the L2 norm of any output is at most `sqrt(3)` regardless
//! of token count.
//!
//! [`PrecomputedEncoder`] serves vectors produced elsewhere (for example by a
//! transformer) keyed by observation id and fact index.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Representation(Vec<f64>);

impl Representation {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::ShapeMismatch("representation has non-finite entries".into()));
        }
        Ok(Representation(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// A fact paired with its hypothesis, plus the key precomputed stores use.
#[derive(Debug, Clone, Copy)]
pub struct FactPair<'a> {
    pub observation_id: &'a str,
    pub fact_index: usize,
    pub fact: &'a str,
    pub hypothesis: &'a str,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum EncoderConfig {
    Hashing { hash_width: usize },
    Precomputed { dim: usize },
}

pub trait Encoder: Send + Sync {
    fn dim(&self) -> usize;

    fn config(&self) -> EncoderConfig;

    fn encode(&self, pair: &FactPair<'_>) -> Result<Representation>;
}

pub const DEFAULT_HASH_WIDTH: usize = 64;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(FNV_OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

/// Lowercased alphanumeric runs.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Unigrams followed by space-joined bigrams.
pub fn features(tokens: &[String]) -> Vec<String> {
    let mut out = tokens.to_vec();
    out.extend(tokens.windows(2).map(|w| format!("{} {}", w[0], w[1])));
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashingEncoder {
    hash_width: usize,
}

impl HashingEncoder {
    pub fn new(hash_width: usize) -> Result<Self> {
        if hash_width < 2 || hash_width % 2 != 0 {
            return Err(Error::Config(format!(
                "hash width must be an even number >= 2, got {hash_width}"
            )));
        }
        Ok(HashingEncoder { hash_width })
    }

    pub fn hash_width(&self) -> usize {
        self.hash_width
    }

    pub fn block_width(&self) -> usize {
        self.hash_width / 2
    }

    /// Bucket within a block and sign for one feature string.
    pub fn bucket(&self, feature: &str) -> (usize, f64) {
        let h = fnv1a64(feature.as_bytes());
        let index = (h % self.block_width() as u64) as usize;
        let sign = if h >> 63 == 1 { -1.0 } else { 1.0 };
        (index, sign)
    }

    fn hash_block(&self, tokens: &[String], out: &mut [f64]) {
        for feature in features(tokens) {
            let (i, sign) = self.bucket(&feature);
            out[i] += sign;
        }
        let norm = out.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            out.iter_mut().for_each(|v| *v /= norm);
        }
    }

    pub fn encode_text(&self, fact: &str, hypothesis: &str) -> Result<Representation> {
        if fact.is_empty() {
            return Err(Error::EmptyInput("fact text"));
        }
        if hypothesis.is_empty() {
            return Err(Error::EmptyInput("hypothesis text"));
        }
        let fact_tokens = tokenize(fact);
        let hyp_tokens = tokenize(hypothesis);
        let half = self.block_width();
        let mut values = vec![0.0; self.hash_width + 1];
        self.hash_block(&fact_tokens, &mut values[..half]);
        self.hash_block(&hyp_tokens, &mut values[half..self.hash_width]);
        values[self.hash_width] = unigram_cosine(&fact_tokens, &hyp_tokens);
        Representation::new(values)
    }
}

impl Default for HashingEncoder {
    fn default() -> Self {
        HashingEncoder {
            hash_width: DEFAULT_HASH_WIDTH,
        }
    }
}

impl Encoder for HashingEncoder {
    fn dim(&self) -> usize {
        self.hash_width + 1
    }

    fn config(&self) -> EncoderConfig {
        EncoderConfig::Hashing {
            hash_width: self.hash_width,
        }
    }

    fn encode(&self, pair: &FactPair<'_>) -> Result<Representation> {
        self.encode_text(pair.fact, pair.hypothesis)
    }
}

fn unigram_cosine(a: &[String], b: &[String]) -> f64 {
    fn counts(tokens: &[String]) -> HashMap<&str, f64> {
        let mut m = HashMap::new();
        for t in tokens {
            *m.entry(t.as_str()).or_insert(0.0) += 1.0;
        }
        m
    }
    let (ca, cb) = (counts(a), counts(b));
    let dot: f64 = ca.iter().filter_map(|(k, v)| cb.get(k).map(|w| v * w)).sum();
    let na = ca.values().map(|v| v * v).sum::<f64>().sqrt();
    let nb = cb.values().map(|v| v * v).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

#[derive(Debug, Clone)]
pub struct PrecomputedEncoder {
    dim: usize,
    vectors: HashMap<(String, usize), Representation>,
}

#[derive(Debug, Deserialize)]
struct EmbeddingRecord {
    id: String,
    fact_index: usize,
    vector: Vec<f64>,
}

impl PrecomputedEncoder {
    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }
}

impl Encoder for PrecomputedEncoder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn config(&self) -> EncoderConfig {
        EncoderConfig::Precomputed { dim: self.dim }
    }

    fn encode(&self, pair: &FactPair<'_>) -> Result<Representation> {
        self.vectors
            .get(&(pair.observation_id.to_string(), pair.fact_index))
            .cloned()
            .ok_or_else(|| Error::MissingPair {
                id: pair.observation_id.to_string(),
                fact_index: pair.fact_index,
            })
    }
}

/// Load `{"id", "fact_index", "vector"}` lines; every vector must have `dim` entries.
pub fn load_precomputed(path: impl AsRef<Path>, dim: usize) -> Result<PrecomputedEncoder> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut vectors = HashMap::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |message: String| Error::MalformedLine {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        };
        let rec: EmbeddingRecord =
            serde_json::from_str(&line).map_err(|e| malformed(e.to_string()))?;
        if rec.vector.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: rec.vector.len(),
            });
        }
        let repr = Representation::new(rec.vector).map_err(|e| malformed(e.to_string()))?;
        if vectors.insert((rec.id.clone(), rec.fact_index), repr).is_some() {
            return Err(malformed(format!(
                "duplicate entry for ({:?}, {})",
                rec.id, rec.fact_index
            )));
        }
    }
    Ok(PrecomputedEncoder { dim, vectors })
}

/// Builds the configured encoder; precomputed encoders need their embedding file.
pub fn from_config(config: EncoderConfig, embeddings: Option<&Path>) -> Result<Box<dyn Encoder>> {
    match (config, embeddings) {
        (EncoderConfig::Hashing { hash_width }, _) => Ok(Box::new(HashingEncoder::new(hash_width)?)),
        (EncoderConfig::Precomputed { dim }, Some(path)) => Ok(Box::new(load_precomputed(path, dim)?)),
        (EncoderConfig::Precomputed { .. }, None) => Err(Error::Config(
            "precomputed encoder requires an embeddings file".into(),
        )),
    }
}
