//! Separable synthetic NLI data for end-to-end checks.
//!
//! Every contradiction observation has one planted fact containing the
//! contradiction marker token, every entailment observation one planted fact
//! containing the entailment marker. Everything else is noise drawn from a
//! random vocabulary, rejection-sampled so that no noise feature lands in
//! the hash buckets of the markers. Under the hashing encoder the marker
//! buckets are therefore non-zero exactly on planted facts.

use std::collections::HashSet;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data_model::{Fact, FactBundle, NliLabel, Observation, Provenance};
use crate::encoder::{features, tokenize, HashingEncoder};
use crate::error::Result;

pub const CONTRADICTION_MARKER: &str = "kzx";
pub const ENTAILMENT_MARKER: &str = "qel";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SyntheticConfig {
    pub per_class: usize,
    pub min_facts: usize,
    pub max_facts: usize,
    pub words_per_fact: usize,
    pub hypothesis_words: usize,
    pub vocabulary: usize,
    pub hash_width: usize,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            per_class: 200,
            min_facts: 3,
            max_facts: 5,
            words_per_fact: 4,
            hypothesis_words: 5,
            vocabulary: 300,
            hash_width: crate::encoder::DEFAULT_HASH_WIDTH,
            seed: 0,
        }
    }
}

/// A generated observation plus the index of its planted fact.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticExample {
    pub observation: Observation,
    pub planted: Option<usize>,
}

fn random_word(rng: &mut ChaCha8Rng) -> String {
    let len = rng.random_range(4..=7);
    (0..len).map(|_| rng.random_range(b'a'..=b'z') as char).collect()
}

struct Sampler {
    encoder: HashingEncoder,
    reserved: HashSet<usize>,
    vocabulary: Vec<String>,
}

impl Sampler {
    fn clean(&self, text: &str, allowed: &[&str]) -> bool {
        features(&tokenize(text))
            .iter()
            .filter(|f| !allowed.contains(&f.as_str()))
            .all(|f| !self.reserved.contains(&self.encoder.bucket(f).0))
    }

    /// Noise words joined into a sentence, with `marker` at a random position.
    fn sentence(&self, rng: &mut ChaCha8Rng, words: usize, marker: Option<&str>) -> String {
        loop {
            let mut tokens: Vec<&str> = (0..words)
                .map(|_| self.vocabulary.choose(rng).unwrap().as_str())
                .collect();
            if let Some(m) = marker {
                let at = rng.random_range(0..words);
                tokens[at] = m;
            }
            let text = tokens.join(" ");
            if self.clean(&text, &[CONTRADICTION_MARKER, ENTAILMENT_MARKER]) {
                return text;
            }
        }
    }
}

/// `per_class` observations of each label, interleaved and shuffled.
pub fn generate(config: &SyntheticConfig) -> Result<Vec<SyntheticExample>> {
    let encoder = HashingEncoder::new(config.hash_width)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let reserved: HashSet<usize> = [CONTRADICTION_MARKER, ENTAILMENT_MARKER]
        .iter()
        .map(|m| encoder.bucket(m).0)
        .collect();

    let mut vocabulary = Vec::with_capacity(config.vocabulary);
    let mut seen = HashSet::new();
    while vocabulary.len() < config.vocabulary {
        let w = random_word(&mut rng);
        if !reserved.contains(&encoder.bucket(&w).0) && seen.insert(w.clone()) {
            vocabulary.push(w);
        }
    }
    let sampler = Sampler {
        encoder,
        reserved,
        vocabulary,
    };

    let mut labels: Vec<NliLabel> = NliLabel::ALL
        .iter()
        .flat_map(|&l| std::iter::repeat_n(l, config.per_class))
        .collect();
    rand::seq::SliceRandom::shuffle(labels.as_mut_slice(), &mut rng);

    labels
        .into_iter()
        .enumerate()
        .map(|(i, label)| {
            let n = rng.random_range(config.min_facts..=config.max_facts);
            let marker = match label {
                NliLabel::Contradiction => Some(CONTRADICTION_MARKER),
                NliLabel::Entailment => Some(ENTAILMENT_MARKER),
                NliLabel::Neutral => None,
            };
            let planted = marker.map(|_| rng.random_range(0..n));
            let texts: Vec<String> = (0..n)
                .map(|j| {
                    let m = if Some(j) == planted { marker } else { None };
                    sampler.sentence(&mut rng, config.words_per_fact, m)
                })
                .collect();
            let hypothesis = sampler.sentence(&mut rng, config.hypothesis_words, None);
            let facts = texts
                .iter()
                .map(|t| Fact::new(t.clone(), Provenance::List1))
                .collect::<Result<Vec<_>>>()?;
            Ok(SyntheticExample {
                observation: Observation {
                    id: format!("syn-{i:04}"),
                    premise: texts.join(". "),
                    hypothesis,
                    label: Some(label),
                    round: None,
                    bundle: FactBundle::new(facts),
                },
                planted,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SyntheticConfig {
        SyntheticConfig {
            per_class: 20,
            ..SyntheticConfig::default()
        }
    }

    #[test]
    fn balanced_and_deterministic() {
        let a = generate(&small()).unwrap();
        assert_eq!(a.len(), 60);
        for label in NliLabel::ALL {
            assert_eq!(a.iter().filter(|x| x.observation.label == Some(label)).count(), 20);
        }
        assert_eq!(a, generate(&small()).unwrap());
    }

    #[test]
    fn markers_only_in_planted_facts() {
        let enc = HashingEncoder::new(64).unwrap();
        let (bc, _) = enc.bucket(CONTRADICTION_MARKER);
        let (be, _) = enc.bucket(ENTAILMENT_MARKER);
        for ex in generate(&small()).unwrap() {
            let obs = &ex.observation;
            assert_eq!(ex.planted.is_some(), obs.label != Some(NliLabel::Neutral));
            for (j, fact) in obs.bundle.facts().iter().enumerate() {
                let r = enc.encode_text(fact.text(), &obs.hypothesis).unwrap();
                let planted = Some(j) == ex.planted;
                let want_c = planted && obs.label == Some(NliLabel::Contradiction);
                let want_e = planted && obs.label == Some(NliLabel::Entailment);
                assert_eq!(r.values()[bc] != 0.0, want_c, "{}", fact.text());
                assert_eq!(r.values()[be] != 0.0, want_e, "{}", fact.text());
            }
        }
    }
}
