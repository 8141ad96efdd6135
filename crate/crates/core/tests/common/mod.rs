#![allow(dead_code)]

use fglr::data_model::{Fact, FactBundle, NliLabel, Observation, Provenance};
use fglr::encoder::Representation;
use fglr::logic_head::{FactScores, HeadScores, LogicHeadParams};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Parameters with every entry (biases included) uniform in [-scale, scale].
pub fn random_params(rng: &mut ChaCha8Rng, d: usize, h: usize, scale: f64) -> LogicHeadParams {
    let mut p = LogicHeadParams::init(d, h, rng.random());
    let flat: Vec<f64> = (0..p.num_params())
        .map(|_| rng.random_range(-scale..=scale))
        .collect();
    p.set_flat(&flat);
    p
}

pub fn random_facts(rng: &mut ChaCha8Rng, d: usize, n: usize) -> Vec<Representation> {
    (0..n)
        .map(|_| Representation::new((0..d).map(|_| rng.random_range(-1.0..=1.0)).collect()).unwrap())
        .collect()
}

pub fn scores(c: &[f64], e: &[f64]) -> FactScores {
    let head = |raw: &[f64]| HeadScores {
        logits: vec![0.0; raw.len()],
        raw_attention: raw.to_vec(),
        norm_attention: vec![1.0 / raw.len() as f64; raw.len()],
    };
    FactScores {
        contradiction: head(c),
        entailment: head(e),
    }
}

pub fn bundle(facts: &[(&str, Provenance)]) -> FactBundle {
    FactBundle::new(facts.iter().map(|(t, p)| Fact::new(*t, *p).unwrap()).collect())
}

pub fn texts(b: &FactBundle) -> Vec<&str> {
    b.facts().iter().map(|f| f.text()).collect()
}

pub fn observation(id: &str, label: Option<NliLabel>, facts: &[(&str, Provenance)]) -> Observation {
    Observation {
        id: id.into(),
        premise: "The mill opened in 1850. It closed in 1920.".into(),
        hypothesis: "The mill ran for seventy years.".into(),
        label,
        round: None,
        bundle: bundle(facts),
    }
}
