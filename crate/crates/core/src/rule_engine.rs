//! Logical rules linking fact-level decisions to observation labels.
//!
//! Training: contradiction observations need at least one contradicting fact
//! (`y_c = 1`), everything else must have none (`y_c = 0`). Entailment
//! observations need at least one entailing fact (`y_e = 1`), neutral ones
//! none (`y_e = 0`), and contradiction observations leave the entailment
//! head unsupervised.
//!
//! Evaluation: any fact with `raw_c > threshold` makes the observation a
//! contradiction; otherwise any fact with `raw_e > threshold` makes it an
//! entailment; otherwise it is neutral.

use serde::Serialize;

use crate::data_model::NliLabel;
use crate::error::{Error, Result};
use crate::logic_head::FactScores;

pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Target {
    Negative,
    Positive,
    Abstain,
}

impl Target {
    /// Regression target, or `None` when the head is not supervised.
    pub fn value(self) -> Option<f64> {
        match self {
            Target::Negative => Some(0.0),
            Target::Positive => Some(1.0),
            Target::Abstain => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SupervisionTargets {
    pub contradiction: Target,
    pub entailment: Target,
}

/// Optional rule variants. The default is the standard rule set.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RuleSet {
    /// Also require that contradiction observations contain no entailing
    /// fact, i.e. supervise `y_e = 0` instead of abstaining.
    pub forbid_entailment_under_contradiction: bool,
}

impl RuleSet {
    pub fn derive_targets(&self, label: NliLabel) -> SupervisionTargets {
        match label {
            NliLabel::Contradiction => SupervisionTargets {
                contradiction: Target::Positive,
                entailment: if self.forbid_entailment_under_contradiction {
                    Target::Negative
                } else {
                    Target::Abstain
                },
            },
            NliLabel::Entailment => SupervisionTargets {
                contradiction: Target::Negative,
                entailment: Target::Positive,
            },
            NliLabel::Neutral => SupervisionTargets {
                contradiction: Target::Negative,
                entailment: Target::Negative,
            },
        }
    }
}

pub fn derive_targets(label: NliLabel) -> SupervisionTargets {
    RuleSet::default().derive_targets(label)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Prediction {
    pub predicted: NliLabel,
    pub contradiction_facts: Vec<usize>,
    pub entailment_facts: Vec<usize>,
    pub scores: FactScores,
}

impl Prediction {
    /// Facts that decided the class: contradiction facts for a contradiction,
    /// entailment facts for an entailment, none for neutral.
    pub fn responsible_facts(&self) -> &[usize] {
        match self.predicted {
            NliLabel::Contradiction => &self.contradiction_facts,
            NliLabel::Entailment => &self.entailment_facts,
            NliLabel::Neutral => &[],
        }
    }
}

fn above(values: &[f64], threshold: f64) -> Vec<usize> {
    values
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > threshold)
        .map(|(i, _)| i)
        .collect()
}

/// Apply the same precedence to a single fact.
pub fn classify_fact(raw_c: f64, raw_e: f64, threshold: f64) -> NliLabel {
    if raw_c > threshold {
        NliLabel::Contradiction
    } else if raw_e > threshold {
        NliLabel::Entailment
    } else {
        NliLabel::Neutral
    }
}

pub fn classify(scores: &FactScores, threshold: f64) -> Result<Prediction> {
    if scores.is_empty() || scores.entailment.len() != scores.contradiction.len() {
        return Err(Error::EmptyInput("fact scores"));
    }
    let contradiction_facts = above(&scores.contradiction.raw_attention, threshold);
    let entailment_facts = above(&scores.entailment.raw_attention, threshold);
    let predicted = if !contradiction_facts.is_empty() {
        NliLabel::Contradiction
    } else if !entailment_facts.is_empty() {
        NliLabel::Entailment
    } else {
        NliLabel::Neutral
    };
    Ok(Prediction {
        predicted,
        contradiction_facts,
        entailment_facts,
        scores: scores.clone(),
    })
}

/// Test oracle: the evaluation rules restated with explicit loops and no
/// shared helpers. Not used on any production path.
pub mod oracle {
    use super::*;

    pub fn classify_bruteforce(scores: &FactScores) -> Prediction {
        let threshold = DEFAULT_THRESHOLD;
        let mut contradiction_facts = Vec::new();
        let mut entailment_facts = Vec::new();
        let mut i = 0;
        while i < scores.contradiction.raw_attention.len() {
            if scores.contradiction.raw_attention[i] > threshold {
                contradiction_facts.push(i);
            }
            if scores.entailment.raw_attention[i] > threshold {
                entailment_facts.push(i);
            }
            i += 1;
        }
        let mut has_contradiction = false;
        for &v in &scores.contradiction.raw_attention {
            has_contradiction |= v > threshold;
        }
        let mut has_entailment = false;
        for &v in &scores.entailment.raw_attention {
            has_entailment |= v > threshold;
        }
        let predicted = match (has_contradiction, has_entailment) {
            (true, _) => NliLabel::Contradiction,
            (false, true) => NliLabel::Entailment,
            (false, false) => NliLabel::Neutral,
        };
        Prediction {
            predicted,
            contradiction_facts,
            entailment_facts,
            scores: scores.clone(),
        }
    }
}
