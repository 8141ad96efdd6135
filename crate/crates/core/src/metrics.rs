//! Observation- and fact-level evaluation.
//!
//! Precision, recall and F1 are 0 whenever their denominator is 0. The same
//! convention applies at both levels and is stated in every report.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data_model::{NliLabel, Observation};
use crate::encoder::Encoder;
use crate::error::{Error, Result};
use crate::logic_head::{forward, FactScores, LogicHeadParams};
use crate::rule_engine::{classify, classify_fact, Prediction};
use crate::trainer::encode_observation;

pub const ZERO_DIVISION_NOTE: &str = "precision, recall and F1 are 0 when their denominator is 0";

/// Counts indexed `[gold][predicted]` in entailment, neutral, contradiction order.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ConfusionMatrix {
    pub counts: [[u64; 3]; 3],
}

impl ConfusionMatrix {
    pub fn from_counts(counts: [[u64; 3]; 3]) -> Self {
        ConfusionMatrix { counts }
    }

    pub fn record(&mut self, gold: NliLabel, predicted: NliLabel) {
        self.counts[gold.index()][predicted.index()] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn correct(&self) -> u64 {
        (0..3).map(|k| self.counts[k][k]).sum()
    }

    pub fn accuracy(&self) -> f64 {
        ratio(self.correct(), self.total())
    }

    pub fn class_metrics(&self, label: NliLabel) -> ClassMetrics {
        let k = label.index();
        let tp = self.counts[k][k];
        let predicted: u64 = (0..3).map(|g| self.counts[g][k]).sum();
        let gold: u64 = self.counts[k].iter().sum();
        let precision = ratio(tp, predicted);
        let recall = ratio(tp, gold);
        // 2PR/(P+R) in count form: one rounding, so exact fractions compare exactly
        let f1 = ratio(2 * tp, predicted + gold);
        ClassMetrics {
            precision,
            recall,
            f1,
        }
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrfSummary {
    pub entailment: ClassMetrics,
    pub neutral: ClassMetrics,
    pub contradiction: ClassMetrics,
    #[serde(rename = "macro")]
    pub macro_avg: ClassMetrics,
}

impl PrfSummary {
    pub fn from_confusion(cm: &ConfusionMatrix) -> Self {
        let [e, n, c] = NliLabel::ALL.map(|l| cm.class_metrics(l));
        let mean = |f: fn(&ClassMetrics) -> f64| (f(&e) + f(&n) + f(&c)) / 3.0;
        PrfSummary {
            entailment: e,
            neutral: n,
            contradiction: c,
            macro_avg: ClassMetrics {
                precision: mean(|m| m.precision),
                recall: mean(|m| m.recall),
                f1: mean(|m| m.f1),
            },
        }
    }

    fn columns(&self) -> [&ClassMetrics; 4] {
        [&self.entailment, &self.neutral, &self.contradiction, &self.macro_avg]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundAccuracy {
    pub count: u64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FactLevelReport {
    pub count: u64,
    pub accuracy: f64,
    pub confusion: ConfusionMatrix,
    pub prf: PrfSummary,
}

impl FactLevelReport {
    pub fn from_confusion(confusion: ConfusionMatrix) -> Self {
        FactLevelReport {
            count: confusion.total(),
            accuracy: confusion.accuracy(),
            prf: PrfSummary::from_confusion(&confusion),
            confusion,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub zero_division: &'static str,
    pub count: u64,
    pub accuracy: f64,
    pub per_round: BTreeMap<String, RoundAccuracy>,
    pub confusion: ConfusionMatrix,
    pub observations: PrfSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub facts: Option<FactLevelReport>,
}

/// One evaluated observation: gold label, prediction and optional round tag.
#[derive(Debug, Clone, Copy)]
pub struct Outcome<'a> {
    pub gold: NliLabel,
    pub predicted: NliLabel,
    pub round: Option<&'a str>,
}

impl MetricsReport {
    pub fn from_outcomes<'a>(outcomes: impl IntoIterator<Item = Outcome<'a>>) -> Self {
        let mut confusion = ConfusionMatrix::default();
        let mut rounds: BTreeMap<String, (u64, u64)> = BTreeMap::new();
        for o in outcomes {
            confusion.record(o.gold, o.predicted);
            if let Some(round) = o.round {
                let entry = rounds.entry(round.to_string()).or_default();
                entry.0 += 1;
                entry.1 += u64::from(o.gold == o.predicted);
            }
        }
        MetricsReport {
            zero_division: ZERO_DIVISION_NOTE,
            count: confusion.total(),
            accuracy: confusion.accuracy(),
            per_round: rounds
                .into_iter()
                .map(|(k, (n, correct))| {
                    (
                        k,
                        RoundAccuracy {
                            count: n,
                            accuracy: ratio(correct, n),
                        },
                    )
                })
                .collect(),
            observations: PrfSummary::from_confusion(&confusion),
            confusion,
            facts: None,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Aligned text table with fact rows (when present) above observation rows.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# {ZERO_DIVISION_NOTE}");
        let _ = writeln!(out, "{:<12}{:>8}{:>8}{:>8}{:>8}", "", "Ent.", "Neut.", "Cont.", "Macro.");
        let mut block = |title: &str, prf: &PrfSummary| {
            let _ = writeln!(out, "{title}");
            let rows: [(&str, fn(&ClassMetrics) -> f64); 3] = [
                ("Precision", |m| m.precision),
                ("Recall", |m| m.recall),
                ("F1", |m| m.f1),
            ];
            for (name, get) in rows {
                let _ = write!(out, "{name:<12}");
                for m in prf.columns() {
                    let _ = write!(out, "{:>8.2}", get(m));
                }
                let _ = writeln!(out);
            }
        };
        if let Some(facts) = &self.facts {
            block("Facts:", &facts.prf);
        }
        block("Obs:", &self.observations);
        let _ = writeln!(out, "{:<12}{:>8.4}  (n = {})", "Accuracy", self.accuracy, self.count);
        for (round, acc) in &self.per_round {
            let _ = writeln!(out, "  {:<10}{:>8.4}  (n = {})", round, acc.accuracy, acc.count);
        }
        out
    }
}

/// Classify every observation; results are in dataset order.
pub fn predict_all(
    dataset: &[Observation],
    params: &LogicHeadParams,
    encoder: &dyn Encoder,
    threshold: f64,
) -> Result<Vec<Prediction>> {
    dataset
        .par_iter()
        .map(|obs| {
            let facts = encode_observation(obs, encoder)?;
            let (scores, _) = forward(&facts, params)?;
            classify(&scores, threshold)
        })
        .collect()
}

pub fn report_from_predictions(dataset: &[Observation], predictions: &[Prediction]) -> Result<MetricsReport> {
    let outcomes = dataset
        .iter()
        .zip(predictions)
        .map(|(obs, pred)| {
            Ok(Outcome {
                gold: obs.label.ok_or_else(|| Error::Unlabeled(obs.id.clone()))?,
                predicted: pred.predicted,
                round: obs.round.as_deref(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MetricsReport::from_outcomes(outcomes))
}

pub fn evaluate(
    dataset: &[Observation],
    params: &LogicHeadParams,
    encoder: &dyn Encoder,
    threshold: f64,
) -> Result<MetricsReport> {
    if let Some(obs) = dataset.iter().find(|o| o.label.is_none()) {
        return Err(Error::Unlabeled(obs.id.clone()));
    }
    let predictions = predict_all(dataset, params, encoder, threshold)?;
    report_from_predictions(dataset, &predictions)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactAnnotation {
    pub id: String,
    pub fact_index: usize,
    #[serde(with = "label_str")]
    pub label: NliLabel,
}

mod label_str {
    use super::NliLabel;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(l: &NliLabel, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(l.as_str())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<NliLabel, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

pub fn load_fact_annotations(path: impl AsRef<Path>) -> Result<Vec<FactAnnotation>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::MalformedLine {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

/// Fact-level P/R/F1 from per-fact raw attention, using the observation hierarchy.
pub fn evaluate_facts(
    dataset: &[Observation],
    annotations: &[FactAnnotation],
    params: &LogicHeadParams,
    encoder: &dyn Encoder,
    threshold: f64,
) -> Result<FactLevelReport> {
    let by_id: HashMap<&str, &Observation> = dataset.iter().map(|o| (o.id.as_str(), o)).collect();
    let mut seen = HashSet::new();
    for a in annotations {
        let mismatch = |message: &str| Error::Annotation {
            id: a.id.clone(),
            fact_index: a.fact_index,
            message: message.to_string(),
        };
        let obs = by_id.get(a.id.as_str()).ok_or_else(|| mismatch("unknown observation id"))?;
        if a.fact_index >= obs.bundle.len() {
            return Err(mismatch("fact index out of range"));
        }
        if !seen.insert((a.id.as_str(), a.fact_index)) {
            return Err(mismatch("duplicate annotation"));
        }
    }

    let annotated: Vec<&Observation> = {
        let ids: HashSet<&str> = annotations.iter().map(|a| a.id.as_str()).collect();
        dataset.iter().filter(|o| ids.contains(o.id.as_str())).collect()
    };
    let scored: HashMap<&str, _> = annotated
        .par_iter()
        .map(|obs| {
            let facts = encode_observation(obs, encoder)?;
            Ok((obs.id.as_str(), forward(&facts, params)?.0))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .collect();

    Ok(FactLevelReport::from_confusion(fact_confusion(annotations, &scored, threshold)))
}

/// Tally annotated facts against their predicted fact-level labels.
/// Every annotation must have an entry in `scores`.
pub fn fact_confusion(
    annotations: &[FactAnnotation],
    scores: &HashMap<&str, FactScores>,
    threshold: f64,
) -> ConfusionMatrix {
    let mut confusion = ConfusionMatrix::default();
    for a in annotations {
        let s = &scores[a.id.as_str()];
        let predicted = classify_fact(
            s.contradiction.raw_attention[a.fact_index],
            s.entailment.raw_attention[a.fact_index],
            threshold,
        );
        confusion.record(a.label, predicted);
    }
    confusion
}
