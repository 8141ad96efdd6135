//! Domain records and the JSONL dataset format.
//!
//! One observation per line:
//!
//! ```json
//! {"id": "a1", "premise": "...", "hypothesis": "...", "label": "entailment",
//!  "round": "R1", "facts": [{"text": "...", "provenance": "list2"}]}
//! ```
//!
//! `label` and `round` are optional. Unknown keys are ignored with a warning.
//! Facts are kept in canonical group order (list1, list2, ext, hypcond) with
//! generation order preserved inside each group; a `fact_index` anywhere in
//! this crate refers to a position in the bundle the model actually sees.

use std::collections::HashSet;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NliLabel {
    Entailment,
    Neutral,
    Contradiction,
}

impl NliLabel {
    pub const ALL: [NliLabel; 3] = [NliLabel::Entailment, NliLabel::Neutral, NliLabel::Contradiction];

    /// Row/column position in confusion matrices (entailment, neutral, contradiction).
    pub fn index(self) -> usize {
        match self {
            NliLabel::Entailment => 0,
            NliLabel::Neutral => 1,
            NliLabel::Contradiction => 2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            NliLabel::Entailment => "entailment",
            NliLabel::Neutral => "neutral",
            NliLabel::Contradiction => "contradiction",
        }
    }
}

impl fmt::Display for NliLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for NliLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "entailment" => Ok(NliLabel::Entailment),
            "neutral" => Ok(NliLabel::Neutral),
            "contradiction" => Ok(NliLabel::Contradiction),
            other => Err(Error::UnknownLabel(other.to_string())),
        }
    }
}

/// Where a fact came from. Declaration order is the canonical bundle order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Provenance {
    #[serde(rename = "list1")]
    List1,
    #[serde(rename = "list2")]
    List2,
    #[serde(rename = "ext")]
    Extension,
    #[serde(rename = "hypcond")]
    HypCond,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::List1 => "list1",
            Provenance::List2 => "list2",
            Provenance::Extension => "ext",
            Provenance::HypCond => "hypcond",
        }
    }
}

impl FromStr for Provenance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "list1" => Ok(Provenance::List1),
            "list2" => Ok(Provenance::List2),
            "ext" => Ok(Provenance::Extension),
            "hypcond" => Ok(Provenance::HypCond),
            other => Err(Error::UnknownProvenance(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fact {
    text: String,
    provenance: Provenance,
    eval_only: bool,
}

impl Fact {
    /// Hypothesis-conditioned facts are always eval-only.
    pub fn new(text: impl Into<String>, provenance: Provenance) -> Result<Self> {
        let text = text.into();
        if text.trim().is_empty() {
            return Err(Error::InvalidFact("fact text is empty".into()));
        }
        Ok(Fact {
            text,
            provenance,
            eval_only: provenance == Provenance::HypCond,
        })
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn eval_only(&self) -> bool {
        self.eval_only
    }

    pub fn normalized_text(&self) -> String {
        normalize_text(&self.text)
    }
}

/// Dedup key: case-folded, internal whitespace collapsed, trailing periods stripped.
pub fn normalize_text(text: &str) -> String {
    let collapsed = text.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase();
    collapsed.trim_end_matches('.').trim_end().to_string()
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FactBundle {
    facts: Vec<Fact>,
    dedup_applied: bool,
}

impl FactBundle {
    /// Puts facts into canonical group order; relative order within a group is kept.
    pub fn new(mut facts: Vec<Fact>) -> Self {
        facts.sort_by_key(|f| f.provenance);
        FactBundle {
            facts,
            dedup_applied: false,
        }
    }

    pub fn facts(&self) -> &[Fact] {
        &self.facts
    }

    pub fn len(&self) -> usize {
        self.facts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.facts.is_empty()
    }

    pub fn dedup_applied(&self) -> bool {
        self.dedup_applied
    }

    pub fn has_trainable_fact(&self) -> bool {
        self.facts.iter().any(|f| !f.eval_only)
    }

    pub fn with_provenance(&self, provenance: Provenance) -> FactBundle {
        FactBundle::new(
            self.facts
                .iter()
                .filter(|f| f.provenance == provenance)
                .cloned()
                .collect(),
        )
    }

    fn without_eval_only(&self) -> FactBundle {
        FactBundle {
            facts: self.facts.iter().filter(|f| !f.eval_only).cloned().collect(),
            dedup_applied: self.dedup_applied,
        }
    }

    /// Keeps the first occurrence of each normalized text.
    fn deduplicated(facts: Vec<Fact>) -> FactBundle {
        let mut seen = HashSet::new();
        let kept = facts
            .into_iter()
            .filter(|f| seen.insert(f.normalized_text()))
            .collect();
        let mut bundle = FactBundle::new(kept);
        bundle.dedup_applied = true;
        bundle
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CombineStrategy {
    /// Union with list1/list2 facts from the extras.
    FactComb,
    /// Primary plus extension facts not already present.
    FactExt,
    /// Append hypothesis-conditioned facts, marked eval-only.
    HypCondAttach,
}

/// Merge `extra` bundles into `primary`. Each strategy only takes facts of
/// its own provenance from the extras; the result is always deduplicated.
pub fn combine_bundles(
    primary: &FactBundle,
    extra: &[FactBundle],
    strategy: CombineStrategy,
) -> FactBundle {
    let accepts = |p: Provenance| match strategy {
        CombineStrategy::FactComb => matches!(p, Provenance::List1 | Provenance::List2),
        CombineStrategy::FactExt => p == Provenance::Extension,
        CombineStrategy::HypCondAttach => p == Provenance::HypCond,
    };
    let mut facts = primary.facts.clone();
    for bundle in extra {
        for fact in &bundle.facts {
            if accepts(fact.provenance) {
                let mut fact = fact.clone();
                if strategy == CombineStrategy::HypCondAttach {
                    fact.eval_only = true;
                }
                facts.push(fact);
            } else {
                log::debug!(
                    "{:?}: skipping {} fact {:?}",
                    strategy,
                    fact.provenance.as_str(),
                    fact.text
                );
            }
        }
    }
    FactBundle::deduplicated(facts)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub id: String,
    pub premise: String,
    pub hypothesis: String,
    pub label: Option<NliLabel>,
    pub round: Option<String>,
    pub bundle: FactBundle,
}

impl Observation {
    pub fn fact_texts(&self) -> impl Iterator<Item = &str> {
        self.bundle.facts.iter().map(|f| f.text())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Eval,
}

/// Which generated facts form the model input. `HypCond` means the FactComb
/// union of both lists plus the hypothesis-conditioned facts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum FactStrategy {
    List1,
    List2,
    #[value(name = "factcomb")]
    FactComb,
    #[value(name = "factext")]
    FactExt,
    #[value(name = "hypcond")]
    HypCond,
}

impl fmt::Display for FactStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FactStrategy::List1 => "list1",
            FactStrategy::List2 => "list2",
            FactStrategy::FactComb => "factcomb",
            FactStrategy::FactExt => "factext",
            FactStrategy::HypCond => "hypcond",
        })
    }
}

/// Rebuild an observation's bundle from the facts selected by `strategy`.
pub fn select_facts(obs: &Observation, strategy: FactStrategy, split: Split) -> Result<Observation> {
    let bundle = &obs.bundle;
    let list1 = bundle.with_provenance(Provenance::List1);
    let list2 = bundle.with_provenance(Provenance::List2);
    let selected = match strategy {
        FactStrategy::List1 => list1,
        FactStrategy::List2 => list2,
        FactStrategy::FactComb => combine_bundles(&list1, &[list2], CombineStrategy::FactComb),
        FactStrategy::FactExt => combine_bundles(
            &list1,
            &[bundle.with_provenance(Provenance::Extension)],
            CombineStrategy::FactExt,
        ),
        FactStrategy::HypCond => {
            if split == Split::Train {
                return Err(Error::StrategyNotAllowed {
                    strategy: strategy.to_string(),
                    reason: "hypothesis-conditioned facts are evaluation-only",
                });
            }
            let comb = combine_bundles(&list1, &[list2], CombineStrategy::FactComb);
            combine_bundles(
                &comb,
                &[bundle.with_provenance(Provenance::HypCond)],
                CombineStrategy::HypCondAttach,
            )
        }
    };
    if selected.is_empty() {
        return Err(Error::EmptyFactList(obs.id.clone()));
    }
    Ok(Observation {
        bundle: selected,
        ..obs.clone()
    })
}

pub fn select_all(observations: &[Observation], strategy: FactStrategy, split: Split) -> Result<Vec<Observation>> {
    observations
        .iter()
        .map(|o| select_facts(o, strategy, split))
        .collect()
}

#[derive(Debug, Serialize, Deserialize)]
struct FactRecord {
    text: String,
    provenance: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct ObservationRecord {
    id: String,
    premise: String,
    hypothesis: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    round: Option<String>,
    facts: Vec<FactRecord>,
}

const RECORD_KEYS: [&str; 6] = ["id", "premise", "hypothesis", "label", "round", "facts"];
const FACT_KEYS: [&str; 2] = ["text", "provenance"];

fn warn_unknown_keys(map: &Map<String, Value>, known: &[&str], path: &Path, line: usize) {
    for key in map.keys().filter(|k| !known.contains(&k.as_str())) {
        log::warn!("{}:{}: ignoring unknown key {:?}", path.display(), line, key);
    }
}

fn parse_record(raw: &str, path: &Path, line: usize) -> Result<Observation> {
    let malformed = |message: String| Error::MalformedLine {
        path: path.to_path_buf(),
        line,
        message,
    };
    let value: Value = serde_json::from_str(raw).map_err(|e| malformed(e.to_string()))?;
    let Value::Object(map) = &value else {
        return Err(malformed("expected a JSON object".into()));
    };
    warn_unknown_keys(map, &RECORD_KEYS, path, line);
    if let Some(Value::Array(facts)) = map.get("facts") {
        for fact in facts {
            if let Value::Object(fact) = fact {
                warn_unknown_keys(fact, &FACT_KEYS, path, line);
            }
        }
    }
    let record: ObservationRecord =
        serde_json::from_value(value).map_err(|e| malformed(e.to_string()))?;

    if record.id.is_empty() {
        return Err(malformed("empty id".into()));
    }
    if record.premise.trim().is_empty() || record.hypothesis.trim().is_empty() {
        return Err(malformed("premise and hypothesis must be non-empty".into()));
    }
    let label = record.label.as_deref().map(NliLabel::from_str).transpose()?;
    let facts = record
        .facts
        .into_iter()
        .map(|f| {
            let provenance = Provenance::from_str(&f.provenance)?;
            Fact::new(f.text, provenance).map_err(|e| malformed(e.to_string()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Observation {
        id: record.id,
        premise: record.premise,
        hypothesis: record.hypothesis,
        label,
        round: record.round,
        bundle: FactBundle::new(facts),
    })
}

/// Read and validate a JSONL dataset. The training split drops eval-only facts.
pub fn load_dataset(path: impl AsRef<Path>, split: Split) -> Result<Vec<Observation>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut seen = HashSet::new();
    let mut observations = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let mut obs = parse_record(&line, path, line_no)?;
        if !seen.insert(obs.id.clone()) {
            return Err(Error::DuplicateId(obs.id));
        }
        if split == Split::Train {
            obs.bundle = obs.bundle.without_eval_only();
        }
        if obs.bundle.is_empty() {
            return Err(Error::EmptyFactList(obs.id));
        }
        observations.push(obs);
    }
    Ok(observations)
}

pub fn observation_to_json(obs: &Observation) -> Result<String> {
    let record = ObservationRecord {
        id: obs.id.clone(),
        premise: obs.premise.clone(),
        hypothesis: obs.hypothesis.clone(),
        label: obs.label.map(|l| l.as_str().to_string()),
        round: obs.round.clone(),
        facts: obs
            .bundle
            .facts
            .iter()
            .map(|f| FactRecord {
                text: f.text.clone(),
                provenance: f.provenance.as_str().to_string(),
            })
            .collect(),
    };
    Ok(serde_json::to_string(&record)?)
}

pub fn write_dataset(path: impl AsRef<Path>, observations: &[Observation]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for obs in observations {
        writeln!(out, "{}", observation_to_json(obs)?).map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fact(text: &str, p: Provenance) -> Fact {
        Fact::new(text, p).unwrap()
    }

    fn bundle(texts: &[&str], p: Provenance) -> FactBundle {
        FactBundle::new(texts.iter().map(|t| fact(t, p)).collect())
    }

    fn texts(b: &FactBundle) -> Vec<&str> {
        b.facts().iter().map(|f| f.text()).collect()
    }

    fn write_lines(lines: &[&str]) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        for l in lines {
            writeln!(f, "{l}").unwrap();
        }
        f
    }

    #[test]
    fn label_parsing_is_closed() {
        assert_eq!("neutral".parse::<NliLabel>().unwrap(), NliLabel::Neutral);
        assert!(matches!("maybe".parse::<NliLabel>(), Err(Error::UnknownLabel(s)) if s == "maybe"));
    }

    #[test]
    fn hypcond_facts_are_eval_only() {
        assert!(fact("x", Provenance::HypCond).eval_only());
        assert!(!fact("x", Provenance::List1).eval_only());
        assert!(Fact::new("   ", Provenance::List1).is_err());
    }

    #[test]
    fn normalization_folds_case_space_and_period() {
        assert_eq!(normalize_text("  The  Cat sat.  "), "the cat sat");
        assert_eq!(normalize_text("the cat\tsat"), "the cat sat");
    }

    #[test]
    fn bundle_orders_groups() {
        let b = FactBundle::new(vec![
            fact("h", Provenance::HypCond),
            fact("b", Provenance::List2),
            fact("a", Provenance::List1),
            fact("c", Provenance::List2),
        ]);
        assert_eq!(texts(&b), ["a", "b", "c", "h"]);
    }

    #[test]
    fn factcomb_is_union() {
        let l1 = bundle(&["A", "B"], Provenance::List1);
        let l2 = bundle(&["B", "C"], Provenance::List2);
        let out = combine_bundles(&l1, &[l2], CombineStrategy::FactComb);
        assert_eq!(texts(&out), ["A", "B", "C"]);
        assert!(out.dedup_applied());
    }

    #[test]
    fn factext_adds_missing_only() {
        let primary = bundle(&["A"], Provenance::List1);
        let ext = bundle(&["A", "D"], Provenance::Extension);
        let out = combine_bundles(&primary, &[ext], CombineStrategy::FactExt);
        assert_eq!(texts(&out), ["A", "D"]);
    }

    #[test]
    fn hypcond_attach_marks_eval_only() {
        let primary = bundle(&["A"], Provenance::List1);
        let hyp = bundle(&["H"], Provenance::HypCond);
        let out = combine_bundles(&primary, &[hyp], CombineStrategy::HypCondAttach);
        assert_eq!(texts(&out), ["A", "H"]);
        assert!(!out.facts()[0].eval_only());
        assert!(out.facts()[1].eval_only());
    }

    #[test]
    fn empty_extras_keep_primary() {
        let primary = bundle(&["A", "B"], Provenance::List1);
        let out = combine_bundles(&primary, &[], CombineStrategy::FactExt);
        assert_eq!(texts(&out), ["A", "B"]);
    }

    #[test]
    fn near_duplicates_are_merged() {
        let l1 = bundle(&["The store is in London."], Provenance::List1);
        let l2 = bundle(&["the store is  in london"], Provenance::List2);
        let out = combine_bundles(&l1, &[l2], CombineStrategy::FactComb);
        assert_eq!(out.len(), 1);
    }

    #[test]
    fn load_train_passthrough() {
        let f = write_lines(&[
            r#"{"id":"a","premise":"p","hypothesis":"h","label":"neutral","facts":[{"text":"x","provenance":"list2"},{"text":"y","provenance":"list2"},{"text":"z","provenance":"list2"}]}"#,
        ]);
        let obs = load_dataset(f.path(), Split::Train).unwrap();
        assert_eq!(obs[0].bundle.len(), 3);
    }

    #[test]
    fn load_train_drops_hypcond() {
        let line = r#"{"id":"a","premise":"p","hypothesis":"h","label":"entailment","facts":[{"text":"x","provenance":"list1"},{"text":"H","provenance":"hypcond"},{"text":"y","provenance":"list1"}]}"#;
        let f = write_lines(&[line]);
        let train = load_dataset(f.path(), Split::Train).unwrap();
        assert_eq!(texts(&train[0].bundle), ["x", "y"]);
        let eval = load_dataset(f.path(), Split::Eval).unwrap();
        assert_eq!(texts(&eval[0].bundle), ["x", "y", "H"]);
    }

    #[test]
    fn load_errors() {
        let bad_label = write_lines(&[
            r#"{"id":"a","premise":"p","hypothesis":"h","label":"maybe","facts":[{"text":"x","provenance":"list1"}]}"#,
        ]);
        assert!(matches!(load_dataset(bad_label.path(), Split::Eval), Err(Error::UnknownLabel(_))));

        let malformed = write_lines(&[
            r#"{"id":"a","premise":"p","hypothesis":"h","facts":[{"text":"x","provenance":"list1"}]}"#,
            r#"{"id":"b","premise":"p""#,
        ]);
        match load_dataset(malformed.path(), Split::Eval) {
            Err(Error::MalformedLine { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }

        let dup = write_lines(&[
            r#"{"id":"a","premise":"p","hypothesis":"h","facts":[{"text":"x","provenance":"list1"}]}"#,
            r#"{"id":"a","premise":"p","hypothesis":"h","facts":[{"text":"y","provenance":"list1"}]}"#,
        ]);
        assert!(matches!(load_dataset(dup.path(), Split::Eval), Err(Error::DuplicateId(_))));

        let empty = write_lines(&[r#"{"id":"a","premise":"p","hypothesis":"h","facts":[]}"#]);
        assert!(matches!(load_dataset(empty.path(), Split::Eval), Err(Error::EmptyFactList(_))));

        let only_hyp = write_lines(&[
            r#"{"id":"a","premise":"p","hypothesis":"h","facts":[{"text":"x","provenance":"hypcond"}]}"#,
        ]);
        assert!(matches!(load_dataset(only_hyp.path(), Split::Train), Err(Error::EmptyFactList(_))));
        assert!(load_dataset(only_hyp.path(), Split::Eval).is_ok());
    }

    #[test]
    fn unknown_keys_are_ignored() {
        let f = write_lines(&[
            r#"{"id":"a","premise":"p","hypothesis":"h","extra":1,"facts":[{"text":"x","provenance":"list1","score":0.3}]}"#,
        ]);
        assert_eq!(load_dataset(f.path(), Split::Eval).unwrap().len(), 1);
    }

    #[test]
    fn strategy_selection() {
        let obs = Observation {
            id: "o".into(),
            premise: "p".into(),
            hypothesis: "h".into(),
            label: None,
            round: None,
            bundle: FactBundle::new(vec![
                fact("A", Provenance::List1),
                fact("B", Provenance::List1),
                fact("B", Provenance::List2),
                fact("C", Provenance::List2),
                fact("D", Provenance::Extension),
                fact("H", Provenance::HypCond),
            ]),
        };
        let pick = |s| texts(&select_facts(&obs, s, Split::Eval).unwrap().bundle)
            .into_iter()
            .map(String::from)
            .collect::<Vec<_>>();
        assert_eq!(pick(FactStrategy::List1), ["A", "B"]);
        assert_eq!(pick(FactStrategy::List2), ["B", "C"]);
        assert_eq!(pick(FactStrategy::FactComb), ["A", "B", "C"]);
        assert_eq!(pick(FactStrategy::FactExt), ["A", "B", "D"]);
        assert_eq!(pick(FactStrategy::HypCond), ["A", "B", "C", "H"]);
        assert!(matches!(
            select_facts(&obs, FactStrategy::HypCond, Split::Train),
            Err(Error::StrategyNotAllowed { .. })
        ));
    }
}
