//! Few-shot fact generation through an external text-completion service.
//!
//! Three prompt kinds are supported: listing the facts of a premise, listing
//! the facts missing from a partial list, and producing one premise fact
//! that bears on a given hypothesis. Few-shot examples live in plain-text
//! template files (see `templates/` for the format); the built-in set is
//! compiled in and can be replaced per run.
//!
//! Every service response is appended to a JSONL cache keyed by a content
//! hash of (observation id, template name, template hash, prompt). A second
//! run over the same inputs is answered entirely from the cache.
//!
//! The HTTP service speaks a completions-style protocol:
//!
//! ```text
//! POST <url>
//! Authorization: Bearer $<api key env var>
//! {"model": str, "prompt": str, "max_tokens": int, "temperature": float}
//! -> {"choices": [{"text": str}, ...]}
//! ```

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data_model::{
    combine_bundles, CombineStrategy, Fact, FactBundle, FactStrategy, Observation, Provenance, Split,
};
use crate::error::{Error, Result};

pub const LIST_INSTRUCTION: &str = "List all the facts we explicitly know from the premise:";
pub const EXTEND_INSTRUCTION: &str = "List all the facts missing above:";
pub const HYPCOND_INSTRUCTION: &str =
    "List a fact we explicitly know from the premise that we can use to verify if the hypothesis is true:";
pub const FEW_SHOT_COUNT: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TemplateKind {
    List,
    Extend,
    HypCond,
}

impl TemplateKind {
    fn as_str(self) -> &'static str {
        match self {
            TemplateKind::List => "list",
            TemplateKind::Extend => "extend",
            TemplateKind::HypCond => "hypcond",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct FewShotExample {
    pub premise: String,
    pub hypothesis: Option<String>,
    pub facts: Vec<String>,
    pub missing: Vec<String>,
    pub fact: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PromptTemplate {
    pub name: String,
    pub kind: TemplateKind,
    pub examples: Vec<FewShotExample>,
}

impl PromptTemplate {
    pub fn instruction(&self) -> &'static str {
        match self.kind {
            TemplateKind::List | TemplateKind::Extend => LIST_INSTRUCTION,
            TemplateKind::HypCond => HYPCOND_INSTRUCTION,
        }
    }

    /// Hex SHA-256 of the template's name, kind and examples.
    pub fn content_hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("template serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }

    /// Parse the block format used by the files in `templates/`.
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let err = |message: String| Error::Template {
            path: origin.to_string(),
            message,
        };
        let mut blocks: Vec<Vec<&str>> = vec![Vec::new()];
        for line in text.lines() {
            let trimmed = line.trim_end();
            if trimmed.trim_start().starts_with('#') {
                continue;
            }
            if trimmed.trim() == "---" {
                blocks.push(Vec::new());
            } else if !trimmed.trim().is_empty() {
                blocks.last_mut().unwrap().push(trimmed);
            }
        }
        let header = blocks.remove(0);
        let mut name = None;
        let mut kind = None;
        for line in header {
            match line.split_once(':') {
                Some(("name", v)) => name = Some(v.trim().to_string()),
                Some(("kind", v)) => {
                    kind = Some(match v.trim() {
                        "list" => TemplateKind::List,
                        "extend" => TemplateKind::Extend,
                        "hypcond" => TemplateKind::HypCond,
                        other => return Err(err(format!("unknown kind {other:?}"))),
                    })
                }
                _ => return Err(err(format!("unexpected header line {line:?}"))),
            }
        }
        let kind = kind.ok_or_else(|| err("missing kind".into()))?;
        let name = name.unwrap_or_else(|| kind.as_str().to_string());

        let examples = blocks
            .into_iter()
            .filter(|b| !b.is_empty())
            .map(|b| parse_example(&b).map_err(&err))
            .collect::<Result<Vec<_>>>()?;
        let template = PromptTemplate { name, kind, examples };
        template.validate().map_err(err)?;
        Ok(template)
    }

    fn validate(&self) -> std::result::Result<(), String> {
        if self.examples.len() != FEW_SHOT_COUNT {
            return Err(format!(
                "expected {FEW_SHOT_COUNT} examples, found {}",
                self.examples.len()
            ));
        }
        for (i, ex) in self.examples.iter().enumerate() {
            let ok = !ex.premise.is_empty()
                && match self.kind {
                    TemplateKind::List => !ex.facts.is_empty(),
                    TemplateKind::Extend => !ex.facts.is_empty() && !ex.missing.is_empty(),
                    TemplateKind::HypCond => ex.hypothesis.is_some() && ex.fact.is_some(),
                };
            if !ok {
                return Err(format!("example {} is incomplete for a {} template", i + 1, self.kind.as_str()));
            }
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }
}

fn parse_example(lines: &[&str]) -> std::result::Result<FewShotExample, String> {
    let mut ex = FewShotExample::default();
    let mut list: Option<&mut Vec<String>> = None;
    for line in lines {
        if let Some(item) = line.trim_start().strip_prefix("- ") {
            match list.as_deref_mut() {
                Some(items) => items.push(item.trim().to_string()),
                None => return Err(format!("list item outside a list: {line:?}")),
            }
            continue;
        }
        let (key, value) = line
            .split_once(':')
            .ok_or_else(|| format!("expected 'key: value', found {line:?}"))?;
        let value = value.trim().to_string();
        list = None;
        match key.trim() {
            "premise" => ex.premise = value,
            "hypothesis" => ex.hypothesis = Some(value),
            "fact" => ex.fact = Some(value),
            "facts" => list = Some(&mut ex.facts),
            "missing" => list = Some(&mut ex.missing),
            other => return Err(format!("unknown key {other:?}")),
        }
    }
    Ok(ex)
}

fn push_numbered(out: &mut String, items: &[String]) {
    for (i, item) in items.iter().enumerate() {
        out.push_str(&format!("{}. {}\n", i + 1, item));
    }
}

/// Few-shot blocks, then the target premise (plus hypothesis or partial list
/// where the kind needs one), ending with the open instruction line.
pub fn build_prompt(
    template: &PromptTemplate,
    premise: &str,
    hypothesis: Option<&str>,
    existing_facts: Option<&[String]>,
) -> Result<String> {
    let missing = |field| Error::MissingPromptField {
        kind: template.kind.as_str(),
        field,
    };
    let mut out = String::new();
    match template.kind {
        TemplateKind::List => {
            for ex in &template.examples {
                out.push_str(&format!("Premise: {}\n{}\n", ex.premise, LIST_INSTRUCTION));
                push_numbered(&mut out, &ex.facts);
                out.push('\n');
            }
            out.push_str(&format!("Premise: {premise}\n{LIST_INSTRUCTION}\n"));
        }
        TemplateKind::Extend => {
            let existing = existing_facts.ok_or_else(|| missing("existing facts"))?;
            for ex in &template.examples {
                out.push_str(&format!("Premise: {}\n{}\n", ex.premise, LIST_INSTRUCTION));
                push_numbered(&mut out, &ex.facts);
                out.push_str(EXTEND_INSTRUCTION);
                out.push('\n');
                push_numbered(&mut out, &ex.missing);
                out.push('\n');
            }
            out.push_str(&format!("Premise: {premise}\n{LIST_INSTRUCTION}\n"));
            push_numbered(&mut out, existing);
            out.push_str(EXTEND_INSTRUCTION);
            out.push('\n');
        }
        TemplateKind::HypCond => {
            let hypothesis = hypothesis.ok_or_else(|| missing("a hypothesis"))?;
            for ex in &template.examples {
                out.push_str(&format!(
                    "Premise: {}\nHypothesis: {}\n{}\n{}\n\n",
                    ex.premise,
                    ex.hypothesis.as_deref().unwrap_or_default(),
                    HYPCOND_INSTRUCTION,
                    ex.fact.as_deref().unwrap_or_default()
                ));
            }
            out.push_str(&format!(
                "Premise: {premise}\nHypothesis: {hypothesis}\n{HYPCOND_INSTRUCTION}\n"
            ));
        }
    }
    Ok(out)
}

fn strip_marker(line: &str) -> &str {
    let line = line.trim();
    for bullet in ["-", "•", "*"] {
        if let Some(rest) = line.strip_prefix(bullet) {
            return rest.trim_start();
        }
    }
    let digits = line.len() - line.trim_start_matches(|c: char| c.is_ascii_digit()).len();
    if digits > 0 {
        let rest = &line[digits..];
        if let Some(rest) = rest.strip_prefix('.').or_else(|| rest.strip_prefix(')')) {
            return rest.trim_start();
        }
    }
    line
}

/// One fact per non-empty line with enumeration markers removed.
pub fn parse_fact_list(response: &str) -> Vec<String> {
    response
        .lines()
        .map(strip_marker)
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect()
}

/// First non-empty line only.
pub fn parse_single_fact(response: &str) -> Option<String> {
    parse_fact_list(response).into_iter().next()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateSet {
    pub list1: PromptTemplate,
    pub list2: PromptTemplate,
    pub extend: PromptTemplate,
    pub hypcond: PromptTemplate,
}

impl TemplateSet {
    pub fn builtin() -> Self {
        let parse = |text, name| PromptTemplate::parse(text, name).expect("built-in template is valid");
        TemplateSet {
            list1: parse(include_str!("../templates/list1.txt"), "list1.txt"),
            list2: parse(include_str!("../templates/list2.txt"), "list2.txt"),
            extend: parse(include_str!("../templates/extend.txt"), "extend.txt"),
            hypcond: parse(include_str!("../templates/hypcond.txt"), "hypcond.txt"),
        }
    }

    /// Loads `list1.txt`, `list2.txt`, `extend.txt` and `hypcond.txt` from `dir`.
    pub fn load_dir(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let set = TemplateSet {
            list1: PromptTemplate::load(dir.join("list1.txt"))?,
            list2: PromptTemplate::load(dir.join("list2.txt"))?,
            extend: PromptTemplate::load(dir.join("extend.txt"))?,
            hypcond: PromptTemplate::load(dir.join("hypcond.txt"))?,
        };
        let kinds = [
            (&set.list1, TemplateKind::List),
            (&set.list2, TemplateKind::List),
            (&set.extend, TemplateKind::Extend),
            (&set.hypcond, TemplateKind::HypCond),
        ];
        for (t, kind) in kinds {
            if t.kind != kind {
                return Err(Error::Template {
                    path: format!("{}/{}", dir.display(), t.name),
                    message: format!("expected kind {}", kind.as_str()),
                });
            }
        }
        Ok(set)
    }
}

/// A text-completion backend.
pub trait CompletionService: Send + Sync {
    fn complete(&self, prompt: &str, max_tokens: u32, temperature: f64) -> std::result::Result<String, String>;

    fn model_id(&self) -> String;
}

pub const DEFAULT_API_KEY_ENV: &str = "FGLR_API_KEY";

pub struct HttpService {
    url: String,
    model: String,
    api_key: Option<String>,
    agent: ureq::Agent,
}

impl HttpService {
    /// Reads the bearer token from `api_key_env` if it is set.
    pub fn new(url: impl Into<String>, model: impl Into<String>, api_key_env: &str) -> Self {
        HttpService {
            url: url.into(),
            model: model.into(),
            api_key: std::env::var(api_key_env).ok(),
            agent: ureq::Agent::new_with_defaults(),
        }
    }
}

#[derive(Deserialize)]
struct CompletionChoice {
    text: String,
}

#[derive(Deserialize)]
struct CompletionResponse {
    choices: Vec<CompletionChoice>,
}

impl CompletionService for HttpService {
    fn complete(&self, prompt: &str, max_tokens: u32, temperature: f64) -> std::result::Result<String, String> {
        let body = serde_json::json!({
            "model": self.model,
            "prompt": prompt,
            "max_tokens": max_tokens,
            "temperature": temperature,
        });
        let mut req = self.agent.post(&self.url);
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req.send_json(&body).map_err(|e| e.to_string())?;
        let parsed: CompletionResponse = resp.body_mut().read_json().map_err(|e| e.to_string())?;
        parsed
            .choices
            .into_iter()
            .next()
            .map(|c| c.text)
            .ok_or_else(|| "response has no choices".to_string())
    }

    fn model_id(&self) -> String {
        self.model.clone()
    }
}

type Responder = Box<dyn Fn(&str) -> std::result::Result<String, String> + Send + Sync>;

/// Offline stand-in that answers from a closure and counts calls.
pub struct MockService {
    responder: Responder,
    calls: AtomicUsize,
}

impl MockService {
    pub fn new(responder: impl Fn(&str) -> std::result::Result<String, String> + Send + Sync + 'static) -> Self {
        MockService {
            responder: Box::new(responder),
            calls: AtomicUsize::new(0),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl CompletionService for MockService {
    fn complete(&self, prompt: &str, _max_tokens: u32, _temperature: f64) -> std::result::Result<String, String> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        (self.responder)(prompt)
    }

    fn model_id(&self) -> String {
        "mock".to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub key: String,
    pub id: String,
    pub template: String,
    pub kind: TemplateKind,
    pub template_hash: String,
    pub raw_response: String,
    pub facts: Vec<String>,
    pub parse_failed: bool,
    pub timestamp: u64,
    pub model: String,
}

/// Append-only JSONL response cache. Failed parses are written for the
/// record but never served as hits.
#[derive(Debug, Default)]
pub struct GenerationCache {
    path: Option<PathBuf>,
    entries: Mutex<HashMap<String, GenerationRecord>>,
    writer: Mutex<Option<File>>,
}

impl GenerationCache {
    pub fn in_memory() -> Self {
        Self::default()
    }

    pub fn open(path: impl Into<PathBuf>) -> Result<Self> {
        let path = path.into();
        let mut entries = HashMap::new();
        if path.exists() {
            let file = File::open(&path).map_err(|e| Error::io(&path, e))?;
            for (i, line) in BufReader::new(file).lines().enumerate() {
                let line = line.map_err(|e| Error::io(&path, e))?;
                if line.trim().is_empty() {
                    continue;
                }
                let rec: GenerationRecord = serde_json::from_str(&line).map_err(|e| Error::MalformedLine {
                    path: path.clone(),
                    line: i + 1,
                    message: e.to_string(),
                })?;
                if !rec.parse_failed {
                    entries.insert(rec.key.clone(), rec);
                }
            }
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| Error::io(&path, e))?;
        Ok(GenerationCache {
            path: Some(path),
            entries: Mutex::new(entries),
            writer: Mutex::new(Some(file)),
        })
    }

    pub fn get(&self, key: &str) -> Option<GenerationRecord> {
        self.entries.lock().unwrap().get(key).cloned()
    }

    pub fn len(&self) -> usize {
        self.entries.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn insert(&self, record: GenerationRecord) -> Result<()> {
        let mut writer = self.writer.lock().unwrap();
        if let Some(file) = writer.as_mut() {
            let path = self.path.as_deref().unwrap_or(Path::new("<cache>"));
            let line = serde_json::to_string(&record)?;
            writeln!(file, "{line}").map_err(|e| Error::io(path, e))?;
            file.flush().map_err(|e| Error::io(path, e))?;
        }
        if !record.parse_failed {
            self.entries.lock().unwrap().insert(record.key.clone(), record);
        }
        Ok(())
    }
}

pub fn cache_key(id: &str, template: &PromptTemplate, prompt: &str) -> String {
    let mut h = Sha256::new();
    for part in [id, template.name.as_str(), template.content_hash().as_str(), prompt] {
        h.update(part.as_bytes());
        h.update([0u8]);
    }
    hex::encode(h.finalize())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenerationConfig {
    pub max_tokens: u32,
    pub temperature: f64,
    pub attempts: u32,
    pub base_delay: Duration,
    /// Fail on cache misses instead of calling the service.
    pub offline: bool,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        GenerationConfig {
            max_tokens: 256,
            temperature: 0.0,
            attempts: 3,
            base_delay: Duration::from_millis(500),
            offline: false,
        }
    }
}

/// Generated facts per provenance, before any combination.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GeneratedFacts {
    pub list1: Vec<String>,
    pub list2: Vec<String>,
    pub extension: Vec<String>,
    pub hypcond: Vec<String>,
}

impl GeneratedFacts {
    fn bundle(texts: &[String], provenance: Provenance) -> Result<FactBundle> {
        Ok(FactBundle::new(
            texts
                .iter()
                .map(|t| Fact::new(t.clone(), provenance))
                .collect::<Result<_>>()?,
        ))
    }

    /// All generated facts, uncombined, in canonical group order.
    pub fn raw_bundle(&self) -> Result<FactBundle> {
        let mut facts = Vec::new();
        for (texts, p) in [
            (&self.list1, Provenance::List1),
            (&self.list2, Provenance::List2),
            (&self.extension, Provenance::Extension),
            (&self.hypcond, Provenance::HypCond),
        ] {
            facts.extend(Self::bundle(texts, p)?.facts().iter().cloned());
        }
        Ok(FactBundle::new(facts))
    }
}

pub struct FactGenerator<'a> {
    templates: TemplateSet,
    service: &'a dyn CompletionService,
    hypcond_service: Option<&'a dyn CompletionService>,
    cache: &'a GenerationCache,
    config: GenerationConfig,
}

impl<'a> FactGenerator<'a> {
    pub fn new(
        templates: TemplateSet,
        service: &'a dyn CompletionService,
        cache: &'a GenerationCache,
        config: GenerationConfig,
    ) -> Self {
        FactGenerator {
            templates,
            service,
            hypcond_service: None,
            cache,
            config,
        }
    }

    /// Use a different backend for hypothesis-conditioned prompts.
    pub fn with_hypcond_service(mut self, service: &'a dyn CompletionService) -> Self {
        self.hypcond_service = Some(service);
        self
    }

    fn service_for(&self, kind: TemplateKind) -> &'a dyn CompletionService {
        match (kind, self.hypcond_service) {
            (TemplateKind::HypCond, Some(s)) => s,
            _ => self.service,
        }
    }

    fn call_with_retry(&self, service: &dyn CompletionService, prompt: &str) -> Result<String> {
        let mut last = String::new();
        for attempt in 0..self.config.attempts {
            if attempt > 0 {
                std::thread::sleep(self.config.base_delay * 2u32.pow(attempt - 1));
            }
            match service.complete(prompt, self.config.max_tokens, self.config.temperature)
            {
                Ok(text) => return Ok(text),
                Err(e) => {
                    log::warn!("generation attempt {} failed: {e}", attempt + 1);
                    last = e;
                }
            }
        }
        Err(Error::Service {
            attempts: self.config.attempts,
            message: last,
        })
    }

    fn run(
        &self,
        obs: &Observation,
        template: &PromptTemplate,
        hypothesis: Option<&str>,
        existing: Option<&[String]>,
    ) -> Result<Vec<String>> {
        let prompt = build_prompt(template, &obs.premise, hypothesis, existing)?;
        let key = cache_key(&obs.id, template, &prompt);
        if let Some(hit) = self.cache.get(&key) {
            return Ok(hit.facts);
        }
        if self.config.offline {
            return Err(Error::CacheMiss {
                id: obs.id.clone(),
                kind: template.name.clone(),
            });
        }
        let service = self.service_for(template.kind);
        let raw = self.call_with_retry(service, &prompt)?;
        let facts = match template.kind {
            TemplateKind::HypCond => parse_single_fact(&raw).into_iter().collect(),
            _ => parse_fact_list(&raw),
        };
        let parse_failed = facts.is_empty();
        self.cache.insert(GenerationRecord {
            key,
            id: obs.id.clone(),
            template: template.name.clone(),
            kind: template.kind,
            template_hash: template.content_hash(),
            raw_response: raw.clone(),
            facts: facts.clone(),
            parse_failed,
            timestamp: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            model: service.model_id(),
        })?;
        if parse_failed {
            return Err(Error::ParseFailed {
                id: obs.id.clone(),
                kind: template.name.clone(),
                raw,
            });
        }
        Ok(facts)
    }

    /// Generate the lists a strategy needs without combining them.
    pub fn generate_lists(&self, obs: &Observation, strategy: FactStrategy, split: Split) -> Result<GeneratedFacts> {
        if strategy == FactStrategy::HypCond && split == Split::Train {
            return Err(Error::StrategyNotAllowed {
                strategy: strategy.to_string(),
                reason: "hypothesis-conditioned facts are only generated for evaluation data",
            });
        }
        let t = &self.templates;
        let mut out = GeneratedFacts::default();
        let needs_list1 = !matches!(strategy, FactStrategy::List2);
        let needs_list2 = matches!(strategy, FactStrategy::List2 | FactStrategy::FactComb | FactStrategy::HypCond);
        if needs_list1 {
            out.list1 = self.run(obs, &t.list1, None, None)?;
        }
        if needs_list2 {
            out.list2 = self.run(obs, &t.list2, None, None)?;
        }
        if strategy == FactStrategy::FactExt {
            out.extension = self.run(obs, &t.extend, None, Some(&out.list1))?;
        }
        if strategy == FactStrategy::HypCond {
            out.hypcond = self.run(obs, &t.hypcond, Some(&obs.hypothesis), None)?;
        }
        Ok(out)
    }

    /// Generate and combine facts for one observation.
    pub fn generate_bundle(&self, obs: &Observation, strategy: FactStrategy, split: Split) -> Result<FactBundle> {
        let g = self.generate_lists(obs, strategy, split)?;
        let list1 = GeneratedFacts::bundle(&g.list1, Provenance::List1)?;
        let list2 = GeneratedFacts::bundle(&g.list2, Provenance::List2)?;
        Ok(match strategy {
            FactStrategy::List1 => list1,
            FactStrategy::List2 => list2,
            FactStrategy::FactComb => combine_bundles(&list1, &[list2], CombineStrategy::FactComb),
            FactStrategy::FactExt => combine_bundles(
                &list1,
                &[GeneratedFacts::bundle(&g.extension, Provenance::Extension)?],
                CombineStrategy::FactExt,
            ),
            FactStrategy::HypCond => {
                let comb = combine_bundles(&list1, &[list2], CombineStrategy::FactComb);
                combine_bundles(
                    &comb,
                    &[GeneratedFacts::bundle(&g.hypcond, Provenance::HypCond)?],
                    CombineStrategy::HypCondAttach,
                )
            }
        })
    }

    /// Generate lists for many observations with at most `max_in_flight`
    /// concurrent service calls. Output keeps input order and carries the
    /// uncombined facts so later runs can pick any strategy.
    pub fn augment_dataset(
        &self,
        observations: &[Observation],
        strategy: FactStrategy,
        split: Split,
        max_in_flight: usize,
    ) -> Result<Vec<Observation>> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(max_in_flight.max(1))
            .build()
            .map_err(|e| Error::Config(e.to_string()))?;
        pool.install(|| {
            observations
                .par_iter()
                .map(|obs| {
                    let generated = self.generate_lists(obs, strategy, split)?.raw_bundle()?;
                    let mut merged: Vec<Fact> = obs.bundle.facts().to_vec();
                    merged.extend(generated.facts().iter().cloned());
                    Ok(Observation {
                        bundle: FactBundle::new(merged),
                        ..obs.clone()
                    })
                })
                .collect()
        })
    }
}
