//! Command-line front end.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage error. Flags are
//! checked before any file is read or written.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::data_model::{load_dataset, select_all, write_dataset, FactStrategy, NliLabel, Observation, Split};
use crate::encoder::{from_config, Encoder, EncoderConfig, HashingEncoder, DEFAULT_HASH_WIDTH};
use crate::error::{Error, Result};
use crate::generator_client::{
    FactGenerator, GenerationCache, GenerationConfig, HttpService, TemplateSet, DEFAULT_API_KEY_ENV,
};
use crate::logic_head::{Checkpoint, Head};
use crate::metrics::{evaluate_facts, load_fact_annotations, predict_all, report_from_predictions};
use crate::rule_engine::{Prediction, DEFAULT_THRESHOLD};
use crate::trainer::{train, write_log_csv, OptimizerKind, TrainConfig};

#[derive(Debug, Parser)]
#[command(name = "fglr", version, about = "Fact-level logical reasoning for NLI")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate fact lists for every observation and write an augmented dataset.
    GenerateFacts(GenerateArgs),
    /// Train a checkpoint from labeled observations.
    Train(TrainArgs),
    /// Evaluate a checkpoint and write a metrics report.
    Eval(EvalArgs),
    /// Write one prediction per observation as JSONL.
    Predict(PredictArgs),
    /// Report which facts decided each prediction.
    Explain(ExplainArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitArg {
    Train,
    Eval,
}

impl From<SplitArg> for Split {
    fn from(s: SplitArg) -> Split {
        match s {
            SplitArg::Train => Split::Train,
            SplitArg::Eval => Split::Eval,
        }
    }
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Input observations (JSONL).
    #[arg(long)]
    pub data: PathBuf,
    /// Which fact lists to generate.
    #[arg(long, value_enum, default_value_t = FactStrategy::FactComb)]
    pub facts_strategy: FactStrategy,
    /// Dataset split; hypcond generation is refused for train.
    #[arg(long, value_enum, default_value_t = SplitArg::Eval)]
    pub split: SplitArg,
    /// Output dataset (JSONL).
    #[arg(long)]
    pub out: PathBuf,
    /// Response cache (JSONL, appended).
    #[arg(long, default_value = "generation_cache.jsonl")]
    pub cache: PathBuf,
    /// Fail on cache misses instead of calling the service.
    #[arg(long)]
    pub offline: bool,
    /// Directory with list1.txt, list2.txt, extend.txt and hypcond.txt.
    #[arg(long)]
    pub templates: Option<PathBuf>,
    /// Completion endpoint; falls back to $FGLR_SERVICE_URL.
    #[arg(long, env = "FGLR_SERVICE_URL")]
    pub service_url: Option<String>,
    /// Model for list and extension prompts.
    #[arg(long, default_value = "text-curie-001")]
    pub model: String,
    /// Model for hypothesis-conditioned prompts.
    #[arg(long, default_value = "text-davinci-003")]
    pub hypcond_model: String,
    /// Environment variable holding the API key.
    #[arg(long, default_value = DEFAULT_API_KEY_ENV)]
    pub api_key_env: String,
    #[arg(long, default_value_t = 256)]
    pub max_tokens: u32,
    #[arg(long, default_value_t = 0.0)]
    pub temperature: f64,
    /// Maximum concurrent service requests.
    #[arg(long, default_value_t = 4)]
    pub max_in_flight: usize,
    /// Base retry delay in milliseconds (doubles per attempt).
    #[arg(long, default_value_t = 500)]
    pub retry_delay_ms: u64,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Labeled training observations (JSONL).
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value_t = FactStrategy::List1)]
    pub facts_strategy: FactStrategy,
    /// TOML training config; flags below override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long, value_enum)]
    pub optimizer: Option<OptimizerKind>,
    /// Hashing encoder width (ignored with --embeddings).
    #[arg(long, default_value_t = DEFAULT_HASH_WIDTH)]
    pub hash_width: usize,
    /// Precomputed fact representations (JSONL of id, fact_index, vector).
    #[arg(long, requires = "embedding_dim")]
    pub embeddings: Option<PathBuf>,
    #[arg(long)]
    pub embedding_dim: Option<usize>,
    /// Checkpoint output (JSON).
    #[arg(long)]
    pub out: PathBuf,
    /// Per-epoch CSV log; defaults to <out>.log.csv.
    #[arg(long)]
    pub log: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Observations (JSONL).
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long, value_enum, default_value_t = FactStrategy::List1)]
    pub facts_strategy: FactStrategy,
    /// Decision threshold on raw attention.
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    pub threshold: f64,
    /// Embedding file for checkpoints trained on precomputed vectors.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Fact-level gold labels (JSONL of id, fact_index, label).
    #[arg(long)]
    pub fact_labels: Option<PathBuf>,
    /// Also print an aligned table to stderr.
    #[arg(long)]
    pub table: bool,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ExplainFormat {
    Text,
    Json,
}

#[derive(Debug, Args)]
pub struct ExplainArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, value_enum, default_value_t = ExplainFormat::Text)]
    pub format: ExplainFormat,
    /// Only explain this observation.
    #[arg(long)]
    pub id: Option<String>,
}

/// Parse arguments, run, and map the outcome to an exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    if let Err(msg) = validate(&cli.command) {
        eprintln!("error: {msg}");
        return 2;
    }
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn validate(command: &Command) -> std::result::Result<(), String> {
    let threshold_ok = |t: f64| {
        if (0.0..1.0).contains(&t) {
            Ok(())
        } else {
            Err(format!("--threshold must be in [0, 1), got {t}"))
        }
    };
    match command {
        Command::GenerateFacts(a) => {
            if a.facts_strategy == FactStrategy::HypCond && a.split == SplitArg::Train {
                return Err("hypcond facts are evaluation-only; use --split eval".into());
            }
            if a.service_url.is_none() && !a.offline {
                return Err("--service-url (or FGLR_SERVICE_URL) is required unless --offline".into());
            }
            if a.max_in_flight == 0 {
                return Err("--max-in-flight must be >= 1".into());
            }
            if !(a.temperature >= 0.0) {
                return Err("--temperature must be >= 0".into());
            }
            if a.data == a.out {
                return Err("--out must differ from --data".into());
            }
        }
        Command::Train(a) => {
            if a.facts_strategy == FactStrategy::HypCond {
                return Err("hypcond facts are evaluation-only and cannot be used for training".into());
            }
            if a.embeddings.is_none() && (a.hash_width < 2 || a.hash_width % 2 != 0) {
                return Err(format!("--hash-width must be an even number >= 2, got {}", a.hash_width));
            }
            if a.embedding_dim == Some(0) {
                return Err("--embedding-dim must be >= 1".into());
            }
            if a.data == a.out {
                return Err("--out must differ from --data".into());
            }
        }
        Command::Eval(a) => threshold_ok(a.model.threshold)?,
        Command::Predict(a) => threshold_ok(a.model.threshold)?,
        Command::Explain(a) => threshold_ok(a.model.threshold)?,
    }
    Ok(())
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::GenerateFacts(a) => generate_facts(a),
        Command::Train(a) => train_cmd(a),
        Command::Eval(a) => eval_cmd(a),
        Command::Predict(a) => predict_cmd(a),
        Command::Explain(a) => explain_cmd(a),
    }
}

fn write_output(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| Error::io(path, e)),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .map_err(|e| Error::io("<stdout>", e))
        }
    }
}

fn generate_facts(a: GenerateArgs) -> Result<()> {
    let templates = match &a.templates {
        Some(dir) => TemplateSet::load_dir(dir)?,
        None => TemplateSet::builtin(),
    };
    let split = a.split.into();
    let data = load_dataset(&a.data, split)?;
    let url = a.service_url.clone().unwrap_or_default();
    let list_service = HttpService::new(url.clone(), a.model.clone(), &a.api_key_env);
    let hypcond_service = HttpService::new(url, a.hypcond_model.clone(), &a.api_key_env);
    let cache = GenerationCache::open(&a.cache)?;
    let config = GenerationConfig {
        max_tokens: a.max_tokens,
        temperature: a.temperature,
        base_delay: Duration::from_millis(a.retry_delay_ms),
        offline: a.offline,
        ..GenerationConfig::default()
    };
    let generator =
        FactGenerator::new(templates, &list_service, &cache, config).with_hypcond_service(&hypcond_service);
    let augmented = generator.augment_dataset(&data, a.facts_strategy, split, a.max_in_flight)?;
    write_dataset(&a.out, &augmented)?;
    log::info!("wrote {} observations to {}", augmented.len(), a.out.display());
    Ok(())
}

fn train_cmd(a: TrainArgs) -> Result<()> {
    let mut config = match &a.config {
        Some(path) => TrainConfig::load(path)?,
        None => TrainConfig::default(),
    };
    if let Some(v) = a.seed {
        config.seed = v;
    }
    if let Some(v) = a.epochs {
        config.epochs = v;
    }
    if let Some(v) = a.lr {
        config.learning_rate = v;
    }
    if let Some(v) = a.hidden {
        config.hidden = v;
    }
    if let Some(v) = a.batch_size {
        config.batch_size = v;
    }
    if let Some(v) = a.optimizer {
        config.optimizer = v;
    }
    config.validate()?;

    let encoder: Box<dyn Encoder> = match (&a.embeddings, a.embedding_dim) {
        (Some(path), Some(dim)) => from_config(EncoderConfig::Precomputed { dim }, Some(path))?,
        _ => Box::new(HashingEncoder::new(a.hash_width)?),
    };
    let data = select_all(&load_dataset(&a.data, Split::Train)?, a.facts_strategy, Split::Train)?;
    let outcome = train(&data, encoder.as_ref(), &config)?;
    outcome.checkpoint.save(&a.out)?;
    let log_path = a.log.clone().unwrap_or_else(|| {
        let mut p = a.out.clone().into_os_string();
        p.push(".log.csv");
        PathBuf::from(p)
    });
    write_log_csv(&log_path, &outcome.history)?;
    if let Some(last) = outcome.history.last() {
        eprintln!(
            "trained {} epochs: loss {:.6}, train accuracy {:.4}",
            last.epoch, last.total_loss, last.train_accuracy
        );
    }
    Ok(())
}

struct Loaded {
    checkpoint: Checkpoint,
    encoder: Box<dyn Encoder>,
    data: Vec<Observation>,
}

fn load_model(a: &ModelArgs) -> Result<Loaded> {
    let checkpoint = Checkpoint::load(&a.checkpoint)?;
    let config = checkpoint
        .encoder
        .ok_or_else(|| Error::Checkpoint("checkpoint does not record its encoder".into()))?;
    let encoder = from_config(config, a.embeddings.as_deref())?;
    if encoder.dim() != checkpoint.params.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: checkpoint.params.input_dim(),
            found: encoder.dim(),
        });
    }
    let data = select_all(&load_dataset(&a.data, Split::Eval)?, a.facts_strategy, Split::Eval)?;
    Ok(Loaded {
        checkpoint,
        encoder,
        data,
    })
}

fn eval_cmd(a: EvalArgs) -> Result<()> {
    let m = load_model(&a.model)?;
    let annotations = a.fact_labels.as_ref().map(load_fact_annotations).transpose()?;
    if let Some(obs) = m.data.iter().find(|o| o.label.is_none()) {
        return Err(Error::Unlabeled(obs.id.clone()));
    }
    let params = &m.checkpoint.params;
    let predictions = predict_all(&m.data, params, m.encoder.as_ref(), a.model.threshold)?;
    let mut report = report_from_predictions(&m.data, &predictions)?;
    if let Some(ann) = annotations {
        report.facts = Some(evaluate_facts(
            &m.data,
            &ann,
            params,
            m.encoder.as_ref(),
            a.model.threshold,
        )?);
    }
    if a.table {
        eprint!("{}", report.to_table());
    }
    let mut json = report.to_json()?;
    json.push('\n');
    write_output(a.model.out.as_deref(), &json)
}

#[derive(Serialize)]
struct PredictionRecord<'a> {
    id: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    gold: Option<NliLabel>,
    #[serde(flatten)]
    prediction: &'a Prediction,
}

fn predict_cmd(a: PredictArgs) -> Result<()> {
    let m = load_model(&a.model)?;
    let predictions = predict_all(&m.data, &m.checkpoint.params, m.encoder.as_ref(), a.model.threshold)?;
    let mut out = String::new();
    for (obs, prediction) in m.data.iter().zip(&predictions) {
        out.push_str(&serde_json::to_string(&PredictionRecord {
            id: &obs.id,
            gold: obs.label,
            prediction,
        })?);
        out.push('\n');
    }
    write_output(a.model.out.as_deref(), &out)
}

#[derive(Debug, Serialize)]
pub struct ResponsibleFact {
    pub index: usize,
    pub text: String,
    pub head: &'static str,
    pub raw_attention: f64,
}

#[derive(Debug, Serialize)]
pub struct Explanation {
    pub id: String,
    pub premise: String,
    pub hypothesis: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gold: Option<NliLabel>,
    pub predicted: NliLabel,
    pub responsible_facts: Vec<ResponsibleFact>,
    /// Every fact with both raw attention values, in bundle order.
    pub facts: Vec<(String, f64, f64)>,
}

pub fn explain(obs: &Observation, prediction: &Prediction) -> Explanation {
    let head = match prediction.predicted {
        NliLabel::Contradiction => Head::Contradiction,
        _ => Head::Entailment,
    };
    let raw = &prediction.scores.head(head).raw_attention;
    let texts: Vec<&str> = obs.fact_texts().collect();
    Explanation {
        id: obs.id.clone(),
        premise: obs.premise.clone(),
        hypothesis: obs.hypothesis.clone(),
        gold: obs.label,
        predicted: prediction.predicted,
        responsible_facts: prediction
            .responsible_facts()
            .iter()
            .map(|&i| ResponsibleFact {
                index: i,
                text: texts[i].to_string(),
                head: match head {
                    Head::Contradiction => "contradiction",
                    Head::Entailment => "entailment",
                },
                raw_attention: raw[i],
            })
            .collect(),
        facts: texts
            .iter()
            .enumerate()
            .map(|(i, t)| {
                (
                    t.to_string(),
                    prediction.scores.contradiction.raw_attention[i],
                    prediction.scores.entailment.raw_attention[i],
                )
            })
            .collect(),
    }
}

pub fn explanation_text(e: &Explanation) -> String {
    let mut s = format!("[{}] predicted {}", e.id, e.predicted);
    if let Some(gold) = e.gold {
        s.push_str(&format!(" (gold {gold})"));
    }
    s.push('\n');
    s.push_str(&format!("  premise:    {}\n  hypothesis: {}\n", e.premise, e.hypothesis));
    if e.responsible_facts.is_empty() {
        s.push_str("  no fact passes the threshold for either head\n");
    } else {
        s.push_str("  responsible facts:\n");
        for f in &e.responsible_facts {
            s.push_str(&format!(
                "    #{} ({} {:.3}) {}\n",
                f.index, f.head, f.raw_attention, f.text
            ));
        }
    }
    s.push_str("  all facts (contradiction, entailment):\n");
    for (i, (text, c, en)) in e.facts.iter().enumerate() {
        s.push_str(&format!("    #{i} {c:.3} {en:.3} {text}\n"));
    }
    s
}

fn explain_cmd(a: ExplainArgs) -> Result<()> {
    let m = load_model(&a.model)?;
    let data: Vec<Observation> = match &a.id {
        Some(id) => {
            let found: Vec<_> = m.data.iter().filter(|o| &o.id == id).cloned().collect();
            if found.is_empty() {
                return Err(Error::Config(format!("no observation with id {id:?}")));
            }
            found
        }
        None => m.data,
    };
    let predictions = predict_all(&data, &m.checkpoint.params, m.encoder.as_ref(), a.model.threshold)?;
    let mut out = String::new();
    for (obs, p) in data.iter().zip(&predictions) {
        let e = explain(obs, p);
        match a.format {
            ExplainFormat::Text => {
                out.push_str(&explanation_text(&e));
                out.push('\n');
            }
            ExplainFormat::Json => {
                out.push_str(&serde_json::to_string(&e)?);
                out.push('\n');
            }
        }
    }
    write_output(a.model.out.as_deref(), &out)
}
