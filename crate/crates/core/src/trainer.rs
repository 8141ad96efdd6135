//! Observation- and fact-level losses, their analytic gradients, and the
//! optimisation loop.
//!
//! Per supervised head with target `y`:
//!
//! ```text
//! obs_loss  = (sigmoid(w3 * obs_logit + b3) - y)^2
//! fact_loss = (max_i raw_i - y)^2
//! total     = lambda_obs * sum(obs_loss) + lambda_fact * sum(fact_loss)
//! ```
//!
//! The max routes its subgradient to the first fact attaining it.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data_model::Observation;
use crate::encoder::{Encoder, FactPair, Representation};
use crate::error::{Error, Result};
use crate::logic_head::{
    head_forward, Checkpoint, FactScores, Head, HeadParams, HeadTrace, LogicHeadParams,
    ObservationLogits, DEFAULT_HIDDEN,
};
use crate::rule_engine::{classify, RuleSet, SupervisionTargets, DEFAULT_THRESHOLD};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub lambda_obs: f64,
    pub lambda_fact: f64,
    pub optimizer: OptimizerKind,
    pub hidden: usize,
    pub forbid_entailment_under_contradiction: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            epochs: 20,
            batch_size: 1,
            seed: 0,
            lambda_obs: 1.0,
            lambda_fact: 1.0,
            optimizer: OptimizerKind::Adam,
            hidden: DEFAULT_HIDDEN,
            forbid_entailment_under_contradiction: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return bad("learning_rate must be > 0");
        }
        if self.epochs == 0 {
            return bad("epochs must be >= 1");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be >= 1");
        }
        if !(self.lambda_obs >= 0.0) || !(self.lambda_fact >= 0.0) {
            return bad("loss weights must be >= 0");
        }
        if self.hidden == 0 {
            return bad("hidden must be >= 1");
        }
        Ok(())
    }

    pub fn rules(&self) -> RuleSet {
        RuleSet {
            forbid_entailment_under_contradiction: self.forbid_entailment_under_contradiction,
        }
    }

    /// Parse the TOML config file; absent keys take their defaults.
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: TrainConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct LossBreakdown {
    pub obs_loss_c: f64,
    pub fact_loss_c: f64,
    pub obs_loss_e: f64,
    pub fact_loss_e: f64,
    pub total: f64,
    pub lambda_obs: f64,
    pub lambda_fact: f64,
}

impl LossBreakdown {
    fn set(&mut self, head: Head, obs: f64, fact: f64) {
        match head {
            Head::Contradiction => {
                self.obs_loss_c = obs;
                self.fact_loss_c = fact;
            }
            Head::Entailment => {
                self.obs_loss_e = obs;
                self.fact_loss_e = fact;
            }
        }
    }

    fn finish(mut self, lambda_obs: f64, lambda_fact: f64) -> Self {
        self.lambda_obs = lambda_obs;
        self.lambda_fact = lambda_fact;
        self.total = lambda_obs * (self.obs_loss_c + self.obs_loss_e)
            + lambda_fact * (self.fact_loss_c + self.fact_loss_e);
        self
    }

    fn is_finite(&self) -> bool {
        [self.obs_loss_c, self.fact_loss_c, self.obs_loss_e, self.fact_loss_e, self.total]
            .iter()
            .all(|v| v.is_finite())
    }
}

fn argmax_first(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

fn head_target(targets: &SupervisionTargets, head: Head) -> Option<f64> {
    match head {
        Head::Contradiction => targets.contradiction.value(),
        Head::Entailment => targets.entailment.value(),
    }
}

pub fn compute_loss(
    scores: &FactScores,
    logits: &ObservationLogits,
    targets: &SupervisionTargets,
    config: &TrainConfig,
) -> LossBreakdown {
    let mut out = LossBreakdown::default();
    for head in Head::BOTH {
        if let Some(y) = head_target(targets, head) {
            let raw = &scores.head(head).raw_attention;
            let max_raw = raw[argmax_first(raw)];
            let obs = (logits.head(head).probability - y).powi(2);
            out.set(head, obs, (max_raw - y).powi(2));
        }
    }
    out.finish(config.lambda_obs, config.lambda_fact)
}

/// Gradient of the total loss, one [`HeadParams`]-shaped buffer per head.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub contradiction: HeadParams,
    pub entailment: HeadParams,
}

impl Gradients {
    pub fn zeros(d: usize, h: usize) -> Self {
        Gradients {
            contradiction: HeadParams::zeros(d, h),
            entailment: HeadParams::zeros(d, h),
        }
    }

    pub fn head(&self, head: Head) -> &HeadParams {
        match head {
            Head::Contradiction => &self.contradiction,
            Head::Entailment => &self.entailment,
        }
    }

    fn head_mut(&mut self, head: Head) -> &mut HeadParams {
        match head {
            Head::Contradiction => &mut self.contradiction,
            Head::Entailment => &mut self.entailment,
        }
    }

    /// Same layout as [`LogicHeadParams::to_flat`].
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        self.contradiction.write_flat(&mut out);
        self.entailment.write_flat(&mut out);
        out
    }
}

/// Backprop one head's loss into `grad` (accumulating).
fn head_backward(
    facts: &[Representation],
    params: &HeadParams,
    trace: &HeadTrace,
    y: f64,
    config: &TrainConfig,
    grad: &mut HeadParams,
) {
    let d = params.input_dim();
    let scores = &trace.scores;
    let p = trace.output.probability;
    let obs_logit = trace.output.logit;

    // d total / d (w3 * obs_logit + b3)
    let g_pre_obs = config.lambda_obs * 2.0 * (p - y) * p * (1.0 - p);
    grad.w3 += g_pre_obs * obs_logit;
    grad.b3 += g_pre_obs;
    let g_obs_logit = g_pre_obs * params.w3;

    let top = argmax_first(&scores.raw_attention);
    for (i, r) in facts.iter().enumerate() {
        let r = r.values();
        let raw = scores.raw_attention[i];
        let attn = scores.norm_attention[i];

        let g_logit = g_obs_logit * attn;
        for (g, x) in grad.w_logit.iter_mut().zip(r) {
            *g += g_logit * x;
        }
        grad.b_logit += g_logit;

        // d obs_logit / d raw_i = (logit_i - obs_logit) / sum_k raw_k, and
        // d raw_i / d s_i = raw_i (1 - raw_i); combined without dividing by the sum.
        let mut g_pre = g_obs_logit * attn * (1.0 - raw) * (scores.logits[i] - obs_logit);
        if i == top {
            g_pre += config.lambda_fact * 2.0 * (raw - y) * raw * (1.0 - raw);
        }
        if g_pre == 0.0 {
            continue;
        }

        let hidden = &trace.hidden[i];
        grad.b2 += g_pre;
        for (j, (&u, &w2)) in hidden.iter().zip(&params.w2).enumerate() {
            grad.w2[j] += g_pre * u;
            let g_z = g_pre * w2 * (1.0 - u * u);
            grad.b1[j] += g_z;
            for (g, x) in grad.w1[j * d..(j + 1) * d].iter_mut().zip(r) {
                *g += g_z * x;
            }
        }
    }
}

/// Loss and analytic gradient for one observation's encoded facts.
pub fn gradients(
    facts: &[Representation],
    params: &LogicHeadParams,
    targets: &SupervisionTargets,
    config: &TrainConfig,
) -> Result<(LossBreakdown, Gradients)> {
    let mut grads = Gradients::zeros(params.input_dim(), params.hidden());
    let mut loss = LossBreakdown::default();
    for head in Head::BOTH {
        let Some(y) = head_target(targets, head) else {
            continue;
        };
        let head_params = params.head(head);
        let trace = head_forward(facts, head_params)?;
        let raw = &trace.scores.raw_attention;
        loss.set(
            head,
            (trace.output.probability - y).powi(2),
            (raw[argmax_first(raw)] - y).powi(2),
        );
        head_backward(facts, head_params, &trace, y, config, grads.head_mut(head));
    }
    Ok((loss.finish(config.lambda_obs, config.lambda_fact), grads))
}

/// Total loss only; the reference function for finite-difference checks.
pub fn total_loss(
    facts: &[Representation],
    params: &LogicHeadParams,
    targets: &SupervisionTargets,
    config: &TrainConfig,
) -> Result<f64> {
    let (scores, logits) = crate::logic_head::forward(facts, params)?;
    Ok(compute_loss(&scores, &logits, targets, config).total)
}

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

enum Optimizer {
    Sgd {
        lr: f64,
    },
    Adam {
        lr: f64,
        step: i32,
        m: Vec<f64>,
        v: Vec<f64>,
    },
}

impl Optimizer {
    fn new(kind: OptimizerKind, lr: f64, n: usize) -> Self {
        match kind {
            OptimizerKind::Sgd => Optimizer::Sgd { lr },
            OptimizerKind::Adam => Optimizer::Adam {
                lr,
                step: 0,
                m: vec![0.0; n],
                v: vec![0.0; n],
            },
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        match self {
            Optimizer::Sgd { lr } => {
                for (p, g) in params.iter_mut().zip(grad) {
                    *p -= *lr * g;
                }
            }
            Optimizer::Adam { lr, step, m, v } => {
                *step += 1;
                let bc1 = 1.0 - ADAM_BETA1.powi(*step);
                let bc2 = 1.0 - ADAM_BETA2.powi(*step);
                for i in 0..params.len() {
                    m[i] = ADAM_BETA1 * m[i] + (1.0 - ADAM_BETA1) * grad[i];
                    v[i] = ADAM_BETA2 * v[i] + (1.0 - ADAM_BETA2) * grad[i] * grad[i];
                    let m_hat = m[i] / bc1;
                    let v_hat = v[i] / bc2;
                    params[i] -= *lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
                }
            }
        }
    }
}

/// Single plain gradient-descent step on one observation.
pub fn sgd_step(params: &mut LogicHeadParams, grads: &Gradients, learning_rate: f64) {
    let mut flat = params.to_flat();
    for (p, g) in flat.iter_mut().zip(grads.to_flat()) {
        *p -= learning_rate * g;
    }
    params.set_flat(&flat);
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub total_loss: f64,
    pub obs_loss_c: f64,
    pub fact_loss_c: f64,
    pub obs_loss_e: f64,
    pub fact_loss_e: f64,
    pub train_accuracy: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub history: Vec<EpochMetrics>,
}

/// Encode every fact of an observation.
pub fn encode_observation(obs: &Observation, encoder: &dyn Encoder) -> Result<Vec<Representation>> {
    obs.bundle
        .facts()
        .iter()
        .enumerate()
        .map(|(i, fact)| {
            let r = encoder.encode(&FactPair {
                observation_id: &obs.id,
                fact_index: i,
                fact: fact.text(),
                hypothesis: &obs.hypothesis,
            })?;
            if r.dim() != encoder.dim() {
                return Err(Error::DimensionMismatch {
                    expected: encoder.dim(),
                    found: r.dim(),
                });
            }
            Ok(r)
        })
        .collect()
}

pub fn train(dataset: &[Observation], encoder: &dyn Encoder, config: &TrainConfig) -> Result<TrainOutcome> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::EmptyInput("training dataset"));
    }
    let rules = config.rules();
    let mut examples = Vec::with_capacity(dataset.len());
    for obs in dataset {
        let label = obs.label.ok_or_else(|| Error::Unlabeled(obs.id.clone()))?;
        if obs.bundle.facts().iter().any(|f| f.eval_only()) {
            return Err(Error::EvalOnlyInTraining(obs.id.clone()));
        }
        if obs.bundle.is_empty() {
            return Err(Error::EmptyFactList(obs.id.clone()));
        }
        let facts = encode_observation(obs, encoder)?;
        examples.push((facts, rules.derive_targets(label), label));
    }

    let d = encoder.dim();
    let mut params = LogicHeadParams::init(d, config.hidden, config.seed);
    let mut optimizer = Optimizer::new(config.optimizer, config.learning_rate, params.num_params());
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(config.seed);
    shuffle_rng.set_stream(1);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);

    for epoch in 1..=config.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut sums = LossBreakdown::default();
        for batch in order.chunks(config.batch_size) {
            let mut grad_sum = vec![0.0; params.num_params()];
            for &idx in batch {
                let (facts, targets, _) = &examples[idx];
                let (loss, grads) = gradients(facts, &params, targets, config)?;
                if !loss.is_finite() {
                    return Err(Error::NonFiniteLoss {
                        epoch,
                        id: dataset[idx].id.clone(),
                        detail: format!("{loss:?}"),
                    });
                }
                sums.obs_loss_c += loss.obs_loss_c;
                sums.fact_loss_c += loss.fact_loss_c;
                sums.obs_loss_e += loss.obs_loss_e;
                sums.fact_loss_e += loss.fact_loss_e;
                sums.total += loss.total;
                for (acc, g) in grad_sum.iter_mut().zip(grads.to_flat()) {
                    *acc += g;
                }
            }
            let scale = 1.0 / batch.len() as f64;
            grad_sum.iter_mut().for_each(|g| *g *= scale);
            let mut flat = params.to_flat();
            optimizer.step(&mut flat, &grad_sum);
            params.set_flat(&flat);
        }

        let mut correct = 0usize;
        for (facts, _, label) in &examples {
            let (scores, _) = crate::logic_head::forward(facts, &params)?;
            if classify(&scores, DEFAULT_THRESHOLD)?.predicted == *label {
                correct += 1;
            }
        }
        let n = examples.len() as f64;
        let metrics = EpochMetrics {
            epoch,
            total_loss: sums.total / n,
            obs_loss_c: sums.obs_loss_c / n,
            fact_loss_c: sums.fact_loss_c / n,
            obs_loss_e: sums.obs_loss_e / n,
            fact_loss_e: sums.fact_loss_e / n,
            train_accuracy: correct as f64 / n,
        };
        log::info!(
            "epoch {epoch}: loss {:.6} accuracy {:.4}",
            metrics.total_loss,
            metrics.train_accuracy
        );
        history.push(metrics);
    }

    Ok(TrainOutcome {
        checkpoint: Checkpoint {
            params,
            encoder: Some(encoder.config()),
        },
        history,
    })
}

pub fn write_log_csv(path: impl AsRef<Path>, history: &[EpochMetrics]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(out, "epoch,total_loss,obs_loss_c,fact_loss_c,obs_loss_e,fact_loss_e,train_accuracy").map_err(io)?;
    for m in history {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            m.epoch, m.total_loss, m.obs_loss_c, m.fact_loss_c, m.obs_loss_e, m.fact_loss_e, m.train_accuracy
        )
        .map_err(io)?;
    }
    out.flush().map_err(io)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data_model::NliLabel;
    use crate::logic_head::forward;
    use crate::rule_engine::derive_targets;
    use rand::Rng;

    fn random_facts(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Vec<Representation> {
        (0..n)
            .map(|_| Representation::new((0..d).map(|_| rng.random_range(-1.5..1.5)).collect()).unwrap())
            .collect()
    }

    fn fixture() -> (Vec<Representation>, LogicHeadParams) {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let facts = random_facts(&mut rng, 2, 4);
        let mut params = LogicHeadParams::init(4, 3, 7);
        let mut flat = params.to_flat();
        flat.iter_mut().for_each(|p| *p = rng.random_range(-1.0..1.0));
        params.set_flat(&flat);
        (facts, params)
    }

    /// Straight-line recomputation of the loss definitions for one head.
    fn oracle_head_loss(facts: &[Representation], p: &HeadParams, y: f64) -> (f64, f64) {
        let mut raw = Vec::new();
        let mut logits = Vec::new();
        for r in facts {
            let r = r.values();
            let mut s = p.b2;
            for j in 0..p.b1.len() {
                let mut z = p.b1[j];
                for k in 0..r.len() {
                    z += p.w1[j * r.len() + k] * r[k];
                }
                s += p.w2[j] * z.tanh();
            }
            raw.push(1.0 / (1.0 + (-s).exp()));
            let mut l = p.b_logit;
            for k in 0..r.len() {
                l += p.w_logit[k] * r[k];
            }
            logits.push(l);
        }
        let total: f64 = raw.iter().sum();
        let mut obs = 0.0;
        for i in 0..raw.len() {
            obs += raw[i] / total * logits[i];
        }
        let prob = 1.0 / (1.0 + (-(p.w3 * obs + p.b3)).exp());
        let max = raw.iter().cloned().fold(f64::MIN, f64::max);
        ((prob - y).powi(2), (max - y).powi(2))
    }

    #[test]
    fn loss_matches_oracle() {
        let (facts, params) = fixture();
        let config = TrainConfig::default();
        let (scores, logits) = forward(&facts, &params).unwrap();
        let loss = compute_loss(&scores, &logits, &derive_targets(NliLabel::Neutral), &config);
        let (oc, fc) = oracle_head_loss(&facts, &params.contradiction, 0.0);
        let (oe, fe) = oracle_head_loss(&facts, &params.entailment, 0.0);
        assert!((loss.obs_loss_c - oc).abs() < 1e-14);
        assert!((loss.fact_loss_c - fc).abs() < 1e-14);
        assert!((loss.obs_loss_e - oe).abs() < 1e-14);
        assert!((loss.fact_loss_e - fe).abs() < 1e-14);
        assert!((loss.total - (oc + fc + oe + fe)).abs() < 1e-13);
    }

    #[test]
    fn fact_loss_at_half() {
        let params = LogicHeadParams::from_heads(HeadParams::zeros(3, 2), HeadParams::zeros(3, 2), 0).unwrap();
        let facts = vec![Representation::new(vec![1.0, 2.0, 3.0]).unwrap()];
        let (scores, logits) = forward(&facts, &params).unwrap();
        let loss = compute_loss(&scores, &logits, &derive_targets(NliLabel::Entailment), &TrainConfig::default());
        assert_eq!(loss.fact_loss_c, 0.25);
        assert_eq!(loss.fact_loss_e, 0.25);
        // zero network: p = sigmoid(0) = 0.5 as well
        assert_eq!(loss.total, 1.0);
    }

    #[test]
    fn saturated_contradiction_has_no_loss() {
        let mut head = HeadParams::zeros(3, 2);
        head.b2 = 50.0;
        head.b3 = 50.0;
        let params = LogicHeadParams::from_heads(head.clone(), head, 0).unwrap();
        let facts = vec![Representation::new(vec![0.1, 0.2, 0.3]).unwrap()];
        let targets = derive_targets(NliLabel::Contradiction);
        let (loss, grads) = gradients(&facts, &params, &targets, &TrainConfig::default()).unwrap();
        assert!(loss.total < 1e-40);
        assert!(grads.to_flat().iter().all(|g| g.abs() < 1e-20));
    }

    #[test]
    fn abstain_head_gets_no_gradient() {
        let (facts, params) = fixture();
        let targets = derive_targets(NliLabel::Contradiction);
        let (loss, grads) = gradients(&facts, &params, &targets, &TrainConfig::default()).unwrap();
        assert_eq!(loss.obs_loss_e, 0.0);
        assert_eq!(loss.fact_loss_e, 0.0);
        let mut flat = Vec::new();
        grads.entailment.write_flat(&mut flat);
        assert!(flat.iter().all(|&g| g == 0.0));
        let mut c = Vec::new();
        grads.contradiction.write_flat(&mut c);
        assert!(c.iter().any(|&g| g != 0.0));
    }

    #[test]
    fn finite_difference_seed_7() {
        let (facts, params) = fixture();
        let config = TrainConfig::default();
        for label in NliLabel::ALL {
            let targets = derive_targets(label);
            let (_, grads) = gradients(&facts, &params, &targets, &config).unwrap();
            let analytic = grads.to_flat();
            let base = params.to_flat();
            let eps = 1e-5;
            for i in 0..base.len() {
                let mut p = params.clone();
                let mut f = base.clone();
                f[i] += eps;
                p.set_flat(&f);
                let up = total_loss(&facts, &p, &targets, &config).unwrap();
                f[i] -= 2.0 * eps;
                p.set_flat(&f);
                let down = total_loss(&facts, &p, &targets, &config).unwrap();
                let numeric = (up - down) / (2.0 * eps);
                let err = (analytic[i] - numeric).abs();
                let scale = analytic[i].abs().max(numeric.abs());
                assert!(
                    err <= 1e-7 || err / scale <= 1e-4,
                    "{label:?} coord {i}: analytic {} numeric {numeric}",
                    analytic[i]
                );
            }
        }
    }

    #[test]
    fn tie_routes_to_lowest_index() {
        assert_eq!(argmax_first(&[0.3, 0.7, 0.7, 0.1]), 1);
        assert_eq!(argmax_first(&[0.5]), 0);
    }

    #[test]
    fn small_sgd_step_does_not_increase_loss() {
        let (facts, params) = fixture();
        let config = TrainConfig::default();
        for label in NliLabel::ALL {
            let targets = derive_targets(label);
            let (loss, grads) = gradients(&facts, &params, &targets, &config).unwrap();
            let mut stepped = params.clone();
            sgd_step(&mut stepped, &grads, 1e-4);
            let after = total_loss(&facts, &stepped, &targets, &config).unwrap();
            assert!(after <= loss.total, "{label:?}: {after} > {}", loss.total);
        }
    }

    #[test]
    fn config_validation_and_toml() {
        assert!(TrainConfig::default().validate().is_ok());
        let c = TrainConfig::from_toml("learning_rate = 0.01\nepochs = 3\noptimizer = \"sgd\"\n").unwrap();
        assert_eq!(c.epochs, 3);
        assert_eq!(c.optimizer, OptimizerKind::Sgd);
        assert_eq!(c.batch_size, 1);
        assert!(TrainConfig::from_toml("epochs = 0").is_err());
        assert!(TrainConfig::from_toml("learning_rate = -1.0").is_err());
        assert!(TrainConfig::from_toml("lambda_fact = -0.5").is_err());
        assert!(TrainConfig::from_toml("bogus = 1").is_err());
    }

    #[test]
    fn empty_dataset_rejected() {
        let enc = crate::encoder::HashingEncoder::new(8).unwrap();
        assert!(matches!(train(&[], &enc, &TrainConfig::default()), Err(Error::EmptyInput(_))));
    }
}
