//! Fact-level logical reasoning for natural language inference.
//!
//! A premise is broken into short facts, each fact is scored against the
//! hypothesis by two attention heads (contradiction and entailment), and a
//! fixed set of logical rules turns fact-level decisions into an
//! observation label. Training needs only observation labels.

pub mod cli;
pub mod data_model;
pub mod encoder;
pub mod error;
pub mod generator_client;
pub mod logic_head;
pub mod metrics;
pub mod rule_engine;
pub mod synthetic;
pub mod trainer;

pub use data_model::{Fact, FactBundle, FactStrategy, NliLabel, Observation, Provenance, Split};
pub use encoder::{Encoder, EncoderConfig, HashingEncoder, Representation};
pub use error::{Error, Result};
pub use logic_head::{Checkpoint, FactScores, LogicHeadParams};
pub use rule_engine::{classify, Prediction, DEFAULT_THRESHOLD};
pub use trainer::{train, TrainConfig};
