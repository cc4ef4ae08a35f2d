//! Extending sampled relevance grades to every publication with a
//! multinomial linear model over hashed word and character n-grams.

mod hashing;
mod label;
mod model;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::relevance::RelevanceLabel;

pub use hashing::{fnv1a, HashedFeaturizer};
pub use label::{label_corpus, label_counts};
pub use model::{
    predict_relevance, train_relevance_model, ModelHeader, PropagationReport, RelevanceModel, MODEL_FORMAT,
    MODEL_VERSION,
};

/// Minimum number of sampled records per label needed to train.
pub const MIN_PER_LABEL: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PropagationConfig {
    pub hash_dim: usize,
    pub char_ngram_min: usize,
    pub char_ngram_max: usize,
    pub word_unigrams: bool,
    pub epochs: usize,
    pub learning_rate: f64,
    pub l2: f64,
    /// Fraction of the annotated sample held out for the accuracy report.
    pub holdout_fraction: f64,
    pub seed: u64,
}

impl Default for PropagationConfig {
    fn default() -> Self {
        PropagationConfig {
            hash_dim: 1 << 18,
            char_ngram_min: 3,
            char_ngram_max: 5,
            word_unigrams: true,
            epochs: 5,
            learning_rate: 0.5,
            l2: 1e-6,
            holdout_fraction: 0.1,
            seed: 42,
        }
    }
}

impl PropagationConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(PropagationError::InvalidConfig(m.into()));
        if self.hash_dim == 0 || self.hash_dim > u32::MAX as usize {
            return bad("hash_dim must be in 1..=u32::MAX");
        }
        if self.char_ngram_min == 0 || self.char_ngram_min > self.char_ngram_max {
            return bad("character n-gram range must satisfy 1 <= min <= max");
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return bad("l2 must be non-negative");
        }
        if !(0.0..1.0).contains(&self.holdout_fraction) {
            return bad("holdout_fraction must be in [0, 1)");
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum PropagationError {
    #[error("need at least {MIN_PER_LABEL} `{label}` records, found {found}")]
    InsufficientLabels { label: RelevanceLabel, found: usize },
    #[error("record for `{0}` is not an LLM annotation")]
    NotLlm(String),
    #[error("record refers to unknown publication `{0}`")]
    UnknownPost(String),
    #[error("invalid propagation config: {0}")]
    InvalidConfig(String),
    #[error("relevance model artifact: {0}")]
    Artifact(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, PropagationError>;
