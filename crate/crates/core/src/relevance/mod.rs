//! Grading publications for mental-health relevance with a prompted
//! chat-completion model.

mod annotate;
mod cache;
mod client;
mod distribution;
mod mock;
mod parse;
mod template;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use annotate::{annotate_batch, annotate_with_config, BatchOptions, BatchReport, ItemOutcome};
pub use cache::{AnnotationCache, CacheKey};
pub use client::{
    BackendError, ClientConfig, CompletionBackend, HttpBackend, RetryPolicy, TokenBucket, DEFAULT_API_KEY_ENV,
};
pub use distribution::{distribution_of, ClassDistribution, DistributionReport, TierRow};
pub use mock::KeywordAnnotator;
pub use parse::parse_response;
pub use template::{render_prompt, PromptTemplate, DEFAULT_TEMPLATE, ELLIPSIS, PLACEHOLDER};

/// Ordinal relevance grade. Codes: High = 1, Medium = 2, Low = 3.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RelevanceLabel {
    High,
    Medium,
    Low,
}

impl RelevanceLabel {
    pub const ALL: [RelevanceLabel; 3] = [RelevanceLabel::High, RelevanceLabel::Medium, RelevanceLabel::Low];

    pub fn code(self) -> u8 {
        self.index() as u8 + 1
    }

    /// Zero-based position, `code() - 1`.
    pub fn index(self) -> usize {
        match self {
            RelevanceLabel::High => 0,
            RelevanceLabel::Medium => 1,
            RelevanceLabel::Low => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<RelevanceLabel> {
        match code {
            1 => Some(RelevanceLabel::High),
            2 => Some(RelevanceLabel::Medium),
            3 => Some(RelevanceLabel::Low),
            _ => None,
        }
    }

    pub fn from_index(i: usize) -> RelevanceLabel {
        Self::ALL[i]
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RelevanceLabel::High => "high",
            RelevanceLabel::Medium => "medium",
            RelevanceLabel::Low => "low",
        }
    }
}

impl fmt::Display for RelevanceLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Llm,
    Propagated,
}

/// A relevance grade for one publication plus the provenance needed to
/// reproduce it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub post_id: String,
    pub label: RelevanceLabel,
    pub raw_response: String,
    pub source: Source,
    pub model_id: String,
    pub template_hash: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probabilities: Option<[f64; 3]>,
}

impl AnnotationRecord {
    pub fn key(&self) -> CacheKey {
        CacheKey {
            post_id: self.post_id.clone(),
            template_hash: self.template_hash.clone(),
            model_id: self.model_id.clone(),
        }
    }
}

#[derive(Debug, Error)]
pub enum RelevanceError {
    #[error("invalid template: {0}")]
    InvalidTemplate(String),
    #[error("cannot render an empty publication")]
    EmptyText,
    #[error("no relevance code 1-3 in response {0:?}")]
    Unparseable(String),
    #[error("endpoint error after {attempts} attempt(s): {message}")]
    Endpoint { attempts: u32, message: String },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("unknown post `{0}`")]
    UnknownPost(String),
    #[error("no records to summarize")]
    EmptyInput,
    #[error("cache i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("cache line {line}: {message}")]
    CacheFormat { line: usize, message: String },
}

pub type Result<T> = std::result::Result<T, RelevanceError>;
