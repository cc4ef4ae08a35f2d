//! Corpus data model: timelines of publications labeled per user.

mod io;
mod split;
mod stats;
pub mod synth;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use io::{load_corpus, parse_corpus, write_corpus, CorpusRecord, PostRecord};
pub use split::{sample_publications, split_corpus, DEFAULT_SAMPLE_SIZE};
pub use stats::{compute_stats, ClassCounts, CorpusStats};
pub use synth::{generate_synthetic, IndicatorSet, PlantedTier, SynthConfig};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Schema { line: usize, message: String },
    #[error("line {line}: user `{user_id}` appears more than once")]
    DuplicateUser { line: usize, user_id: String },
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("corpus has no train/test split")]
    Unsplit,
    #[error("corpus is only partially split ({tagged} of {total} users tagged)")]
    PartialSplit { tagged: usize, total: usize },
    #[error("requested {requested} publications but the train split holds {available}")]
    SampleTooLarge { requested: usize, available: usize },
    #[error("invalid synthetic config: {0}")]
    InvalidConfig(String),
    #[error("degenerate split: {0}")]
    DegenerateSplit(String),
}

pub type Result<T> = std::result::Result<T, CorpusError>;

/// User-level class. `Diagnosed` is the positive class for every metric.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UserClass {
    Diagnosed,
    Control,
}

impl UserClass {
    pub const ALL: [UserClass; 2] = [UserClass::Diagnosed, UserClass::Control];

    pub fn is_positive(self) -> bool {
        self == UserClass::Diagnosed
    }

    pub fn as_str(self) -> &'static str {
        match self {
            UserClass::Diagnosed => "diagnosed",
            UserClass::Control => "control",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Publication {
    pub user_id: String,
    pub post_id: String,
    /// Seconds since the Unix epoch.
    pub timestamp: i64,
    pub text: String,
}

/// One user's publications in ascending timestamp order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Timeline {
    pub user_id: String,
    pub label: UserClass,
    pub split: Option<Split>,
    pub publications: Vec<Publication>,
}

impl Timeline {
    /// Sorts publications by timestamp. Stable, so ties keep file order.
    pub fn normalize_order(&mut self) {
        self.publications.sort_by_key(|p| p.timestamp);
    }

    pub fn is_train(&self) -> bool {
        self.split == Some(Split::Train)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Corpus {
    pub timelines: Vec<Timeline>,
}

impl Corpus {
    pub fn new(timelines: Vec<Timeline>) -> Self {
        Self { timelines }
    }

    pub fn n_users(&self) -> usize {
        self.timelines.len()
    }

    pub fn n_publications(&self) -> usize {
        self.timelines.iter().map(|t| t.publications.len()).sum()
    }

    pub fn publications(&self) -> impl Iterator<Item = &Publication> {
        self.timelines.iter().flat_map(|t| t.publications.iter())
    }

    pub fn train(&self) -> impl Iterator<Item = &Timeline> {
        self.timelines.iter().filter(|t| t.split == Some(Split::Train))
    }

    pub fn test(&self) -> impl Iterator<Item = &Timeline> {
        self.timelines.iter().filter(|t| t.split == Some(Split::Test))
    }

    /// True when every user carries a split tag.
    pub fn is_split(&self) -> bool {
        !self.timelines.is_empty() && self.timelines.iter().all(|t| t.split.is_some())
    }

    pub fn timeline(&self, user_id: &str) -> Option<&Timeline> {
        self.timelines.iter().find(|t| t.user_id == user_id)
    }

    /// Concatenates two corpora. Fails if a user appears in both.
    pub fn union(mut self, other: Corpus) -> Result<Corpus> {
        let seen: std::collections::HashSet<String> = self.timelines.iter().map(|t| t.user_id.clone()).collect();
        for t in other.timelines {
            if seen.contains(&t.user_id) {
                return Err(CorpusError::DuplicateUser { line: 0, user_id: t.user_id });
            }
            self.timelines.push(t);
        }
        Ok(self)
    }
}
