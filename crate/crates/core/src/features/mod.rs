//! Feature extraction: tokenization, per-stratum bag-of-words blocks,
//! univariate F-score selection, and relevance-label n-gram counts.

mod bow;
mod fscore;
mod sequence;
mod space;
mod tokenize;

use std::collections::HashMap;

use thiserror::Error;

use crate::relevance::RelevanceLabel;

pub use bow::{build_bow, build_stratified_bow, BowMatrices, StratumVocab};
pub use fscore::{select_top_k, univariate_f_scores, F_MAX};
pub use sequence::{all_label_ngrams, label_sequence_ngrams, LabelNgram};
pub use space::{
    fit_feature_space, transform_user, write_triplets, FeatureConfig, FeatureSpace, TextBlock, UserFeatureVector,
    FEATURE_SPACE_FORMAT, FEATURE_SPACE_VERSION,
};
pub use tokenize::{tokenize, URL_TOKEN, USER_TOKEN};

/// Relevance label per post id.
pub type LabelMap = HashMap<String, RelevanceLabel>;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("publication `{0}` has no relevance label")]
    MissingLabel(String),
    #[error("F-scores need users from both classes")]
    SingleClass,
    #[error("{rows} matrix rows but {labels} class labels")]
    DimensionMismatch { rows: usize, labels: usize },
    #[error("corpus has no train users")]
    NoTrainUsers,
    #[error("invalid feature config: {0}")]
    InvalidConfig(String),
    #[error("feature space artifact: {0}")]
    Artifact(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, FeatureError>;
