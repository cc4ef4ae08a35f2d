//! Stage orchestration for the promptbow pipeline.
//!
//! Each stage reads upstream artifacts from `<artifacts>/<stage>/` and writes
//! its own directory with a manifest. [`run_all`] recomputes only stages
//! whose config slice or upstream content changed.

pub mod artifact;
pub mod config;
mod pipeline;

use std::path::{Path, PathBuf};

use promptbow_core::classifier::ClassifierError;
use promptbow_core::corpus::CorpusError;
use promptbow_core::features::FeatureError;
use promptbow_core::propagation::PropagationError;
use promptbow_core::relevance::RelevanceError;
use thiserror::Error;

pub use config::PipelineConfig;
pub use pipeline::{
    run_all, run_stage, sweep, FeatureRow, Pipeline, Prediction, RunSummary, Stage, StageStatus, SweepReport,
};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("missing artifact: run the `{0}` stage first")]
    MissingArtifact(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("artifact error: {0}")]
    Artifact(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Relevance(RelevanceError),
    #[error(transparent)]
    Propagation(#[from] PropagationError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
}

impl PipelineError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        PipelineError::Io { path: path.to_path_buf(), source }
    }
}

impl From<RelevanceError> for PipelineError {
    fn from(e: RelevanceError) -> Self {
        match e {
            RelevanceError::Config(m) => PipelineError::Config(m),
            other => PipelineError::Relevance(other),
        }
    }
}

pub type Result<T> = std::result::Result<T, PipelineError>;
