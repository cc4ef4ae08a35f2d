//! L2-regularized binary logistic regression with optional class weighting,
//! and positive-class evaluation metrics.

mod logistic;
mod metrics;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use logistic::{
    fit, loss_and_gradient, predict_proba, FitMeta, LogisticModel, StopReason, MODEL_FORMAT, MODEL_VERSION,
};
pub use metrics::{evaluate, sweep_threshold, EvalReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassWeight {
    None,
    /// Each class weighted by `n / (2 * n_class)`.
    Balanced,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    /// L2 strength; `None` means `1 / n_train`.
    pub l2: Option<f64>,
    pub class_weight: ClassWeight,
    pub max_iter: usize,
    /// Stop once the gradient norm falls to this value.
    pub tol: f64,
    pub seed: u64,
    pub threshold: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig { l2: None, class_weight: ClassWeight::Balanced, max_iter: 2000, tol: 1e-6, seed: 42, threshold: 0.5 }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(ClassifierError::InvalidConfig(m.into()));
        if self.l2.is_some_and(|l| !(l >= 0.0 && l.is_finite())) {
            return bad("l2 must be non-negative");
        }
        if self.max_iter == 0 {
            return bad("max_iter must be at least 1");
        }
        if self.tol.is_nan() || self.tol <= 0.0 {
            return bad("tol must be positive");
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return bad("threshold must be in (0, 1)");
        }
        Ok(())
    }

    pub fn l2_for(&self, n_train: usize) -> f64 {
        self.l2.unwrap_or(1.0 / n_train.max(1) as f64)
    }
}

#[derive(Debug, Error)]
pub enum ClassifierError {
    #[error("expected width {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("{predictions} predictions but {truth} truth labels")]
    LengthMismatch { predictions: usize, truth: usize },
    #[error("training data needs both classes")]
    SingleClass,
    #[error("invalid fit config: {0}")]
    InvalidConfig(String),
    #[error("classifier artifact: {0}")]
    Artifact(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, ClassifierError>;
