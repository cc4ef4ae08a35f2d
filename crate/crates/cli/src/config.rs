//! The single TOML configuration file.

use std::fs;
use std::path::{Path, PathBuf};

use promptbow_core::classifier::FitConfig;
use promptbow_core::corpus::{SynthConfig, DEFAULT_SAMPLE_SIZE};
use promptbow_core::features::FeatureConfig;
use promptbow_core::propagation::PropagationConfig;
use promptbow_core::relevance::{ClientConfig, PromptTemplate, DEFAULT_TEMPLATE};
use serde::{Deserialize, Serialize};

use crate::PipelineError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Paths {
    /// Input corpus; when absent the `synth` stage generates one.
    pub corpus: Option<PathBuf>,
    /// Append-only annotation cache, shared across runs.
    pub cache: PathBuf,
    pub artifacts: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Paths { corpus: None, cache: "cache/annotations.jsonl".into(), artifacts: "artifacts".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitConfig {
    /// Share of each class sent to Test when the corpus carries no split.
    pub test_fraction: f64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig { test_fraction: 0.2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SampleConfig {
    pub size: usize,
}

impl Default for SampleConfig {
    fn default() -> Self {
        SampleConfig { size: DEFAULT_SAMPLE_SIZE }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LlmConfig {
    /// Grade with the offline keyword annotator instead of the endpoint.
    pub mock: bool,
    /// Prompt template text; the built-in template when absent.
    pub template: Option<String>,
    /// Publication length cap in characters; `0` disables truncation.
    pub char_budget: usize,
    #[serde(flatten)]
    pub client: ClientConfig,
}

impl Default for LlmConfig {
    fn default() -> Self {
        LlmConfig { mock: false, template: None, char_budget: 1000, client: ClientConfig::default() }
    }
}

impl LlmConfig {
    pub fn template(&self) -> Result<PromptTemplate, PipelineError> {
        let text = self.template.as_deref().unwrap_or(DEFAULT_TEMPLATE);
        let budget = (self.char_budget > 0).then_some(self.char_budget);
        PromptTemplate::new(text, budget).map_err(|e| PipelineError::Config(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    /// Master seed; overrides the seeds of every sub-configuration.
    pub seed: u64,
    pub paths: Paths,
    pub synth: SynthConfig,
    pub split: SplitConfig,
    pub sample: SampleConfig,
    pub llm: LlmConfig,
    pub propagation: PropagationConfig,
    pub features: FeatureConfig,
    pub fit: FitConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 0,
            paths: Paths::default(),
            synth: SynthConfig::default(),
            split: SplitConfig::default(),
            sample: SampleConfig::default(),
            llm: LlmConfig::default(),
            propagation: PropagationConfig::default(),
            features: FeatureConfig::default(),
            fit: FitConfig::default(),
        }
        .with_seed(42)
    }
}

impl PipelineConfig {
    /// Reads a TOML file. Relative paths inside it resolve against the
    /// file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, PipelineError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        let mut config: PipelineConfig =
            toml::from_str(&text).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        if let Some(base) = path.parent() {
            config.paths.rebase(base);
        }
        let seed = config.seed;
        Ok(config.with_seed(seed))
    }

    /// Sets the master seed and copies it into each seeded component.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.synth.seed = seed;
        self.propagation.seed = seed;
        self.fit.seed = seed;
        self
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes to TOML")
    }
}

impl Paths {
    fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(c) = self.corpus.as_mut() {
            fix(c);
        }
        fix(&mut self.cache);
        fix(&mut self.artifacts);
    }
}
