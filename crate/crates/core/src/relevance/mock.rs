use std::collections::HashSet;

use super::client::{BackendError, CompletionBackend};
use super::PromptTemplate;
use crate::features::tokenize;

/// Offline stand-in for the language model: answers 1 when the publication
/// contains a high-relevance keyword, 2 for a medium keyword, 3 otherwise.
///
/// The publication is recovered from the prompt by stripping the template's
/// text around the placeholder, so keywords in the instruction never count.
#[derive(Debug, Clone)]
pub struct KeywordAnnotator {
    prefix: String,
    suffix: String,
    high: HashSet<String>,
    medium: HashSet<String>,
}

impl KeywordAnnotator {
    pub const MODEL_ID: &'static str = "mock-keyword-v1";

    pub fn new(template: &PromptTemplate, high: &[String], medium: &[String]) -> Self {
        let (prefix, suffix) = template.parts();
        let norm = |words: &[String]| words.iter().flat_map(|w| tokenize(w)).collect::<HashSet<_>>();
        KeywordAnnotator {
            prefix: prefix.to_string(),
            suffix: suffix.to_string(),
            high: norm(high),
            medium: norm(medium),
        }
    }

    fn publication<'a>(&self, prompt: &'a str) -> &'a str {
        prompt.strip_prefix(self.prefix.as_str()).and_then(|p| p.strip_suffix(self.suffix.as_str())).unwrap_or(prompt)
    }
}

impl CompletionBackend for KeywordAnnotator {
    fn model_id(&self) -> &str {
        Self::MODEL_ID
    }

    fn complete(&self, prompt: &str) -> Result<String, BackendError> {
        let tokens = tokenize(self.publication(prompt));
        let code = if tokens.iter().any(|t| self.high.contains(t)) {
            1
        } else if tokens.iter().any(|t| self.medium.contains(t)) {
            2
        } else {
            3
        };
        Ok(code.to_string())
    }
}
