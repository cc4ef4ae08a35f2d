use serde::{Deserialize, Serialize};

use super::{RelevanceError, Result};
use crate::digest::json_digest;

pub const PLACEHOLDER: &str = "{TEXT}";
/// Appended to publications cut at the character budget.
pub const ELLIPSIS: &str = "…";

/// Default instruction. Lists common clinical descriptors of depression and
/// asks for a single relevance digit.
pub const DEFAULT_TEMPLATE: &str = "\
You are helping to screen social media posts for signs related to mental health.
Consider whether the post below expresses or discusses any of the following:
persistent sadness, emptiness or hopelessness; loss of interest or pleasure in
usual activities; changes in sleep or appetite; fatigue or loss of energy;
feelings of worthlessness or excessive guilt; difficulty thinking or
concentrating; thoughts of death, self-harm or suicide.

Post:
\"\"\"{TEXT}\"\"\"

How relevant is this post to mental health?
Answer with a single digit: 1 for high relevance, 2 for medium relevance, 3 for low relevance.";

/// Prompt text with exactly one `{TEXT}` slot and an optional character
/// budget for the substituted publication.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    text: String,
    char_budget: Option<usize>,
}

impl Default for PromptTemplate {
    fn default() -> Self {
        PromptTemplate::new(DEFAULT_TEMPLATE, Some(1000)).expect("default template is valid")
    }
}

impl PromptTemplate {
    pub fn new(text: impl Into<String>, char_budget: Option<usize>) -> Result<Self> {
        let text = text.into();
        match text.matches(PLACEHOLDER).count() {
            1 => {}
            n => {
                return Err(RelevanceError::InvalidTemplate(format!(
                    "expected exactly one {PLACEHOLDER} placeholder, found {n}"
                )))
            }
        }
        let preamble = &text[..text.find(PLACEHOLDER).unwrap()];
        if preamble.trim().is_empty() {
            return Err(RelevanceError::InvalidTemplate("empty instruction preamble".into()));
        }
        if char_budget == Some(0) {
            return Err(RelevanceError::InvalidTemplate("character budget must be positive".into()));
        }
        Ok(PromptTemplate { text, char_budget })
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn char_budget(&self) -> Option<usize> {
        self.char_budget
    }

    /// Binds annotation records to the exact prompt (text and budget).
    pub fn hash(&self) -> String {
        json_digest(self)
    }

    /// The text before and after the placeholder.
    pub fn parts(&self) -> (&str, &str) {
        let at = self.text.find(PLACEHOLDER).unwrap();
        (&self.text[..at], &self.text[at + PLACEHOLDER.len()..])
    }

    pub fn render(&self, text: &str) -> Result<String> {
        render_prompt(self, text)
    }
}

pub fn render_prompt(template: &PromptTemplate, text: &str) -> Result<String> {
    if text.trim().is_empty() {
        return Err(RelevanceError::EmptyText);
    }
    let (before, after) = template.parts();
    let body = match template.char_budget {
        Some(budget) if text.chars().count() > budget => {
            let mut cut: String = text.chars().take(budget).collect();
            cut.push_str(ELLIPSIS);
            cut
        }
        _ => text.to_string(),
    };
    Ok(format!("{before}{body}{after}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn substitution() {
        let t = PromptTemplate::new("Rate: {TEXT}", None).unwrap();
        assert_eq!(t.render("hello").unwrap(), "Rate: hello");
    }

    #[test]
    fn placeholder_count_enforced() {
        assert!(matches!(PromptTemplate::new("Rate this", None), Err(RelevanceError::InvalidTemplate(_))));
        assert!(matches!(PromptTemplate::new("Rate {TEXT} and {TEXT}", None), Err(RelevanceError::InvalidTemplate(_))));
        assert!(matches!(PromptTemplate::new("  {TEXT}", None), Err(RelevanceError::InvalidTemplate(_))));
    }

    #[test]
    fn truncation_length_arithmetic() {
        let budget = 10;
        let t = PromptTemplate::new("Rate: {TEXT}!", Some(budget)).unwrap();
        let text = "abcdefghijklmnopqrstuvwxyz";
        let out = t.render(text).unwrap();
        let frame = "Rate: !".chars().count();
        assert_eq!(out.chars().count(), frame + budget + ELLIPSIS.chars().count());
        assert!(out.starts_with("Rate: abcdefghij…"));
        // Exactly at budget: untouched.
        assert_eq!(t.render("0123456789").unwrap(), "Rate: 0123456789!");
    }

    #[test]
    fn truncation_counts_chars_not_bytes() {
        let t = PromptTemplate::new("> {TEXT}", Some(3)).unwrap();
        assert_eq!(t.render("ãçéõ").unwrap(), "> ãçé…");
    }

    #[test]
    fn empty_text_rejected() {
        assert!(matches!(PromptTemplate::default().render("  "), Err(RelevanceError::EmptyText)));
    }

    #[test]
    fn hash_binds_text_and_budget() {
        let a = PromptTemplate::new("Rate: {TEXT}", None).unwrap();
        let b = PromptTemplate::new("Rate: {TEXT}", Some(5)).unwrap();
        let c = PromptTemplate::new("Grade: {TEXT}", None).unwrap();
        assert_eq!(a.hash(), a.clone().hash());
        assert_ne!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn default_template_is_valid() {
        let t = PromptTemplate::default();
        let (before, after) = t.parts();
        assert!(!before.trim().is_empty());
        assert!(after.contains("single digit"));
    }
}
