//! The fitted feature space and per-user vector assembly.
//!
//! Layout of a user vector: the selected columns of each text block in
//! block order (High, Medium, Low when stratified), then the selected
//! label n-gram columns.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    all_label_ngrams, build_bow, label_sequence_ngrams, select_top_k, tokenize, univariate_f_scores, FeatureError,
    LabelMap, LabelNgram, Result, StratumVocab,
};
use crate::corpus::{Corpus, Timeline, UserClass};
use crate::relevance::RelevanceLabel;
use crate::sparse::{SparseMatrix, SparseVector};

pub const FEATURE_SPACE_FORMAT: &str = "promptbow-feature-space";
pub const FEATURE_SPACE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureConfig {
    pub k_high: usize,
    pub k_medium: usize,
    pub k_low: usize,
    /// Cap on selected label n-grams.
    pub k_seq: usize,
    pub seq_order: usize,
    pub min_df: u32,
    /// Replace the three relevance strata with one pooled block of budget
    /// `k_high + k_medium + k_low`.
    pub pooled_text: bool,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            k_high: 6000,
            k_medium: 6000,
            k_low: 3000,
            k_seq: 40_000,
            seq_order: 2,
            min_df: 2,
            pooled_text: false,
        }
    }
}

impl FeatureConfig {
    pub fn validate(&self) -> Result<()> {
        if [self.k_high, self.k_medium, self.k_low, self.k_seq].contains(&0) {
            return Err(FeatureError::InvalidConfig("every k must be at least 1".into()));
        }
        if !(1..=10).contains(&self.seq_order) {
            return Err(FeatureError::InvalidConfig("label n-gram order must be in 1..=10".into()));
        }
        Ok(())
    }

    /// Label groups and their budgets, in block order.
    fn text_groups(&self) -> Vec<(Vec<RelevanceLabel>, usize)> {
        use RelevanceLabel::*;
        if self.pooled_text {
            vec![(vec![High, Medium, Low], self.k_high + self.k_medium + self.k_low)]
        } else {
            vec![(vec![High], self.k_high), (vec![Medium], self.k_medium), (vec![Low], self.k_low)]
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextBlock {
    pub vocab: StratumVocab,
    /// Selected vocabulary columns, ascending.
    pub selected: Vec<u32>,
    #[serde(skip)]
    position: HashMap<String, u32>,
}

impl TextBlock {
    fn new(vocab: StratumVocab, selected: Vec<u32>) -> Self {
        let mut b = TextBlock { vocab, selected, position: HashMap::new() };
        b.reindex();
        b
    }

    fn reindex(&mut self) {
        self.vocab.reindex();
        self.position = self
            .selected
            .iter()
            .enumerate()
            .map(|(pos, &col)| (self.vocab.tokens[col as usize].clone(), pos as u32))
            .collect();
    }

    pub fn width(&self) -> usize {
        self.selected.len()
    }

    pub fn selected_tokens(&self) -> impl Iterator<Item = &str> {
        self.selected.iter().map(|&c| self.vocab.tokens[c as usize].as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpace {
    pub format: String,
    pub version: u32,
    pub config: FeatureConfig,
    pub text_blocks: Vec<TextBlock>,
    /// Selected label n-grams in column order.
    pub seq_ngrams: Vec<LabelNgram>,
    #[serde(skip)]
    seq_position: HashMap<LabelNgram, u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserFeatureVector {
    pub user_id: String,
    pub vector: SparseVector,
    /// Start column of each text block, then of the sequence block.
    pub offsets: Vec<usize>,
}

impl FeatureSpace {
    fn reindex(&mut self) {
        for b in &mut self.text_blocks {
            b.reindex();
        }
        self.seq_position = self.seq_ngrams.iter().enumerate().map(|(i, g)| (g.clone(), i as u32)).collect();
    }

    pub fn text_width(&self) -> usize {
        self.text_blocks.iter().map(TextBlock::width).sum()
    }

    pub fn seq_width(&self) -> usize {
        self.seq_ngrams.len()
    }

    pub fn width(&self) -> usize {
        self.text_width() + self.seq_width()
    }

    pub fn offsets(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.text_blocks.len() + 1);
        let mut at = 0;
        for b in &self.text_blocks {
            out.push(at);
            at += b.width();
        }
        out.push(at);
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let json = serde_json::to_vec(self).map_err(|e| FeatureError::Artifact(e.to_string()))?;
        fs::write(path, json)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let bytes = fs::read(path)?;
        Self::from_json(&bytes)
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        #[derive(Deserialize)]
        struct Header {
            format: String,
            version: u32,
        }
        let header: Header = serde_json::from_slice(bytes).map_err(|e| FeatureError::Artifact(e.to_string()))?;
        if header.format != FEATURE_SPACE_FORMAT || header.version != FEATURE_SPACE_VERSION {
            return Err(FeatureError::Artifact(format!(
                "expected {FEATURE_SPACE_FORMAT} v{FEATURE_SPACE_VERSION}, found {} v{}",
                header.format, header.version
            )));
        }
        let mut space: FeatureSpace =
            serde_json::from_slice(bytes).map_err(|e| FeatureError::Artifact(e.to_string()))?;
        space.reindex();
        Ok(space)
    }
}

/// Label sequence of a timeline, skipping posts without a label.
fn label_sequence(t: &Timeline, labels: &LabelMap) -> Vec<RelevanceLabel> {
    t.publications.iter().filter_map(|p| labels.get(&p.post_id).copied()).collect()
}

/// Fits vocabularies, F-score selections and the label n-gram block on the
/// train split only.
pub fn fit_feature_space(corpus: &Corpus, labels: &LabelMap, config: &FeatureConfig) -> Result<FeatureSpace> {
    config.validate()?;
    let groups = config.text_groups();
    let strata: Vec<Vec<RelevanceLabel>> = groups.iter().map(|(g, _)| g.clone()).collect();
    let bow = build_bow(corpus, labels, &strata, config.min_df)?;

    let mut text_blocks = Vec::with_capacity(groups.len());
    for ((vocab, matrix), (_, k)) in bow.blocks.into_iter().zip(&groups) {
        let scores = univariate_f_scores(&matrix, &bow.classes)?;
        let selected = select_top_k(&scores, *k).into_iter().map(|c| c as u32).collect();
        text_blocks.push(TextBlock::new(vocab, selected));
    }

    let all = all_label_ngrams(config.seq_order);
    let seq_ngrams = if all.len() <= config.k_seq {
        all
    } else {
        let column: HashMap<&LabelNgram, u32> = all.iter().enumerate().map(|(i, g)| (g, i as u32)).collect();
        let rows = corpus
            .train()
            .map(|t| {
                label_sequence_ngrams(&label_sequence(t, labels), config.seq_order)
                    .into_iter()
                    .map(|(g, n)| (column[&g], f64::from(n)))
                    .collect()
            })
            .collect();
        let matrix = SparseMatrix { n_cols: all.len(), rows };
        let classes: Vec<UserClass> = corpus.train().map(|t| t.label).collect();
        let scores = univariate_f_scores(&matrix, &classes)?;
        select_top_k(&scores, config.k_seq).into_iter().map(|i| all[i].clone()).collect()
    };

    let mut space = FeatureSpace {
        format: FEATURE_SPACE_FORMAT.into(),
        version: FEATURE_SPACE_VERSION,
        config: config.clone(),
        text_blocks,
        seq_ngrams,
        seq_position: HashMap::new(),
    };
    space.reindex();
    Ok(space)
}

/// Projects one timeline onto the fitted space. Tokens outside the selected
/// columns are ignored; posts without a label contribute nothing.
pub fn transform_user(space: &FeatureSpace, timeline: &Timeline, labels: &LabelMap) -> UserFeatureVector {
    let offsets = space.offsets();
    let mut entries: Vec<(u32, f64)> = Vec::new();
    for p in &timeline.publications {
        let Some(&label) = labels.get(&p.post_id) else { continue };
        let blocks: Vec<(usize, &TextBlock)> =
            space.text_blocks.iter().enumerate().filter(|(_, b)| b.vocab.covers(label)).collect();
        if blocks.is_empty() {
            continue;
        }
        for tok in tokenize(&p.text) {
            for &(i, b) in &blocks {
                if let Some(&pos) = b.position.get(&tok) {
                    entries.push(((offsets[i] + pos as usize) as u32, 1.0));
                }
            }
        }
    }
    let seq_start = *offsets.last().unwrap();
    for (g, n) in label_sequence_ngrams(&label_sequence(timeline, labels), space.config.seq_order) {
        if let Some(&pos) = space.seq_position.get(&g) {
            entries.push(((seq_start + pos as usize) as u32, f64::from(n)));
        }
    }
    UserFeatureVector {
        user_id: timeline.user_id.clone(),
        vector: SparseVector::from_unsorted(space.width(), entries),
        offsets,
    }
}

/// Writes vectors as `row col value` lines, one per nonzero entry.
pub fn write_triplets(vectors: &[UserFeatureVector], mut out: impl Write) -> std::io::Result<()> {
    for (row, v) in vectors.iter().enumerate() {
        for &(col, value) in &v.vector.entries {
            writeln!(out, "{row} {col} {value}")?;
        }
    }
    Ok(())
}
