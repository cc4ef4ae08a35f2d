//! User-level bag-of-words matrices, one per relevance stratum.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{tokenize, FeatureError, LabelMap, Result};
use crate::corpus::{Corpus, Timeline, UserClass};
use crate::relevance::RelevanceLabel;
use crate::sparse::{SparseMatrix, SparseRow};

/// Vocabulary of one text block. Columns are assigned in lexicographic
/// token order and only tokens seen in at least `min_df` users are kept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratumVocab {
    /// Relevance labels whose posts feed this block; one label when stratified.
    pub strata: Vec<RelevanceLabel>,
    pub tokens: Vec<String>,
    /// Number of train users whose posts in these strata contain the token.
    pub doc_freq: Vec<u32>,
    pub min_df: u32,
    #[serde(skip)]
    index: HashMap<String, u32>,
}

impl StratumVocab {
    fn new(strata: Vec<RelevanceLabel>, tokens: Vec<String>, doc_freq: Vec<u32>, min_df: u32) -> Self {
        let mut v = StratumVocab { strata, tokens, doc_freq, min_df, index: HashMap::new() };
        v.reindex();
        v
    }

    pub(crate) fn reindex(&mut self) {
        self.index = self.tokens.iter().enumerate().map(|(i, t)| (t.clone(), i as u32)).collect();
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn column(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn covers(&self, label: RelevanceLabel) -> bool {
        self.strata.contains(&label)
    }
}

/// Train-user count matrices, one per block, rows aligned with `user_ids`.
#[derive(Debug, Clone)]
pub struct BowMatrices {
    pub user_ids: Vec<String>,
    pub classes: Vec<UserClass>,
    pub blocks: Vec<(StratumVocab, SparseMatrix)>,
}

type UserCounts = Vec<HashMap<String, u32>>;

fn count_user(t: &Timeline, labels: &LabelMap, groups: &[Vec<RelevanceLabel>]) -> Result<UserCounts> {
    let mut counts: UserCounts = vec![HashMap::new(); groups.len()];
    for p in &t.publications {
        let label = labels.get(&p.post_id).ok_or_else(|| FeatureError::MissingLabel(p.post_id.clone()))?;
        let targets: Vec<usize> = (0..groups.len()).filter(|&g| groups[g].contains(label)).collect();
        if targets.is_empty() {
            continue;
        }
        for tok in tokenize(&p.text) {
            for &g in &targets {
                *counts[g].entry(tok.clone()).or_insert(0) += 1;
            }
        }
    }
    Ok(counts)
}

/// Builds one user-level count matrix per group of relevance labels, over
/// train users only. A user's row in a block counts tokens from their posts
/// whose label belongs to that block's group.
pub fn build_bow(
    corpus: &Corpus,
    labels: &LabelMap,
    groups: &[Vec<RelevanceLabel>],
    min_df: u32,
) -> Result<BowMatrices> {
    let train: Vec<&Timeline> = corpus.train().collect();
    if train.is_empty() {
        return Err(FeatureError::NoTrainUsers);
    }
    let per_user: Vec<UserCounts> = train.par_iter().map(|t| count_user(t, labels, groups)).collect::<Result<_>>()?;

    let mut blocks = Vec::with_capacity(groups.len());
    for (g, strata) in groups.iter().enumerate() {
        let mut df: HashMap<&str, u32> = HashMap::new();
        for counts in &per_user {
            for tok in counts[g].keys() {
                *df.entry(tok.as_str()).or_insert(0) += 1;
            }
        }
        let mut kept: Vec<(&str, u32)> = df.into_iter().filter(|&(_, d)| d >= min_df).collect();
        kept.sort_unstable_by(|a, b| a.0.cmp(b.0));
        let vocab = StratumVocab::new(
            strata.clone(),
            kept.iter().map(|(t, _)| (*t).to_string()).collect(),
            kept.iter().map(|&(_, d)| d).collect(),
            min_df,
        );
        let rows: Vec<SparseRow> = per_user
            .iter()
            .map(|counts| {
                let mut row: SparseRow =
                    counts[g].iter().filter_map(|(tok, &n)| vocab.column(tok).map(|c| (c, f64::from(n)))).collect();
                row.sort_unstable_by_key(|&(c, _)| c);
                row
            })
            .collect();
        let matrix = SparseMatrix { n_cols: vocab.len(), rows };
        blocks.push((vocab, matrix));
    }
    Ok(BowMatrices {
        user_ids: train.iter().map(|t| t.user_id.clone()).collect(),
        classes: train.iter().map(|t| t.label).collect(),
        blocks,
    })
}

/// One block per relevance label, in High, Medium, Low order.
pub fn build_stratified_bow(corpus: &Corpus, labels: &LabelMap, min_df: u32) -> Result<BowMatrices> {
    let groups: Vec<Vec<RelevanceLabel>> = RelevanceLabel::ALL.iter().map(|&l| vec![l]).collect();
    build_bow(corpus, labels, &groups, min_df)
}
