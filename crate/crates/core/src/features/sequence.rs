use std::collections::BTreeMap;

use crate::relevance::RelevanceLabel;

pub type LabelNgram = Vec<RelevanceLabel>;

/// Counts of consecutive label n-grams along a time-ordered label sequence.
/// Sequences shorter than `order` give an empty map.
pub fn label_sequence_ngrams(labels: &[RelevanceLabel], order: usize) -> BTreeMap<LabelNgram, u32> {
    assert!(order >= 1, "n-gram order must be at least 1");
    let mut counts = BTreeMap::new();
    for window in labels.windows(order) {
        *counts.entry(window.to_vec()).or_insert(0) += 1;
    }
    counts
}

/// Every label n-gram of the given order, in lexicographic code order.
pub fn all_label_ngrams(order: usize) -> Vec<LabelNgram> {
    let mut out: Vec<LabelNgram> = vec![Vec::new()];
    for _ in 0..order {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                RelevanceLabel::ALL.iter().map(move |&l| {
                    let mut g = prefix.clone();
                    g.push(l);
                    g
                })
            })
            .collect();
    }
    out
}
