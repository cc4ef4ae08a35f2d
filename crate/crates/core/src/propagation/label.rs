use std::collections::HashMap;

use rayon::prelude::*;

use super::{predict_relevance, RelevanceModel};
use crate::corpus::Corpus;
use crate::relevance::{AnnotationRecord, Source};

/// One record per publication, in corpus order. Existing LLM records are
/// kept verbatim; every other publication gets a propagated record.
pub fn label_corpus(model: &RelevanceModel, corpus: &Corpus, existing: &[AnnotationRecord]) -> Vec<AnnotationRecord> {
    let mut llm: HashMap<&str, &AnnotationRecord> = HashMap::new();
    for r in existing.iter().filter(|r| r.source == Source::Llm) {
        llm.entry(r.post_id.as_str()).or_insert(r);
    }
    let model_id = model.model_id();
    let per_user: Vec<Vec<AnnotationRecord>> = corpus
        .timelines
        .par_iter()
        .map(|t| {
            t.publications
                .iter()
                .map(|p| match llm.get(p.post_id.as_str()) {
                    Some(r) => (*r).clone(),
                    None => {
                        let (label, probs) = predict_relevance(model, &p.text);
                        AnnotationRecord {
                            post_id: p.post_id.clone(),
                            label,
                            raw_response: label.code().to_string(),
                            source: Source::Propagated,
                            model_id: model_id.clone(),
                            template_hash: model.header.template_hash.clone(),
                            probabilities: Some(probs),
                        }
                    }
                })
                .collect()
        })
        .collect();
    per_user.into_iter().flatten().collect()
}

/// Record counts per label in code order.
pub fn label_counts(records: &[AnnotationRecord]) -> [usize; 3] {
    let mut out = [0; 3];
    for r in records {
        out[r.label.index()] += 1;
    }
    out
}
