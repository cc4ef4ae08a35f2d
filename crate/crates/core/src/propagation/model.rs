use std::collections::HashMap;
use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{HashedFeaturizer, PropagationConfig, PropagationError, Result, MIN_PER_LABEL};
use crate::corpus::Publication;
use crate::digest::json_digest;
use crate::relevance::{AnnotationRecord, RelevanceLabel, Source};
use crate::sparse::SparseVector;

pub const MODEL_FORMAT: &str = "promptbow-relevance-model";
pub const MODEL_VERSION: u32 = 1;

/// First line of the model artifact; the dense weights follow as
/// little-endian `f64`s, three rows of `hash_dim` then three biases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelHeader {
    pub format: String,
    pub version: u32,
    pub featurizer: HashedFeaturizer,
    pub seed: u64,
    pub config_digest: String,
    /// Template hash shared by the training annotations.
    pub template_hash: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelevanceModel {
    pub header: ModelHeader,
    /// One row per label in code order.
    pub weights: [Vec<f64>; 3],
    pub bias: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropagationReport {
    pub train_size: usize,
    pub heldout_size: usize,
    /// `None` when nothing was held out.
    pub heldout_accuracy: Option<f64>,
    /// `confusion[true][predicted]`, indexed by label code order.
    pub confusion: [[usize; 3]; 3],
    /// Label counts over the labeled corpus, once propagation has run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corpus_distribution: Option<[usize; 3]>,
}

impl RelevanceModel {
    fn zeros(header: ModelHeader) -> Self {
        let dim = header.featurizer.dim;
        RelevanceModel { header, weights: [vec![0.0; dim], vec![0.0; dim], vec![0.0; dim]], bias: [0.0; 3] }
    }

    /// Identifier stamped on propagated records.
    pub fn model_id(&self) -> String {
        format!("hashed-linear-v{MODEL_VERSION}:{}", &self.header.config_digest[..12])
    }

    pub fn probabilities(&self, x: &SparseVector) -> [f64; 3] {
        let z: [f64; 3] = std::array::from_fn(|k| x.dot(&self.weights[k]) + self.bias[k]);
        softmax(z)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = Vec::with_capacity(8 * (3 * self.header.featurizer.dim + 3) + 512);
        serde_json::to_writer(&mut out, &self.header).map_err(|e| PropagationError::Artifact(e.to_string()))?;
        out.push(b'\n');
        for row in &self.weights {
            for w in row {
                out.extend_from_slice(&w.to_le_bytes());
            }
        }
        for b in &self.bias {
            out.extend_from_slice(&b.to_le_bytes());
        }
        let mut f = fs::File::create(path)?;
        f.write_all(&out)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let mut reader = BufReader::new(fs::File::open(path)?);
        let mut line = String::new();
        reader.read_line(&mut line)?;
        let header: ModelHeader =
            serde_json::from_str(line.trim_end()).map_err(|e| PropagationError::Artifact(e.to_string()))?;
        if header.format != MODEL_FORMAT || header.version != MODEL_VERSION {
            return Err(PropagationError::Artifact(format!(
                "expected {MODEL_FORMAT} v{MODEL_VERSION}, found {} v{}",
                header.format, header.version
            )));
        }
        let dim = header.featurizer.dim;
        let mut payload = Vec::new();
        reader.read_to_end(&mut payload)?;
        if payload.len() != 8 * (3 * dim + 3) {
            return Err(PropagationError::Artifact(format!(
                "payload has {} bytes, expected {}",
                payload.len(),
                8 * (3 * dim + 3)
            )));
        }
        let mut values = payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap()));
        let mut model = RelevanceModel::zeros(header);
        for row in &mut model.weights {
            for w in row.iter_mut() {
                *w = values.next().unwrap();
            }
        }
        for b in &mut model.bias {
            *b = values.next().unwrap();
        }
        Ok(model)
    }
}

fn softmax(z: [f64; 3]) -> [f64; 3] {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e = z.map(|v| (v - m).exp());
    let s: f64 = e.iter().sum();
    e.map(|v| v / s)
}

/// Index of the largest probability; ties go to the lower code.
fn argmax(p: &[f64; 3]) -> usize {
    let mut best = 0;
    for k in 1..3 {
        if p[k] > p[best] {
            best = k;
        }
    }
    best
}

pub fn predict_relevance(model: &RelevanceModel, text: &str) -> (RelevanceLabel, [f64; 3]) {
    let p = model.probabilities(&model.header.featurizer.featurize(text));
    (RelevanceLabel::from_index(argmax(&p)), p)
}

/// Trains on a seeded 90/10-style split of the annotated sample with
/// multinomial logistic loss and L2, by plain SGD. Weight decay is applied
/// through a running scale so each step touches only the sample's nonzeros.
pub fn train_relevance_model(
    records: &[AnnotationRecord],
    publications: &[Publication],
    config: &PropagationConfig,
) -> Result<(RelevanceModel, PropagationReport)> {
    config.validate()?;
    let texts: HashMap<&str, &str> = publications.iter().map(|p| (p.post_id.as_str(), p.text.as_str())).collect();
    let mut support = [0usize; 3];
    for r in records {
        if r.source != Source::Llm {
            return Err(PropagationError::NotLlm(r.post_id.clone()));
        }
        if !texts.contains_key(r.post_id.as_str()) {
            return Err(PropagationError::UnknownPost(r.post_id.clone()));
        }
        support[r.label.index()] += 1;
    }
    for label in RelevanceLabel::ALL {
        if support[label.index()] < MIN_PER_LABEL {
            return Err(PropagationError::InsufficientLabels { label, found: support[label.index()] });
        }
    }

    let featurizer = HashedFeaturizer {
        dim: config.hash_dim,
        char_min: config.char_ngram_min,
        char_max: config.char_ngram_max,
        words: config.word_unigrams,
    };
    let mut template_hashes: Vec<&str> = records.iter().map(|r| r.template_hash.as_str()).collect();
    template_hashes.sort_unstable();
    let header = ModelHeader {
        format: MODEL_FORMAT.into(),
        version: MODEL_VERSION,
        featurizer: featurizer.clone(),
        seed: config.seed,
        config_digest: json_digest(config),
        template_hash: template_hashes[0].to_string(),
    };

    // Canonical order first so the split does not depend on input order.
    let mut order: Vec<&AnnotationRecord> = records.iter().collect();
    order.sort_by(|a, b| a.post_id.cmp(&b.post_id));
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    order.shuffle(&mut rng);
    let n_hold = (records.len() as f64 * config.holdout_fraction).round() as usize;
    let (heldout, train) = order.split_at(n_hold);

    let examples: Vec<(SparseVector, usize)> =
        train.iter().map(|r| (featurizer.featurize(texts[r.post_id.as_str()]), r.label.index())).collect();

    let mut model = RelevanceModel::zeros(header);
    let mut scale = 1.0f64;
    let mut idx: Vec<usize> = (0..examples.len()).collect();
    let mut step = 0usize;
    for _ in 0..config.epochs {
        idx.shuffle(&mut rng);
        for &i in &idx {
            let (x, y) = &examples[i];
            let lr = config.learning_rate / (1.0 + config.learning_rate * config.l2 * step as f64);
            step += 1;
            let z: [f64; 3] = std::array::from_fn(|k| scale * x.dot(&model.weights[k]) + model.bias[k]);
            let p = softmax(z);
            scale *= 1.0 - lr * config.l2;
            for (k, pk) in p.into_iter().enumerate() {
                let g = pk - if k == *y { 1.0 } else { 0.0 };
                let row = &mut model.weights[k];
                for &(j, v) in &x.entries {
                    row[j as usize] -= lr * g * v / scale;
                }
                model.bias[k] -= lr * g;
            }
            if scale < 1e-6 {
                fold_scale(&mut model, &mut scale);
            }
        }
    }
    fold_scale(&mut model, &mut scale);

    let mut confusion = [[0usize; 3]; 3];
    for r in heldout {
        let (pred, _) = predict_relevance(&model, texts[r.post_id.as_str()]);
        confusion[r.label.index()][pred.index()] += 1;
    }
    let correct: usize = (0..3).map(|k| confusion[k][k]).sum();
    let report = PropagationReport {
        train_size: train.len(),
        heldout_size: heldout.len(),
        heldout_accuracy: (!heldout.is_empty()).then(|| correct as f64 / heldout.len() as f64),
        confusion,
        corpus_distribution: None,
    };
    Ok((model, report))
}

fn fold_scale(model: &mut RelevanceModel, scale: &mut f64) {
    if *scale != 1.0 {
        for row in &mut model.weights {
            for w in row.iter_mut() {
                *w *= *scale;
            }
        }
        *scale = 1.0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use RelevanceLabel::{High, Low, Medium};

    /// Posts whose label is fixed by one marker token amid shared filler.
    fn toy(n_per_label: usize) -> (Vec<AnnotationRecord>, Vec<Publication>) {
        let mut records = Vec::new();
        let mut pubs = Vec::new();
        let fillers = ["hoje o dia foi", "amanhã vou sair com", "não sei bem se", "acho que vai chover em"];
        for (li, (label, marker)) in [(High, "desespero"), (Medium, "insônia"), (Low, "futebol")].iter().enumerate() {
            for i in 0..n_per_label {
                let post_id = format!("p{li}-{i:03}");
                let text = format!("{} {marker} {}", fillers[i % 4], fillers[(i + 1) % 4]);
                pubs.push(Publication { user_id: "u".into(), post_id: post_id.clone(), timestamp: 0, text });
                records.push(AnnotationRecord {
                    post_id,
                    label: *label,
                    raw_response: label.code().to_string(),
                    source: Source::Llm,
                    model_id: "m".into(),
                    template_hash: "t".into(),
                    probabilities: None,
                });
            }
        }
        (records, pubs)
    }

    fn small_config() -> PropagationConfig {
        PropagationConfig { hash_dim: 1 << 14, ..PropagationConfig::default() }
    }

    #[test]
    fn separable_toy_set() {
        let (records, pubs) = toy(20);
        let (model, report) = train_relevance_model(&records, &pubs, &small_config()).unwrap();
        assert_eq!(report.heldout_size, 6);
        assert_eq!(report.train_size, 54);
        assert_eq!(report.heldout_accuracy, Some(1.0));
        for (k, row) in report.confusion.iter().enumerate() {
            let support = records.iter().filter(|r| r.label.index() == k).count();
            assert!(row.iter().sum::<usize>() <= support);
        }
        assert_eq!(predict_relevance(&model, "não sei bem se desespero").0, High);
        assert_eq!(predict_relevance(&model, "insônia").0, Medium);
        assert_eq!(predict_relevance(&model, "futebol hoje").0, Low);
    }

    #[test]
    fn confusion_rows_sum_to_heldout_support() {
        let (records, pubs) = toy(30);
        let cfg = PropagationConfig { holdout_fraction: 0.3, ..small_config() };
        let (_, report) = train_relevance_model(&records, &pubs, &cfg).unwrap();
        let total: usize = report.confusion.iter().flatten().sum();
        assert_eq!(total, report.heldout_size);
        assert_eq!(report.heldout_size, 27);
    }

    #[test]
    fn insufficient_and_not_llm() {
        let (mut records, pubs) = toy(5);
        records.retain(|r| !["p0-002", "p0-003", "p0-004"].contains(&r.post_id.as_str()));
        assert!(matches!(
            train_relevance_model(&records, &pubs, &small_config()),
            Err(PropagationError::InsufficientLabels { label: High, found: 2 })
        ));
        let (mut records, pubs) = toy(5);
        records[0].source = Source::Propagated;
        assert!(matches!(train_relevance_model(&records, &pubs, &small_config()), Err(PropagationError::NotLlm(_))));
    }

    #[test]
    fn deterministic_weights() {
        let (records, pubs) = toy(10);
        let (a, _) = train_relevance_model(&records, &pubs, &small_config()).unwrap();
        let mut rev = records.clone();
        rev.reverse();
        let (b, _) = train_relevance_model(&rev, &pubs, &small_config()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn probabilities_sum_to_one_and_empty_text_uses_bias() {
        let (records, pubs) = toy(10);
        let (model, _) = train_relevance_model(&records, &pubs, &small_config()).unwrap();
        for t in ["", "desespero futebol", "xyz"] {
            let (_, p) = predict_relevance(&model, t);
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
        let (label, p) = predict_relevance(&model, "");
        assert_eq!(p, softmax(model.bias));
        assert_eq!(label.index(), argmax(&softmax(model.bias)));
    }

    #[test]
    fn argmax_tie_break() {
        assert_eq!(argmax(&[0.2, 0.5, 0.3]), Medium.index());
        assert_eq!(argmax(&[1.0 / 3.0; 3]), High.index());
        assert_eq!(argmax(&[0.2, 0.4, 0.4]), Medium.index());
    }

    #[test]
    fn artifact_round_trip_and_version_refusal() {
        let (records, pubs) = toy(10);
        let (model, _) = train_relevance_model(&records, &pubs, &small_config()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.bin");
        model.save(&path).unwrap();
        assert_eq!(RelevanceModel::load(&path).unwrap(), model);

        let mut stale = model.clone();
        stale.header.version = MODEL_VERSION + 1;
        stale.save(&path).unwrap();
        assert!(matches!(RelevanceModel::load(&path), Err(PropagationError::Artifact(_))));
    }
}
