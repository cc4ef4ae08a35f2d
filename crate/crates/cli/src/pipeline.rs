use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::PathBuf;

use promptbow_core::classifier::{self, evaluate, fit, predict_proba, sweep_threshold, EvalReport, LogisticModel};
use promptbow_core::corpus::{
    compute_stats, generate_synthetic, load_corpus, sample_publications, split_corpus, write_corpus, Corpus,
};
use promptbow_core::digest::json_digest;
use promptbow_core::features::{fit_feature_space, transform_user, write_triplets, LabelMap};
use promptbow_core::propagation::{label_corpus, label_counts, train_relevance_model};
use promptbow_core::relevance::{
    annotate_batch, annotate_with_config, distribution_of, AnnotationCache, AnnotationRecord, BatchOptions,
    BatchReport, KeywordAnnotator, RelevanceLabel,
};
use promptbow_core::sparse::{SparseMatrix, SparseVector};
use promptbow_core::{Publication, UserClass};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::artifact::{file_digest, read_json, read_jsonl, stage_key, Manifest, Staging};
use crate::{PipelineConfig, PipelineError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Synth,
    Ingest,
    Stats,
    Sample,
    Annotate,
    Propagate,
    Featurize,
    Train,
    Evaluate,
}

impl Stage {
    pub const ALL: [Stage; 9] = [
        Stage::Synth,
        Stage::Ingest,
        Stage::Stats,
        Stage::Sample,
        Stage::Annotate,
        Stage::Propagate,
        Stage::Featurize,
        Stage::Train,
        Stage::Evaluate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Synth => "synth",
            Stage::Ingest => "ingest",
            Stage::Stats => "stats",
            Stage::Sample => "sample",
            Stage::Annotate => "annotate",
            Stage::Propagate => "propagate",
            Stage::Featurize => "featurize",
            Stage::Train => "train",
            Stage::Evaluate => "evaluate",
        }
    }

    pub fn from_name(name: &str) -> Option<Stage> {
        Stage::ALL.into_iter().find(|s| s.name() == name)
    }

    /// Upstream stages whose artifacts this stage reads.
    pub fn inputs(self, config: &PipelineConfig) -> Vec<Stage> {
        match self {
            Stage::Synth => vec![],
            Stage::Ingest if config.paths.corpus.is_some() => vec![],
            Stage::Ingest => vec![Stage::Synth],
            Stage::Stats | Stage::Sample => vec![Stage::Ingest],
            Stage::Annotate => vec![Stage::Sample],
            Stage::Propagate => vec![Stage::Ingest, Stage::Sample, Stage::Annotate],
            Stage::Featurize => vec![Stage::Ingest, Stage::Propagate],
            Stage::Train => vec![Stage::Featurize],
            Stage::Evaluate => vec![Stage::Featurize, Stage::Train],
        }
    }

    /// The part of the configuration that can change this stage's output.
    fn config_slice(self, config: &PipelineConfig) -> Result<Value> {
        Ok(match self {
            Stage::Synth => json!(config.synth),
            Stage::Ingest => json!({ "test_fraction": config.split.test_fraction, "seed": config.seed }),
            Stage::Stats => json!({}),
            Stage::Sample => json!({ "size": config.sample.size, "seed": config.seed }),
            Stage::Annotate => {
                let template = config.llm.template()?;
                let model = if config.llm.mock {
                    json!({
                        "mock": KeywordAnnotator::MODEL_ID,
                        "high": config.synth.tier_tokens(RelevanceLabel::High),
                        "medium": config.synth.tier_tokens(RelevanceLabel::Medium),
                    })
                } else {
                    json!({ "model": config.llm.client.model, "base_url": config.llm.client.base_url })
                };
                json!({ "template": template.hash(), "model": model })
            }
            Stage::Propagate => json!(config.propagation),
            Stage::Featurize => json!(config.features),
            Stage::Train => json!(config.fit),
            Stage::Evaluate => json!({ "model_name": model_name(config) }),
        })
    }

    /// Stages `run_all` executes, in order.
    pub fn plan(config: &PipelineConfig) -> Vec<Stage> {
        Stage::ALL.into_iter().filter(|s| *s != Stage::Synth || config.paths.corpus.is_none()).collect()
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn model_name(config: &PipelineConfig) -> &'static str {
    if config.features.pooled_text {
        "Pooled BoW"
    } else {
        "Prompt.BoW"
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StageStatus {
    Ran,
    Skipped,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub stages: Vec<(Stage, StageStatus)>,
    pub report: EvalReport,
    /// Exact bytes of the evaluate stage's `eval.json`.
    pub report_bytes: Vec<u8>,
}

impl RunSummary {
    pub fn ran(&self) -> Vec<Stage> {
        self.stages.iter().filter(|(_, s)| *s == StageStatus::Ran).map(|(st, _)| *st).collect()
    }
}

/// One user's row in the featurize artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRow {
    pub user_id: String,
    pub class: UserClass,
    pub vector: SparseVector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub user_id: String,
    pub truth: UserClass,
    pub predicted: UserClass,
    pub probability: f64,
}

/// A configuration bound to its artifacts directory.
pub struct Pipeline<'a> {
    pub config: &'a PipelineConfig,
}

impl<'a> Pipeline<'a> {
    pub fn new(config: &'a PipelineConfig) -> Self {
        Pipeline { config }
    }

    pub fn dir(&self, stage: Stage) -> PathBuf {
        self.config.paths.artifacts.join(stage.name())
    }

    pub fn file(&self, stage: Stage, name: &str) -> PathBuf {
        self.dir(stage).join(name)
    }

    pub fn manifest(&self, stage: Stage) -> Result<Option<Manifest>> {
        Manifest::read(&self.dir(stage))
    }

    /// Content digests of every input. A missing input is reported as the
    /// closest upstream stage that has not run.
    fn input_digests(&self, stage: Stage) -> Result<BTreeMap<String, String>> {
        let mut out = BTreeMap::new();
        for up in stage.inputs(self.config).into_iter().rev() {
            let m = self.manifest(up)?.ok_or_else(|| PipelineError::MissingArtifact(up.name().into()))?;
            out.insert(up.name().to_string(), m.content_digest);
        }
        if stage == Stage::Ingest {
            if let Some(path) = &self.config.paths.corpus {
                out.insert("corpus_file".into(), file_digest(path)?);
            }
        }
        Ok(out)
    }

    fn key(&self, stage: Stage) -> Result<(String, BTreeMap<String, String>, String)> {
        let inputs = self.input_digests(stage)?;
        let config_digest = json_digest(&stage.config_slice(self.config)?);
        let key = stage_key(stage.name(), &config_digest, &inputs);
        Ok((config_digest, inputs, key))
    }

    /// True when the stage's artifact matches the current config and inputs.
    pub fn is_fresh(&self, stage: Stage) -> Result<bool> {
        let Some(m) = self.manifest(stage)? else { return Ok(false) };
        let (_, _, key) = self.key(stage)?;
        Ok(m.key == key && m.payload_intact(&self.dir(stage)))
    }

    fn corpus(&self) -> Result<Corpus> {
        Ok(load_corpus(self.file(Stage::Ingest, "corpus.jsonl"))?)
    }

    fn labels(&self) -> Result<LabelMap> {
        let records: Vec<AnnotationRecord> = read_jsonl(&self.file(Stage::Propagate, "labels.jsonl"))?;
        Ok(records.into_iter().map(|r| (r.post_id, r.label)).collect())
    }

    fn feature_rows(&self, split: &str) -> Result<Vec<FeatureRow>> {
        read_jsonl(&self.file(Stage::Featurize, &format!("{split}.jsonl")))
    }

    pub fn run(&self, stage: Stage) -> Result<Manifest> {
        let (config_digest, inputs, _) = self.key(stage)?;
        fs::create_dir_all(&self.config.paths.artifacts)
            .map_err(|e| PipelineError::io(&self.config.paths.artifacts, e))?;
        let mut out = Staging::new(&self.dir(stage))?;
        match stage {
            Stage::Synth => self.synth(&mut out)?,
            Stage::Ingest => self.ingest(&mut out)?,
            Stage::Stats => self.stats(&mut out)?,
            Stage::Sample => self.sample(&mut out)?,
            Stage::Annotate => self.annotate(&mut out)?,
            Stage::Propagate => self.propagate(&mut out)?,
            Stage::Featurize => self.featurize(&mut out)?,
            Stage::Train => self.train(&mut out)?,
            Stage::Evaluate => self.evaluate(&mut out)?,
        }
        out.commit(stage.name(), config_digest, inputs)
    }

    fn synth(&self, out: &mut Staging) -> Result<()> {
        let corpus = generate_synthetic(&self.config.synth)?;
        write_corpus(&corpus, out.path("corpus.jsonl")).map_err(|e| PipelineError::io(&out.path("corpus.jsonl"), e))?;
        out.adopt("corpus.jsonl")
    }

    fn ingest(&self, out: &mut Staging) -> Result<()> {
        let source = match &self.config.paths.corpus {
            Some(p) => p.clone(),
            None => self.file(Stage::Synth, "corpus.jsonl"),
        };
        let corpus = split_corpus(load_corpus(&source)?, self.config.split.test_fraction, self.config.seed)?;
        write_corpus(&corpus, out.path("corpus.jsonl")).map_err(|e| PipelineError::io(&out.path("corpus.jsonl"), e))?;
        out.adopt("corpus.jsonl")
    }

    fn stats(&self, out: &mut Staging) -> Result<()> {
        let stats = compute_stats(&self.corpus()?)?;
        out.write_json("stats.json", &stats)?;
        out.write("stats.txt", stats.to_string().as_bytes())
    }

    fn sample(&self, out: &mut Staging) -> Result<()> {
        let sample = sample_publications(&self.corpus()?, self.config.sample.size, self.config.seed)?;
        out.write_jsonl("sample.jsonl", &sample)
    }

    fn annotate(&self, out: &mut Staging) -> Result<()> {
        let sample: Vec<Publication> = read_jsonl(&self.file(Stage::Sample, "sample.jsonl"))?;
        let template = self.config.llm.template()?;
        let cache_path = &self.config.paths.cache;
        if let Some(parent) = cache_path.parent() {
            fs::create_dir_all(parent).map_err(|e| PipelineError::io(parent, e))?;
        }
        let mut cache = AnnotationCache::open(cache_path)?;
        let report: BatchReport = if self.config.llm.mock {
            let synth = &self.config.synth;
            let backend = KeywordAnnotator::new(
                &template,
                &synth.tier_tokens(RelevanceLabel::High),
                &synth.tier_tokens(RelevanceLabel::Medium),
            );
            let options = BatchOptions { requests_per_second: None, ..BatchOptions::from(&self.config.llm.client) };
            annotate_batch(&sample, &template, &backend, &mut cache, &options)
        } else {
            annotate_with_config(&sample, &template, &self.config.llm.client, &mut cache)?
        };
        let records: Vec<&AnnotationRecord> = report.records().collect();
        out.write_jsonl("annotations.jsonl", records)?;
        let failures: Vec<Value> = report
            .failures()
            .map(|f| json!({ "post_id": f.post_id, "error": f.result.as_ref().err().map(|e| e.to_string()) }))
            .collect();
        // Run statistics stay outside the content digest: a warm cache must
        // not invalidate downstream stages.
        write_log(
            out,
            "run.json",
            &json!({
                "requested": sample.len(),
                "annotated": report.records().count(),
                "failed": failures.len(),
                "cache_hits": report.cache_hits(),
                "network_calls": report.network_calls,
                "failures": failures,
            }),
        )
    }

    fn propagate(&self, out: &mut Staging) -> Result<()> {
        let corpus = self.corpus()?;
        let sample: Vec<Publication> = read_jsonl(&self.file(Stage::Sample, "sample.jsonl"))?;
        let records: Vec<AnnotationRecord> = read_jsonl(&self.file(Stage::Annotate, "annotations.jsonl"))?;
        let (model, mut report) = train_relevance_model(&records, &sample, &self.config.propagation)?;
        let labels = label_corpus(&model, &corpus, &records);
        report.corpus_distribution = Some(label_counts(&labels));
        let distribution = distribution_of(&labels, &corpus)?;
        model.save(out.path("model.bin"))?;
        out.adopt("model.bin")?;
        out.write_jsonl("labels.jsonl", &labels)?;
        out.write_json("report.json", &report)?;
        out.write_json("distribution.json", &distribution)?;
        out.write("distribution.txt", distribution.to_string().as_bytes())
    }

    fn featurize(&self, out: &mut Staging) -> Result<()> {
        let corpus = self.corpus()?;
        let labels = self.labels()?;
        let space = fit_feature_space(&corpus, &labels, &self.config.features)?;
        space.save(out.path("space.json"))?;
        out.adopt("space.json")?;
        for (name, train) in [("train", true), ("test", false)] {
            let users: Vec<_> = corpus.timelines.iter().filter(|t| t.is_train() == train).collect();
            let vectors: Vec<_> = users.iter().map(|t| transform_user(&space, t, &labels)).collect();
            let rows: Vec<FeatureRow> = users
                .iter()
                .zip(&vectors)
                .map(|(t, v)| FeatureRow { user_id: t.user_id.clone(), class: t.label, vector: v.vector.clone() })
                .collect();
            out.write_jsonl(&format!("{name}.jsonl"), &rows)?;
            let mut triplets = Vec::new();
            write_triplets(&vectors, &mut triplets).map_err(|e| PipelineError::io(&out.path(name), e))?;
            out.write(&format!("{name}.triplets"), &triplets)?;
        }
        Ok(())
    }

    fn train(&self, out: &mut Staging) -> Result<()> {
        let rows = self.feature_rows("train")?;
        let (x, y) = design(&rows)?;
        let model = fit(&x, &y, &self.config.fit)?;
        model.save(out.path("model.json"))?;
        out.adopt("model.json")
    }

    fn evaluate(&self, out: &mut Staging) -> Result<()> {
        let model = LogisticModel::load(self.file(Stage::Train, "model.json"))?;
        let rows = self.feature_rows("test")?;
        let predictions = rows
            .iter()
            .map(|r| {
                let p = predict_proba(&model, &r.vector)?;
                let predicted = if p >= model.threshold { UserClass::Diagnosed } else { UserClass::Control };
                Ok(Prediction { user_id: r.user_id.clone(), truth: r.class, predicted, probability: p })
            })
            .collect::<std::result::Result<Vec<_>, classifier::ClassifierError>>()?;
        let predicted: Vec<UserClass> = predictions.iter().map(|p| p.predicted).collect();
        let truth: Vec<UserClass> = predictions.iter().map(|p| p.truth).collect();
        let report = evaluate(&predicted, &truth)?.named(model_name(self.config)).with_threshold(model.threshold);
        out.write_json("eval.json", &report)?;
        out.write("eval.txt", report.to_string().as_bytes())?;
        out.write_jsonl("predictions.jsonl", &predictions)
    }
}

fn write_log(out: &mut Staging, name: &str, value: &Value) -> Result<()> {
    let path = out.path(name);
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| PipelineError::Artifact(e.to_string()))?;
    bytes.push(b'\n');
    fs::write(&path, bytes).map_err(|e| PipelineError::io(&path, e))
}

fn design(rows: &[FeatureRow]) -> Result<(SparseMatrix, Vec<UserClass>)> {
    let width = rows.first().map_or(0, |r| r.vector.dim);
    if rows.iter().any(|r| r.vector.dim != width) {
        return Err(PipelineError::Artifact("feature rows disagree on width".into()));
    }
    Ok((SparseMatrix::from_vectors(rows.iter().map(|r| &r.vector), width), rows.iter().map(|r| r.class).collect()))
}

/// Runs one stage unconditionally. Upstream artifacts must already exist.
pub fn run_stage(stage: Stage, config: &PipelineConfig) -> Result<Manifest> {
    Pipeline::new(config).run(stage)
}

/// Runs every stage in order, skipping those whose artifact is current.
pub fn run_all(config: &PipelineConfig) -> Result<RunSummary> {
    let pipeline = Pipeline::new(config);
    let mut stages = Vec::new();
    for stage in Stage::plan(config) {
        let status = if pipeline.is_fresh(stage)? {
            StageStatus::Skipped
        } else {
            pipeline.run(stage)?;
            StageStatus::Ran
        };
        stages.push((stage, status));
    }
    let eval_path = pipeline.file(Stage::Evaluate, "eval.json");
    let report_bytes = fs::read(&eval_path).map_err(|e| PipelineError::io(&eval_path, e))?;
    let report = read_json(&eval_path)?;
    Ok(RunSummary { stages, report, report_bytes })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub validation_users: usize,
    pub reports: Vec<EvalReport>,
    pub best_threshold: f64,
}

/// Picks a decision threshold on a validation slice of the Train users.
///
/// Every `1/validation_fraction`-th user of each class (by user id) is held
/// out, a model is fitted on the rest with the configured fit settings, and
/// each candidate is scored by F1 on the held-out users. The result is
/// written to `<artifacts>/sweep/`; the trained model is left untouched.
pub fn sweep(config: &PipelineConfig, candidates: &[f64], validation_fraction: f64) -> Result<SweepReport> {
    if !(validation_fraction > 0.0 && validation_fraction < 1.0) {
        return Err(PipelineError::Config("validation fraction must be in (0, 1)".into()));
    }
    let pipeline = Pipeline::new(config);
    let manifest =
        pipeline.manifest(Stage::Featurize)?.ok_or_else(|| PipelineError::MissingArtifact("featurize".into()))?;
    let mut rows = pipeline.feature_rows("train")?;
    rows.sort_by(|a, b| a.user_id.cmp(&b.user_id));
    let stride = (1.0 / validation_fraction).round().max(2.0) as usize;
    let mut seen = [0usize; 2];
    let (mut fit_rows, mut val_rows) = (Vec::new(), Vec::new());
    for r in rows {
        let c = usize::from(!r.class.is_positive());
        seen[c] += 1;
        if seen[c] % stride == 0 {
            val_rows.push(r);
        } else {
            fit_rows.push(r);
        }
    }
    let (x, y) = design(&fit_rows)?;
    let model = fit(&x, &y, &config.fit)?;
    let probs =
        val_rows.iter().map(|r| predict_proba(&model, &r.vector)).collect::<std::result::Result<Vec<_>, _>>()?;
    let truth: Vec<UserClass> = val_rows.iter().map(|r| r.class).collect();
    let (reports, best) = sweep_threshold(&probs, &truth, candidates)?;
    let report = SweepReport {
        validation_users: val_rows.len(),
        best_threshold: candidates[best],
        reports: reports.into_iter().map(|r| r.named(model_name(config))).collect(),
    };
    let mut out = Staging::new(&config.paths.artifacts.join("sweep"))?;
    out.write_json("sweep.json", &report)?;
    let inputs = BTreeMap::from([("featurize".to_string(), manifest.content_digest)]);
    out.commit("sweep", json_digest(&(&config.fit, candidates, validation_fraction)), inputs)?;
    Ok(report)
}
