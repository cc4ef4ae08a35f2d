//! Acceptance checks, one PASS/FAIL line each. Runs offline with the
//! keyword annotator; exits non-zero when any check fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use promptbow_cli::{run_all, run_stage, PipelineConfig, Stage, StageStatus};
use promptbow_core::classifier::{loss_and_gradient, ClassWeight, FitConfig};
use promptbow_core::corpus::{generate_synthetic, split_corpus, SynthConfig};
use promptbow_core::features::{fit_feature_space, univariate_f_scores, FeatureConfig, LabelMap};
use promptbow_core::relevance::{
    annotate_batch, parse_response, AnnotationCache, BackendError, BatchOptions, CompletionBackend, DistributionReport,
    KeywordAnnotator, PromptTemplate, RelevanceError, RelevanceLabel, DEFAULT_TEMPLATE,
};
use promptbow_core::sparse::SparseMatrix;
use promptbow_core::{Publication, UserClass};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within_time(start: Instant, limit: Duration) -> Result<(), String> {
    let t = start.elapsed();
    ensure(t < limit, || format!("took {t:.1?}, limit {limit:?}"))
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * b.abs().max(1.0)
}

// Textbook two-group one-way ANOVA on a dense column.
fn anova_f(col: &[f64], y: &[UserClass]) -> f64 {
    let groups: Vec<Vec<f64>> =
        UserClass::ALL.iter().map(|&c| col.iter().zip(y).filter(|(_, &l)| l == c).map(|(&v, _)| v).collect()).collect();
    let n = col.len() as f64;
    let grand = col.iter().sum::<f64>() / n;
    let mut ssb = 0.0;
    let mut ssw = 0.0;
    for g in &groups {
        let mean = g.iter().sum::<f64>() / g.len() as f64;
        ssb += g.len() as f64 * (mean - grand).powi(2);
        ssw += g.iter().map(|v| (v - mean).powi(2)).sum::<f64>();
    }
    (ssb / 1.0) / (ssw / (n - 2.0))
}

fn ac1_anova_oracle() -> Check {
    let start = Instant::now();
    let hand = SparseMatrix::from_dense(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0].map(|v| vec![v]));
    let d = UserClass::Diagnosed;
    let c = UserClass::Control;
    let f = univariate_f_scores(&hand, &[d, d, d, c, c, c]).map_err(|e| e.to_string())?;
    ensure(f[0] == 13.5, || format!("hand case gave {}", f[0]))?;

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for trial in 0..50 {
        let n = rng.random_range(4..=20);
        let cols = rng.random_range(1..=30);
        let mut y: Vec<UserClass> = (0..n).map(|_| if rng.random_bool(0.4) { d } else { c }).collect();
        y[0] = d;
        y[1] = d;
        y[2] = c;
        y[3] = c;
        let dense: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..cols).map(|_| if rng.random_bool(0.3) { 0.0 } else { rng.random_range(-5.0..5.0) }).collect())
            .collect();
        let got = univariate_f_scores(&SparseMatrix::from_dense(&dense), &y).map_err(|e| e.to_string())?;
        for j in 0..cols {
            let col: Vec<f64> = dense.iter().map(|r| r[j]).collect();
            let want = anova_f(&col, &y);
            worst = worst.max((got[j] - want).abs() / want.abs().max(1.0));
            ensure(close(got[j], want, 1e-9), || format!("matrix {trial} column {j}: {} vs oracle {want}", got[j]))?;
        }
    }
    within_time(start, Duration::from_secs(5))?;
    Ok(format!("hand F = 13.5, 50 matrices, worst rel err {worst:.1e}"))
}

fn ac2_gradient_check() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for trial in 0..20 {
        let n = rng.random_range(2..=15);
        let dim = rng.random_range(1..=8);
        let dense: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..dim).map(|_| if rng.random_bool(0.25) { 0.0 } else { rng.random_range(-2.0..2.0) }).collect())
            .collect();
        let x = SparseMatrix::from_dense(&dense);
        let mut y: Vec<UserClass> =
            (0..n).map(|_| if rng.random_bool(0.3) { UserClass::Diagnosed } else { UserClass::Control }).collect();
        y[0] = UserClass::Diagnosed;
        y[1] = UserClass::Control;
        let config = FitConfig {
            l2: Some(rng.random_range(0.0..0.5)),
            class_weight: if trial % 2 == 0 { ClassWeight::Balanced } else { ClassWeight::None },
            ..FitConfig::default()
        };
        let w: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.5..1.5)).collect();
        let b = rng.random_range(-1.0..1.0);
        let (_, grad, gb) = loss_and_gradient(&w, b, &x, &y, &config).map_err(|e| e.to_string())?;
        let loss = |w: &[f64], b: f64| loss_and_gradient(w, b, &x, &y, &config).unwrap().0;
        let h = 1e-6;
        for j in 0..=dim {
            let (plus, minus) = if j < dim {
                let mut wp = w.clone();
                let mut wm = w.clone();
                wp[j] += h;
                wm[j] -= h;
                (loss(&wp, b), loss(&wm, b))
            } else {
                (loss(&w, b + h), loss(&w, b - h))
            };
            let fd = (plus - minus) / (2.0 * h);
            let analytic = if j < dim { grad[j] } else { gb };
            worst = worst.max((analytic - fd).abs() / fd.abs().max(1.0));
            ensure(close(analytic, fd, 1e-6), || format!("instance {trial} coordinate {j}: {analytic} vs {fd}"))?;
        }
    }
    within_time(start, Duration::from_secs(5))?;
    Ok(format!("20 instances, worst rel err {worst:.1e}"))
}

fn ac3_width_law() -> Check {
    let synth = SynthConfig {
        n_diagnosed: 20,
        posts_per_user: (60, 60),
        words_per_post: (20, 20),
        background_vocab: 30_000,
        zipf_exponent: 0.0,
        ..SynthConfig::default()
    };
    let corpus =
        split_corpus(generate_synthetic(&synth).map_err(|e| e.to_string())?, 0.2, 3).map_err(|e| e.to_string())?;
    let labels: LabelMap = corpus
        .timelines
        .iter()
        .flat_map(|t| t.publications.iter().enumerate())
        .map(|(i, p)| (p.post_id.clone(), RelevanceLabel::ALL[i % 3]))
        .collect();
    let config = FeatureConfig::default();
    let space = fit_feature_space(&corpus, &labels, &config).map_err(|e| e.to_string())?;
    let vocab: Vec<usize> = space.text_blocks.iter().map(|b| b.vocab.len()).collect();
    let ks = [config.k_high, config.k_medium, config.k_low];
    ensure(vocab.iter().zip(ks).all(|(&v, k)| v > k), || format!("vocabularies {vocab:?} do not exceed {ks:?}"))?;
    ensure(space.text_width() == 15_000, || format!("text width {}", space.text_width()))?;
    ensure(space.seq_width() == 9, || format!("order-2 sequence width {}", space.seq_width()))?;
    Ok(format!("vocabularies {vocab:?} -> text width 15000, sequence width 9"))
}

fn mock_config(root: &Path, seed: u64) -> PipelineConfig {
    let mut config = PipelineConfig::default().with_seed(seed);
    config.llm.mock = true;
    config.paths.artifacts = root.join(format!("artifacts-{seed}"));
    config.paths.cache = root.join(format!("cache-{seed}.jsonl"));
    config
}

fn ac4_planted_signal(root: &Path) -> Check {
    let start = Instant::now();
    let config = mock_config(root, 42);
    let summary = run_all(&config).map_err(|e| e.to_string())?;
    std::fs::write(root.join("stratified-eval.json"), &summary.report_bytes).map_err(|e| e.to_string())?;
    let stratified = summary.report;
    let mut pooled_config = config.clone();
    pooled_config.features.pooled_text = true;
    let pooled = run_all(&pooled_config).map_err(|e| e.to_string())?.report;
    within_time(start, Duration::from_secs(120))?;
    let detail = format!("stratified F1 {:.3}, pooled F1 {:.3}", stratified.f1, pooled.f1);
    ensure(stratified.f1 >= 0.85, || format!("{detail}; need >= 0.85"))?;
    ensure(pooled.f1 < stratified.f1, || format!("{detail}; pooled must be lower"))?;
    Ok(format!("{detail} in {:.1?}", start.elapsed()))
}

fn ac5_class_weighting(root: &Path) -> Check {
    let mut lines = Vec::new();
    for seed in 1..=5 {
        let mut config = mock_config(root, seed);
        let balanced = run_all(&config).map_err(|e| e.to_string())?.report;
        config.fit.class_weight = ClassWeight::None;
        let plain = run_all(&config).map_err(|e| e.to_string())?.report;
        lines.push(format!("seed {seed}: {:.2} vs {:.2}", balanced.recall, plain.recall));
        ensure(balanced.recall >= plain.recall, || format!("{}; balanced recall below unweighted", lines.join(", ")))?;
    }
    Ok(format!("balanced vs unweighted recall: {}", lines.join(", ")))
}

fn ac6_idempotence(root: &Path) -> Check {
    // Reuses the warm cache from the seed-42 run in a fresh artifact tree.
    let mut config = mock_config(root, 42);
    config.paths.artifacts = root.join("artifacts-rerun");
    let first = run_all(&config).map_err(|e| e.to_string())?;
    let second = run_all(&config).map_err(|e| e.to_string())?;
    let ran = second.ran();
    ensure(ran.is_empty(), || format!("rerun recomputed {ran:?}"))?;
    ensure(second.stages.iter().all(|(_, s)| *s == StageStatus::Skipped), || "stage not skipped".into())?;
    ensure(first.report_bytes == second.report_bytes, || "EvalReport bytes differ on rerun".into())?;

    let original = std::fs::read(root.join("stratified-eval.json")).map_err(|e| e.to_string())?;
    ensure(original == first.report_bytes, || "fresh recomputation gave a different EvalReport".into())?;

    run_stage(Stage::Annotate, &config).map_err(|e| e.to_string())?;
    let log: Value = serde_json::from_slice(
        &std::fs::read(config.paths.artifacts.join("annotate/run.json")).map_err(|e| e.to_string())?,
    )
    .map_err(|e| e.to_string())?;
    let calls = log["network_calls"].as_u64().unwrap_or(u64::MAX);
    ensure(calls == 0, || format!("warm annotate made {calls} endpoint calls"))?;
    ensure(log["cache_hits"] == log["requested"], || {
        format!("cache hits {} of {}", log["cache_hits"], log["requested"])
    })?;
    Ok(format!("{} stages skipped, identical report, {} cache hits, 0 calls", second.stages.len(), log["cache_hits"]))
}

fn ac7_distribution(root: &Path) -> Check {
    let config = mock_config(root, 42);
    let path = config.paths.artifacts.join("propagate/distribution.json");
    let report: DistributionReport =
        serde_json::from_slice(&std::fs::read(&path).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for class in UserClass::ALL {
        let dist = report.class(class);
        for (what, sum) in [
            ("publication", dist.rows.iter().map(|r| r.tweet_pct).sum::<f64>()),
            ("token", dist.rows.iter().map(|r| r.token_pct).sum::<f64>()),
        ] {
            ensure((sum - 100.0).abs() <= 0.1, || format!("{class:?} {what} percentages sum to {sum}"))?;
        }
        let expected = config.synth.expected_tier_proportions(class);
        for label in RelevanceLabel::ALL {
            let got = dist.row(label).tweet_pct;
            let want = 100.0 * expected[label.index()];
            worst = worst.max((got - want).abs());
            ensure((got - want).abs() <= 2.0, || format!("{class:?} {label:?}: {got:.2}% vs generator {want:.2}%"))?;
        }
    }
    Ok(format!("sums within 0.1, worst gap to generator {worst:.2} points"))
}

struct Flaky;

impl CompletionBackend for Flaky {
    fn model_id(&self) -> &str {
        "flaky"
    }

    fn complete(&self, prompt: &str) -> Result<String, BackendError> {
        Ok(if prompt.contains("garbled") { "no idea, sorry".into() } else { "Relevance: 2".into() })
    }
}

fn ac8_parsing() -> Check {
    for label in RelevanceLabel::ALL {
        let code = label.code();
        for fixture in [format!("{code}"), format!("Answer: {code}"), format!("{code}\n")] {
            let got = parse_response(&fixture).map_err(|e| e.to_string())?;
            ensure(got == label, || format!("{fixture:?} parsed as {got:?}"))?;
        }
    }
    let template = PromptTemplate::new(DEFAULT_TEMPLATE, Some(1000)).map_err(|e| e.to_string())?;
    let mock = KeywordAnnotator::new(&template, &["vazio".into()], &["choro".into()]);
    for (text, label) in [
        ("me sinto vazio", RelevanceLabel::High),
        ("muito choro", RelevanceLabel::Medium),
        ("bom dia", RelevanceLabel::Low),
    ] {
        let raw = mock.complete(&template.render(text).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        ensure(parse_response(&raw).ok() == Some(label), || format!("mock answer {raw:?} for {text:?}"))?;
    }

    let posts: Vec<Publication> = (0..6)
        .map(|i| Publication {
            user_id: "u".into(),
            post_id: format!("p{i}"),
            timestamp: i,
            text: if i % 3 == 1 { format!("garbled post {i}") } else { format!("post {i}") },
        })
        .collect();
    let mut cache = AnnotationCache::in_memory();
    let report = annotate_batch(&posts, &template, &Flaky, &mut cache, &BatchOptions::default());
    ensure(report.items.len() == posts.len(), || "batch dropped items".into())?;
    let failed: Vec<&str> = report.failures().map(|f| f.post_id.as_str()).collect();
    ensure(failed == ["p1", "p4"], || format!("failures {failed:?}"))?;
    ensure(report.failures().all(|f| matches!(f.result, Err(RelevanceError::Unparseable(_)))), || {
        "malformed answers not reported as Unparseable".into()
    })?;
    ensure(report.records().count() == 4 && cache.len() == 4, || "well-formed answers not all recorded".into())?;
    Ok("codes 1-3 parse; 2 malformed of 6 reported as Unparseable, batch completed".into())
}

fn main() -> ExitCode {
    let root = tempfile::tempdir().expect("temp dir");
    let root = root.path();
    type Runner<'a> = Box<dyn Fn() -> Check + 'a>;
    let checks: Vec<(&str, Runner)> = vec![
        ("AC1 feature-selection oracle", Box::new(ac1_anova_oracle)),
        ("AC2 gradient check", Box::new(ac2_gradient_check)),
        ("AC3 width law", Box::new(ac3_width_law)),
        ("AC4 planted-signal recovery", Box::new(|| ac4_planted_signal(root))),
        ("AC5 imbalance handling", Box::new(|| ac5_class_weighting(root))),
        ("AC6 idempotence", Box::new(|| ac6_idempotence(root))),
        ("AC7 distribution report", Box::new(|| ac7_distribution(root))),
        ("AC8 response parsing", Box::new(ac8_parsing)),
    ];
    let mut failed = 0;
    for (name, check) in checks {
        let outcome = catch_unwind(AssertUnwindSafe(&*check)).unwrap_or_else(|p| {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        match outcome {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL {name}: {why}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
