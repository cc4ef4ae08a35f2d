use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use promptbow_cli::{run_all, run_stage, sweep, PipelineConfig, Stage, StageStatus};
use promptbow_core::relevance::AnnotationCache;

/// Screen user timelines with relevance-stratified bag-of-words features.
///
/// The endpoint API key is read from the environment variable named by
/// `llm.api_key_env` (default PROMPTBOW_API_KEY).
#[derive(Parser)]
#[command(name = "promptbow", version)]
struct Cli {
    /// Pipeline configuration file (TOML). Built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed, overriding the configuration file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Grade publications with the offline keyword annotator.
    #[arg(long, global = true)]
    mock_llm: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic corpus.
    Synth,
    /// Load the corpus and assign the train/test split.
    Ingest,
    /// Users, words and publications per class.
    Stats,
    /// Draw the annotation sample from train publications.
    Sample,
    /// Grade the sample for relevance.
    Annotate,
    /// Train the relevance labeler and label the whole corpus.
    Propagate,
    /// Fit the feature space and write user vectors.
    Featurize,
    /// Fit the logistic regression.
    Train,
    /// Score the test users.
    Evaluate,
    /// Run every stage, skipping those already up to date.
    Run,
    /// Rewrite the annotation cache without duplicate or torn lines.
    CompactCache,
    /// Choose a decision threshold on a validation slice of train users.
    SweepThreshold {
        /// Candidate thresholds.
        #[arg(long, value_delimiter = ',', default_value = "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9")]
        thresholds: Vec<f64>,
        /// Share of train users held out for validation.
        #[arg(long, default_value_t = 0.2)]
        validation_fraction: f64,
    },
    /// Print the effective configuration as TOML.
    ShowConfig,
}

fn config(cli: &Cli) -> anyhow::Result<PipelineConfig> {
    let mut config = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config = config.with_seed(seed);
    }
    if cli.mock_llm {
        config.llm.mock = true;
    }
    Ok(config)
}

fn print_stage_output(config: &PipelineConfig, stage: Stage) -> anyhow::Result<()> {
    let name = match stage {
        Stage::Stats => "stats.txt",
        Stage::Propagate => "distribution.txt",
        Stage::Evaluate => "eval.txt",
        _ => return Ok(()),
    };
    let path = config.paths.artifacts.join(stage.name()).join(name);
    print!("{}", std::fs::read_to_string(&path).with_context(|| path.display().to_string())?);
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let config = config(&cli)?;
    let stage = match &cli.command {
        Command::Synth => Stage::Synth,
        Command::Ingest => Stage::Ingest,
        Command::Stats => Stage::Stats,
        Command::Sample => Stage::Sample,
        Command::Annotate => Stage::Annotate,
        Command::Propagate => Stage::Propagate,
        Command::Featurize => Stage::Featurize,
        Command::Train => Stage::Train,
        Command::Evaluate => Stage::Evaluate,
        Command::Run => {
            let summary = run_all(&config)?;
            for (stage, status) in &summary.stages {
                let word = if *status == StageStatus::Ran { "ran" } else { "up to date" };
                eprintln!("{stage:>10}: {word}");
            }
            print!("{}", summary.report);
            return Ok(());
        }
        Command::CompactCache => {
            let (before, after) = AnnotationCache::compact(&config.paths.cache)?;
            eprintln!("{}: {before} lines -> {after} records", config.paths.cache.display());
            return Ok(());
        }
        Command::SweepThreshold { thresholds, validation_fraction } => {
            let report = sweep(&config, thresholds, *validation_fraction)?;
            println!("{:>9}  {:>9}  {:>6}  {:>4}", "Threshold", "Precision", "Recall", "F1");
            for r in &report.reports {
                println!(
                    "{:>9.2}  {:>9.2}  {:>6.2}  {:>4.2}",
                    r.threshold.unwrap_or(f64::NAN),
                    r.precision,
                    r.recall,
                    r.f1
                );
            }
            println!("best threshold on {} validation users: {}", report.validation_users, report.best_threshold);
            return Ok(());
        }
        Command::ShowConfig => {
            print!("{}", config.to_toml());
            return Ok(());
        }
    };
    let manifest = run_stage(stage, &config)?;
    eprintln!("{stage}: wrote {} file(s), content {}", manifest.files.len(), &manifest.content_digest[..12]);
    print_stage_output(&config, stage)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
