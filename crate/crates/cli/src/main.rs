use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

mod commands;
mod config;
mod manifest;

use config::{BackendKind, RunConfig};

/// Responsibility perspective transfer: mine pairs, train rewriters, evaluate, run surveys.
#[derive(Debug, Parser)]
#[command(name = "perspectra", version, propagate_version = true)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// Run config (TOML). Defaults to ./perspectra.toml when present.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Corpus store directory.
    #[arg(long, global = true, value_name = "DIR")]
    store: Option<PathBuf>,
    /// Run seed; every random consumer draws from a named substream of it.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for manifests and default outputs.
    #[arg(long, global = true, value_name = "DIR")]
    output_dir: Option<PathBuf>,
    /// Completion backend for prompt-based rewriting.
    #[arg(long, global = true, value_enum)]
    backend: Option<BackendKind>,
    /// Comma-separated training variants (base, src-meta, meta-src).
    #[arg(long, global = true, value_delimiter = ',')]
    variants: Option<Vec<String>>,
    /// Skip writing the run manifest.
    #[arg(long, global = true)]
    no_manifest: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate a JSONL corpus and write it as a store.
    Ingest(commands::IngestArgs),
    /// Extract low/high pairs per case.
    MinePairs(commands::MineArgs),
    /// Apply overlap decisions (journaled) and write the chosen view.
    Review(commands::ReviewArgs),
    /// Keep a subset of pairs in which no sentence appears twice.
    Dedupe(commands::DedupeArgs),
    /// Fit the perception regressor on gold annotations.
    TrainScorer(commands::TrainScorerArgs),
    /// Score sentences with a trained regressor.
    Score(commands::ScoreArgs),
    /// Iterative back-translation with the toy seq2seq model.
    TrainBt(commands::TrainBtArgs),
    /// Rewrite sources with a trained low-to-high checkpoint.
    Rewrite(commands::RewriteArgs),
    /// Rewrite sources with a prompt and a completion backend.
    RewriteLlm(commands::RewriteLlmArgs),
    /// Curation sessions for building few-shot prompts.
    #[command(subcommand)]
    Curate(commands::CurateCommand),
    /// Automatic (and optionally human) evaluation of system outputs.
    Evaluate(commands::EvaluateArgs),
    /// Pairwise Spearman agreement between raters.
    Agreement(commands::AgreementArgs),
    /// Assemble a blinded survey definition from system outputs.
    BuildSurvey(commands::BuildSurveyArgs),
    /// Run the survey and curation HTTP service.
    Serve(commands::ServeArgs),
    /// Full pipeline on the synthetic corpus.
    Demo(commands::DemoArgs),
    /// Re-run the command recorded in a manifest.
    Replay(commands::ReplayArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Ingest(_) => "ingest",
            Command::MinePairs(_) => "mine-pairs",
            Command::Review(_) => "review",
            Command::Dedupe(_) => "dedupe",
            Command::TrainScorer(_) => "train-scorer",
            Command::Score(_) => "score",
            Command::TrainBt(_) => "train-bt",
            Command::Rewrite(_) => "rewrite",
            Command::RewriteLlm(_) => "rewrite-llm",
            Command::Curate(_) => "curate",
            Command::Evaluate(_) => "evaluate",
            Command::Agreement(_) => "agreement",
            Command::BuildSurvey(_) => "build-survey",
            Command::Serve(_) => "serve",
            Command::Demo(_) => "demo",
            Command::Replay(_) => "replay",
        }
    }
}

fn resolve_config(global: &GlobalArgs) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(global.config.as_deref())?;
    if let Some(store) = &global.store {
        cfg.store = Some(store.clone());
    }
    if let Some(seed) = global.seed {
        cfg.seed = seed;
    }
    if let Some(dir) = &global.output_dir {
        cfg.output_dir = dir.clone();
    }
    if let Some(backend) = global.backend {
        cfg.backend = backend;
    }
    if let Some(variants) = &global.variants {
        cfg.variants = variants.clone();
    }
    cfg.variants()?;
    Ok(cfg)
}

/// Parse, run, and record a manifest. Shared by `main` and `replay`.
pub fn run(argv: Vec<String>) -> Result<()> {
    let cli = Cli::try_parse_from(std::iter::once("perspectra".to_string()).chain(argv.iter().cloned()))
        .unwrap_or_else(|e| e.exit());
    let cfg = resolve_config(&cli.global)?;
    let started = manifest::now_ms();
    let mut touched = manifest::Touched::default();
    let name = cli.command.name();
    let record = !cli.global.no_manifest && !matches!(cli.command, Command::Replay(_) | Command::Serve(_));
    commands::dispatch(cli.command, &cfg, &mut touched)?;
    if record {
        let m = manifest::Manifest::build(name, argv, &cfg, &touched, started)?;
        let path = m.write(&cfg.output_dir)?;
        log::info!("manifest written to {}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(std::env::args().skip(1).collect()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
