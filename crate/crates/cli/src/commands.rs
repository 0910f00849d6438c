use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{anyhow, bail, ensure, Context, Result};
use clap::{Args, Subcommand};
use perspectra::corpus::{CorpusFormat, CorpusStore, Dimension};
use perspectra::eval::{
    agreement, evaluate_system, human_scores, read_outputs_tsv, reference_content, write_outputs_tsv, EncoderCosine,
    EvalSuite, RatingRecord, Scale,
};
use perspectra::io::{read_jsonl, write_jsonl};
use perspectra::pairs::{dedupe_unique, filter_view, mine_pairs, read_decisions_tsv, write_tsv, PerspectivePair, ReviewJournal, ReviewView};
use perspectra::pipeline::{pretrained_toy, rewrite_with_model, run_demo, train_regressor, DemoConfig};
use perspectra::prompt::{
    sample_examples, CompletionBackend, CurationSession, ExamplePair, Journal, PromptMode, PromptSpec, Rewriter,
    SessionStore, StubBackend, DEFAULT_CANDIDATES, DEFAULT_FEW_SHOT,
};
use perspectra::rng::substream;
use perspectra::scorer::{is_held_out, HashedNgramEncoder, RegressorConfig};
use perspectra::synthetic::{SyntheticConfig, SyntheticCorpus};
use perspectra::transfer::{load_model, train_unsupervised, CheckpointDir, MonoCorpora, Variant};
use perspectra::{Regressor, ToyModel};
use survey::{build_survey, sources_from_pairs, BuildOptions, ServiceConfig, SurveyDefinition};

use crate::config::{BackendKind, RunConfig};
use crate::manifest::{Manifest, Touched};
use crate::Command;

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// JSONL corpus file.
    pub path: PathBuf,
    /// Store directory to write.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct MineArgs {
    #[arg(long, default_value = "blame_murderer")]
    pub dimension: String,
    /// Pairs file (JSONL).
    #[arg(long)]
    pub out: PathBuf,
    /// Also write a review sheet (TSV with sentence texts).
    #[arg(long)]
    pub tsv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReviewArgs {
    /// Mined pairs (JSONL).
    #[arg(long)]
    pub pairs: PathBuf,
    /// Decisions sheet to journal: the review TSV with a filled `status` column.
    #[arg(long)]
    pub decisions: Option<PathBuf>,
    #[arg(long)]
    pub reviewer: Option<String>,
    /// Append-only review journal; replayed over the mined pairs.
    #[arg(long)]
    pub journal: PathBuf,
    /// Which pairs to write: overlapping, not-rejected or all.
    #[arg(long, default_value = "overlapping")]
    pub view: ReviewView,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DedupeArgs {
    #[arg(long)]
    pub pairs: PathBuf,
    #[arg(long, default_value = "overlapping")]
    pub view: ReviewView,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainScorerArgs {
    #[arg(long)]
    pub out: PathBuf,
    /// Ridge penalty.
    #[arg(long)]
    pub lambda: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[arg(long)]
    pub scorer: PathBuf,
    /// Sentences, one per line. Reads stdin when absent.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainBtArgs {
    /// Conditioning variant; defaults to the first configured one.
    #[arg(long)]
    pub variant: Option<Variant>,
    /// Checkpoint root; defaults to `{output_dir}/checkpoints`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Run id; defaults to the variant name.
    #[arg(long)]
    pub run_id: Option<String>,
    /// Back-translation rounds (overrides the config).
    #[arg(long)]
    pub rounds: Option<usize>,
    #[arg(long, default_value_t = 30)]
    pub pretrain_epochs: usize,
}

#[derive(Debug, Args)]
pub struct SourceSelection {
    /// Pairs file (JSONL) whose low sentences are the sources.
    #[arg(long)]
    pub pairs: PathBuf,
    /// Use every pair instead of the held-out evaluation split.
    #[arg(long)]
    pub all_pairs: bool,
}

#[derive(Debug, Args)]
pub struct RewriteArgs {
    #[command(flatten)]
    pub sources: SourceSelection,
    /// Low-to-high model file, or a checkpoint directory holding `model.json`.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value = "base")]
    pub variant: Variant,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RewriteLlmArgs {
    #[command(flatten)]
    pub sources: SourceSelection,
    /// naive-zero, naive-few or iter.
    #[arg(long)]
    pub mode: PromptMode,
    /// Prompt spec file (required for iter).
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Save the prompt spec actually used.
    #[arg(long)]
    pub save_spec: Option<PathBuf>,
    /// Few-shot examples sampled for naive-few.
    #[arg(long, default_value_t = DEFAULT_FEW_SHOT)]
    pub few_shot: usize,
    /// Completion journal; defaults to `{output_dir}/journal.jsonl`.
    #[arg(long)]
    pub journal: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum CurateCommand {
    /// Generate a definition and candidates for a new session.
    Start(CurateStartArgs),
    /// Record the chosen candidate for one source.
    Select(CurateSelectArgs),
    /// Print a session's sources, candidates and selections.
    Show(CurateIdArgs),
    /// Write the few-shot prompt spec of a complete session.
    Emit(CurateEmitArgs),
}

#[derive(Debug, Args)]
pub struct CurateIdArgs {
    #[arg(long)]
    pub id: String,
    /// Session directory; defaults to `{output_dir}/curation`.
    #[arg(long)]
    pub sessions: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CurateStartArgs {
    #[command(flatten)]
    pub session: CurateIdArgs,
    /// Training pairs supplying gold examples and source sentences.
    #[arg(long)]
    pub pairs: PathBuf,
    #[arg(long)]
    pub annotator: Option<String>,
    /// Gold pairs shown when asking for a definition.
    #[arg(long, default_value_t = DEFAULT_FEW_SHOT)]
    pub gold: usize,
    /// Source sentences to curate.
    #[arg(long, default_value_t = 5)]
    pub sources: usize,
    #[arg(long, default_value_t = DEFAULT_CANDIDATES)]
    pub candidates: usize,
    /// Replace the adapted zero-shot prompt with this file's contents.
    #[arg(long)]
    pub prompt_file: Option<PathBuf>,
    #[arg(long)]
    pub journal: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CurateSelectArgs {
    #[command(flatten)]
    pub session: CurateIdArgs,
    #[arg(long)]
    pub item: usize,
    #[arg(long)]
    pub candidate: usize,
}

#[derive(Debug, Args)]
pub struct CurateEmitArgs {
    #[command(flatten)]
    pub session: CurateIdArgs,
    #[arg(long)]
    pub out: PathBuf,
    /// Defaults to the session id.
    #[arg(long)]
    pub version_tag: Option<String>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// System name; repeat together with --outputs.
    #[arg(long, required = true)]
    pub system: Vec<String>,
    /// Outputs TSV (`source_id`, `output`); one per --system.
    #[arg(long, required = true)]
    pub outputs: Vec<PathBuf>,
    #[command(flatten)]
    pub sources: SourceSelection,
    /// Trained regressor; trained on the fly from the store when absent.
    #[arg(long)]
    pub scorer: Option<PathBuf>,
    /// Survey ratings (journal directory or JSONL); needs --survey.
    #[arg(long, requires = "survey")]
    pub ratings: Option<PathBuf>,
    #[arg(long)]
    pub survey: Option<PathBuf>,
    /// Directory for report.json and the TSV tables.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AgreementArgs {
    /// Survey journal directory or a ratings JSONL file.
    #[arg(long)]
    pub ratings: PathBuf,
    #[arg(long, value_enum, default_value = "both")]
    pub scale: ScaleArg,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum ScaleArg {
    Blame,
    Similarity,
    Both,
}

#[derive(Debug, Args)]
pub struct BuildSurveyArgs {
    #[command(flatten)]
    pub sources: SourceSelection,
    /// `system=outputs.tsv`, repeatable.
    #[arg(long = "outputs", required = true, value_parser = parse_system_outputs)]
    pub outputs: Vec<(String, PathBuf)>,
    #[arg(long, default_value_t = survey::DEFAULT_BLOCKS)]
    pub blocks: usize,
    #[arg(long, default_value_t = survey::DEFAULT_CANDIDATES)]
    pub candidates: usize,
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_system_outputs(s: &str) -> Result<(String, PathBuf), String> {
    let (name, path) = s.split_once('=').ok_or("expected system=path")?;
    if name.is_empty() || path.is_empty() {
        return Err("expected system=path".into());
    }
    Ok((name.to_string(), PathBuf::from(path)))
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Survey definition (JSON, from build-survey).
    #[arg(long)]
    pub survey: PathBuf,
    /// Service config (TOML): host, port, seed, data_dir, sessions_dir, static_dir.
    #[arg(long)]
    pub service_config: Option<PathBuf>,
    #[arg(long)]
    pub host: Option<String>,
    #[arg(long)]
    pub port: Option<u16>,
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
    #[arg(long)]
    pub sessions: Option<PathBuf>,
    #[arg(long)]
    pub static_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DemoArgs {
    #[arg(long, default_value_t = 40)]
    pub cases: usize,
    #[arg(long, default_value_t = 30)]
    pub pretrain_epochs: usize,
    /// Leave out the stub-backed prompt systems.
    #[arg(long)]
    pub no_prompt_systems: bool,
    /// Where to write tables and outputs; defaults to `{output_dir}/demo`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write the generated corpus as JSONL (input for `ingest`).
    #[arg(long)]
    pub export_corpus: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    pub manifest: PathBuf,
    /// Run even if recorded inputs have changed.
    #[arg(long)]
    pub force: bool,
}

pub fn dispatch(command: Command, cfg: &RunConfig, t: &mut Touched) -> Result<()> {
    match command {
        Command::Ingest(a) => ingest(a, t),
        Command::MinePairs(a) => mine(a, cfg, t),
        Command::Review(a) => review(a, t),
        Command::Dedupe(a) => dedupe(a, t),
        Command::TrainScorer(a) => train_scorer(a, cfg, t),
        Command::Score(a) => score(a, t),
        Command::TrainBt(a) => train_bt(a, cfg, t),
        Command::Rewrite(a) => rewrite(a, cfg, t),
        Command::RewriteLlm(a) => rewrite_llm(a, cfg, t),
        Command::Curate(c) => curate(c, cfg, t),
        Command::Evaluate(a) => evaluate(a, cfg, t),
        Command::Agreement(a) => agreement_cmd(a, t),
        Command::BuildSurvey(a) => build_survey_cmd(a, cfg, t),
        Command::Serve(a) => serve(a, cfg),
        Command::Demo(a) => demo(a, cfg, t),
        Command::Replay(a) => replay(a),
    }
}

fn load_store(cfg: &RunConfig, t: &mut Touched) -> Result<CorpusStore> {
    let dir = cfg.store()?;
    ensure!(dir.is_dir(), "store `{}` does not exist", dir.display());
    t.input(dir);
    CorpusStore::load(dir).with_context(|| format!("loading store {}", dir.display()))
}

fn read_pairs(path: &Path, t: &mut Touched) -> Result<Vec<PerspectivePair>> {
    t.input(path);
    read_jsonl(path).with_context(|| format!("reading pairs {}", path.display()))
}

fn write_pairs(path: &Path, pairs: &[PerspectivePair], t: &mut Touched) -> Result<()> {
    write_jsonl(path, pairs).with_context(|| format!("writing {}", path.display()))?;
    t.output(path);
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

/// The pairs a command evaluates: held-out low sentences unless `--all-pairs`.
fn selected_pairs(sel: &SourceSelection, t: &mut Touched) -> Result<Vec<PerspectivePair>> {
    let pairs = read_pairs(&sel.pairs, t)?;
    let modulus = RegressorConfig::default().holdout_modulus;
    let chosen: Vec<PerspectivePair> = pairs
        .into_iter()
        .filter(|p| sel.all_pairs || is_held_out(&p.low_sentence, modulus))
        .collect();
    ensure!(!chosen.is_empty(), "no pairs selected from {}", sel.pairs.display());
    Ok(chosen)
}

fn source_ids(pairs: &[PerspectivePair]) -> Vec<String> {
    let mut ids: Vec<String> = pairs.iter().map(|p| p.low_sentence.clone()).collect();
    ids.sort();
    ids.dedup();
    ids
}

fn write_outputs(path: &Path, outputs: &BTreeMap<String, String>, t: &mut Touched) -> Result<()> {
    let mut w = create(path)?;
    write_outputs_tsv(outputs, &mut w)?;
    w.flush()?;
    t.output(path);
    Ok(())
}

fn ingest(a: IngestArgs, t: &mut Touched) -> Result<()> {
    t.input(&a.path);
    let store = CorpusStore::ingest(&a.path, CorpusFormat::Jsonl)?;
    store.save(&a.out)?;
    t.output(&a.out);
    let c = store.counts();
    println!("{c:?}");
    Ok(())
}

fn mine(a: MineArgs, cfg: &RunConfig, t: &mut Touched) -> Result<()> {
    let store = load_store(cfg, t)?;
    let dim: Dimension = a.dimension.parse().expect("infallible");
    let pairs = mine_pairs(&store, &dim)?;
    write_pairs(&a.out, &pairs, t)?;
    if let Some(tsv) = &a.tsv {
        let mut w = create(tsv)?;
        write_tsv(&pairs, &store, &mut w)?;
        w.flush()?;
        t.output(tsv);
    }
    println!("mined {} pairs on {dim}", pairs.len());
    Ok(())
}

fn review(a: ReviewArgs, t: &mut Touched) -> Result<()> {
    let pairs = read_pairs(&a.pairs, t)?;
    let journal = ReviewJournal::new(&a.journal);
    if let Some(path) = &a.decisions {
        t.input(path);
        let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
        let decisions = read_decisions_tsv(file, a.reviewer.as_deref())?;
        journal.record(&pairs, &decisions)?;
        println!("journaled {} decisions", decisions.len());
    }
    let reviewed = journal.replay(&pairs)?;
    if a.journal.exists() {
        t.output(&a.journal);
    }
    let view = filter_view(&reviewed, a.view);
    write_pairs(&a.out, &view, t)?;
    println!("{} of {} pairs in view {:?}", view.len(), pairs.len(), a.view);
    Ok(())
}

fn dedupe(a: DedupeArgs, t: &mut Touched) -> Result<()> {
    let pairs = read_pairs(&a.pairs, t)?;
    let unique = dedupe_unique(&filter_view(&pairs, a.view));
    write_pairs(&a.out, &unique, t)?;
    println!("{} unique pairs", unique.len());
    Ok(())
}

fn train_scorer(a: TrainScorerArgs, cfg: &RunConfig, t: &mut Touched) -> Result<()> {
    let store = load_store(cfg, t)?;
    let mut rc = RegressorConfig::default();
    if let Some(l) = a.lambda {
        rc.lambda = l;
    }
    let reg = train_regressor(&store, rc)?;
    reg.save(&a.out)?;
    t.output(&a.out);
    for (dim, r2) in reg.dimensions.iter().zip(&reg.held_out_r2) {
        match r2 {
            Some(v) => println!("{dim}\tR2 {v:.3}"),
            None => println!("{dim}\tR2 n/a"),
        }
    }
    Ok(())
}

fn score(a: ScoreArgs, t: &mut Touched) -> Result<()> {
    t.input(&a.scorer);
    let reg = Regressor::load(&a.scorer)?;
    let lines: Vec<String> = match &a.input {
        Some(p) => {
            t.input(p);
            BufReader::new(File::open(p).with_context(|| format!("opening {}", p.display()))?)
                .lines()
                .collect::<std::io::Result<_>>()?
        }
        None => std::io::stdin().lock().lines().collect::<std::io::Result<_>>()?,
    };
    let lines: Vec<String> = lines.into_iter().filter(|l| !l.trim().is_empty()).collect();
    let scores = reg.score_sentences(&lines)?;
    let mut out: Box<dyn Write> = match &a.out {
        Some(p) => Box::new(create(p)?),
        None => Box::new(std::io::stdout().lock()),
    };
    let header: Vec<&str> = reg.dimensions.iter().map(|d| d.as_str()).collect();
    writeln!(out, "{}\ttext", header.join("\t"))?;
    for (line, s) in lines.iter().zip(scores) {
        let cells: Vec<String> = s.iter().map(|v| format!("{v:.4}")).collect();
        writeln!(out, "{}\t{line}", cells.join("\t"))?;
    }
    out.flush()?;
    if let Some(p) = &a.out {
        t.output(p);
    }
    Ok(())
}

fn train_bt(a: TrainBtArgs, cfg: &RunConfig, t: &mut Touched) -> Result<()> {
    let store = load_store(cfg, t)?;
    let variant = match a.variant {
        Some(v) => v,
        None => *cfg.variants()?.first().ok_or_else(|| anyhow!("no variant configured"))?,
    };
    let mut train = cfg.train();
    if let Some(r) = a.rounds {
        train.bt_iterations = r;
    }
    let mono = MonoCorpora::from_store(&store, &Dimension::BlameMurderer, RegressorConfig::default().holdout_modulus)?;
    let init = pretrained_toy(&mono, cfg.seed, a.pretrain_epochs, &train)?;
    let root = a.out.unwrap_or_else(|| cfg.output_dir.join("checkpoints"));
    let dir = CheckpointDir::new(&root, a.run_id.as_deref().unwrap_or(variant.name()));
    let trained = train_unsupervised(&mono, &init, &train, variant, Some(&dir))?;
    for s in &trained.stats {
        println!("{}", serde_json::to_string(s)?);
    }
    t.output(dir.run_dir());
    println!(
        "final low-to-high model: {}",
        dir.model_path(train.bt_iterations, perspectra::transfer::Direction::LowToHigh).display()
    );
    Ok(())
}

fn rewrite(a: RewriteArgs, cfg: &RunConfig, t: &mut Touched) -> Result<()> {
    let store = load_store(cfg, t)?;
    let pairs = selected_pairs(&a.sources, t)?;
    t.input(&a.model);
    let model: ToyModel = load_model(&a.model)?;
    let outputs = rewrite_with_model(&model, &store, &source_ids(&pairs), a.variant, cfg.train.max_token_length)?;
    write_outputs(&a.out, &outputs, t)?;
    println!("rewrote {} sources", outputs.len());
    Ok(())
}

fn make_backend(cfg: &RunConfig) -> Result<Box<dyn CompletionBackend>> {
    match cfg.backend {
        BackendKind::Stub => Ok(Box::new(StubBackend::default())),
        BackendKind::Http => live_backend(cfg),
    }
}

#[cfg(feature = "live")]
fn live_backend(cfg: &RunConfig) -> Result<Box<dyn CompletionBackend>> {
    let live = cfg.live.as_ref().ok_or_else(|| anyhow!("backend `http` needs a [live] table in the config"))?;
    let b = perspectra::prompt::HttpBackend::from_env(&live.endpoint, &live.model, Duration::from_secs(live.timeout_secs))?;
    Ok(Box::new(b))
}

#[cfg(not(feature = "live"))]
fn live_backend(cfg: &RunConfig) -> Result<Box<dyn CompletionBackend>> {
    let _ = (cfg, Duration::ZERO);
    bail!("this build has no HTTP backend; rebuild with `--features live`")
}

/// Pool of (low, high) texts from pairs outside the held-out split.
fn training_examples(pairs: &[PerspectivePair], store: &CorpusStore) -> Vec<ExamplePair> {
    let modulus = RegressorConfig::default().holdout_modulus;
    let train: Vec<PerspectivePair> = pairs.iter().filter(|p| !is_held_out(&p.low_sentence, modulus)).cloned().collect();
    dedupe_unique(&train)
        .iter()
        .filter_map(|p| {
            Some(ExamplePair {
                low: store.sentence(&p.low_sentence)?.text.clone(),
                high: store.sentence(&p.high_sentence)?.text.clone(),
            })
        })
        .collect()
}

fn rewrite_llm(a: RewriteLlmArgs, cfg: &RunConfig, t: &mut Touched) -> Result<()> {
    let store = load_store(cfg, t)?;
    let spec = match (&a.spec, a.mode) {
        (Some(path), mode) => {
            t.input(path);
            let spec = PromptSpec::load(path)?;
            ensure!(spec.mode == mode, "spec {} is {:?}, not {:?}", path.display(), spec.mode, mode);
            spec
        }
        (None, PromptMode::NaiveZero) => PromptSpec::naive_zero(),
        (None, PromptMode::NaiveFew) => {
            let all = read_pairs(&a.sources.pairs, t)?;
            let pool = training_examples(&all, &store);
            PromptSpec::naive_few(sample_examples(&pool, a.few_shot, &mut substream(cfg.seed, "few-shot")))
        }
        (None, PromptMode::Iter) => bail!("--mode iter needs --spec (see `perspectra curate emit`)"),
    };
    if let Some(p) = &a.save_spec {
        spec.save(p)?;
        t.output(p);
    }
    let pairs = selected_pairs(&a.sources, t)?;
    let ids = source_ids(&pairs);
    let texts: Vec<String> = ids
        .iter()
        .map(|id| store.sentence(id).map(|s| s.text.clone()).ok_or_else(|| anyhow!("unknown sentence `{id}`")))
        .collect::<Result<_>>()?;
    let backend = make_backend(cfg)?;
    let journal_path = a.journal.unwrap_or_else(|| cfg.output_dir.join("journal.jsonl"));
    let journal = Journal::new(&journal_path);
    let rewriter = Rewriter::new(&backend).with_journal(&journal);
    let mut outputs = BTreeMap::new();
    let mut failures = 0;
    for (id, result) in ids.iter().zip(rewriter.rewrite_all(&spec, &texts)) {
        match result {
            Ok(out) => {
                outputs.insert(id.clone(), out);
            }
            Err(e) => {
                failures += 1;
                log::warn!("{id}: {e}");
            }
        }
    }
    write_outputs(&a.out, &outputs, t)?;
    t.output(&journal_path);
    println!("rewrote {} sources ({failures} failed) with {}", outputs.len(), spec.version_tag);
    Ok(())
}

fn session_store(args: &CurateIdArgs, cfg: &RunConfig) -> SessionStore {
    SessionStore::new(args.sessions.clone().unwrap_or_else(|| cfg.output_dir.join("curation")))
}

fn curate(c: CurateCommand, cfg: &RunConfig, t: &mut Touched) -> Result<()> {
    match c {
        CurateCommand::Start(a) => {
            let store = load_store(cfg, t)?;
            let pairs = read_pairs(&a.pairs, t)?;
            let pool = training_examples(&pairs, &store);
            let gold = sample_examples(&pool, a.gold, &mut substream(cfg.seed, &format!("curation/{}/gold", a.session.id)));
            let sources: Vec<String> =
                sample_examples(&pool, a.sources, &mut substream(cfg.seed, &format!("curation/{}/sources", a.session.id)))
                    .into_iter()
                    .map(|p| p.low)
                    .collect();
            let backend = make_backend(cfg)?;
            let journal_path = a.journal.unwrap_or_else(|| cfg.output_dir.join("journal.jsonl"));
            let journal = Journal::new(&journal_path);
            let rewriter = Rewriter::new(&backend).with_journal(&journal);
            let mut session = CurationSession::start(&a.session.id, gold, sources, &rewriter)?;
            session.annotator = a.annotator;
            if let Some(p) = &a.prompt_file {
                t.input(p);
                session.adapted_prompt = std::fs::read_to_string(p)?.trim_end().to_string();
            }
            session.curate(&rewriter, a.candidates)?;
            let sessions = session_store(&a.session, cfg);
            sessions.save(&session)?;
            t.output(sessions.dir());
            t.output(&journal_path);
            println!("{}", session.definition);
            print_session(&session);
            Ok(())
        }
        CurateCommand::Select(a) => {
            let sessions = session_store(&a.session, cfg);
            let s = sessions.record_selection(&a.session.id, a.item, a.candidate)?;
            t.output(sessions.dir());
            println!("{} selection(s) missing", s.missing());
            Ok(())
        }
        CurateCommand::Show(a) => {
            print_session(&session_store(&a, cfg).load(&a.id)?);
            Ok(())
        }
        CurateCommand::Emit(a) => {
            let sessions = session_store(&a.session, cfg);
            t.input(sessions.dir());
            let s = sessions.load(&a.session.id)?;
            let spec = s.emit(a.version_tag.unwrap_or_else(|| a.session.id.clone()))?;
            spec.save(&a.out)?;
            t.output(&a.out);
            println!("wrote {} with {} examples", a.out.display(), spec.examples.len());
            Ok(())
        }
    }
}

fn print_session(s: &CurationSession) {
    println!("session {} ({} missing)", s.session_id, s.missing());
    for (i, item) in s.items.iter().enumerate() {
        println!("[{i}] {}", item.source);
        for (k, c) in item.candidates.iter().enumerate() {
            let mark = if item.selected == Some(k) { '*' } else { ' ' };
            println!("  {mark}{k}: {c}");
        }
    }
}

fn load_ratings(path: &Path, t: &mut Touched) -> Result<Vec<RatingRecord>> {
    let file = if path.is_dir() { path.join(survey::store::RATINGS_FILE) } else { path.to_path_buf() };
    t.input(&file);
    ensure!(file.is_file(), "no ratings at {}", file.display());
    read_jsonl(&file).with_context(|| format!("reading {}", file.display()))
}

fn evaluate(a: EvaluateArgs, cfg: &RunConfig, t: &mut Touched) -> Result<()> {
    ensure!(
        a.system.len() == a.outputs.len(),
        "give one --outputs per --system ({} systems, {} outputs)",
        a.system.len(),
        a.outputs.len()
    );
    let store = load_store(cfg, t)?;
    let pairs = selected_pairs(&a.sources, t)?;
    let regressor = match &a.scorer {
        Some(p) => {
            t.input(p);
            Regressor::load(p)?
        }
        None => train_regressor(&store, RegressorConfig::default())?,
    };
    let human = match (&a.ratings, &a.survey) {
        (Some(r), Some(s)) => {
            let records = load_ratings(r, t)?;
            t.input(s);
            let def = SurveyDefinition::load(s)?;
            Some(human_scores(&records, &def.candidate_systems()))
        }
        _ => None,
    };
    let scorer = EncoderCosine::<HashedNgramEncoder>::default();
    let mut reports = Vec::new();
    for (system, path) in a.system.iter().zip(&a.outputs) {
        t.input(path);
        let file = File::open(path).with_context(|| format!("opening outputs {}", path.display()))?;
        let outputs = read_outputs_tsv(file).with_context(|| path.display().to_string())?;
        let mut report = evaluate_system(system, &outputs, &pairs, &store, &scorer, &regressor)?;
        if let Some(h) = human.as_ref().and_then(|h| h.get(system)) {
            report = report.with_human(h)?;
        }
        reports.push(report);
    }
    let suite = EvalSuite {
        reports,
        reference: reference_content(&pairs, &store, &scorer)?,
        r_squared: regressor.dimensions.iter().cloned().zip(regressor.held_out_r2.iter().copied()).collect(),
    };
    let text = suite.render_text();
    print!("{text}");
    if let Some(dir) = &a.out {
        write_suite(dir, &suite, &text, t)?;
    }
    Ok(())
}

fn write_suite(dir: &Path, suite: &EvalSuite, text: &str, t: &mut Touched) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let files = [
        ("tables.txt", text.to_string()),
        ("report.json", serde_json::to_string_pretty(suite)? + "\n"),
        ("perspective.tsv", suite.perspective_table().to_tsv()),
        ("content.tsv", suite.content_table().to_tsv()),
        ("human.tsv", suite.human_table().to_tsv()),
    ];
    for (name, body) in files {
        let path = dir.join(name);
        perspectra::io::write_atomic(&path, body.as_bytes())?;
        t.output(&path);
    }
    Ok(())
}

fn agreement_cmd(a: AgreementArgs, t: &mut Touched) -> Result<()> {
    let records = load_ratings(&a.ratings, t)?;
    let scales = match a.scale {
        ScaleArg::Blame => vec![Scale::Blame],
        ScaleArg::Similarity => vec![Scale::Similarity],
        ScaleArg::Both => vec![Scale::Blame, Scale::Similarity],
    };
    println!("scale\trater_a\trater_b\tshared\trho\tp_value\tnote");
    let fmt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:.6}"));
    for scale in scales {
        for c in agreement(&records, scale) {
            println!(
                "{}\t{}\t{}\t{}\t{}\t{}\t{}",
                scale.as_str(),
                c.rater_a,
                c.rater_b,
                c.shared,
                fmt(c.rho),
                fmt(c.p_value),
                c.note.unwrap_or_default()
            );
        }
    }
    Ok(())
}

fn build_survey_cmd(a: BuildSurveyArgs, cfg: &RunConfig, t: &mut Touched) -> Result<()> {
    let store = load_store(cfg, t)?;
    let pairs = selected_pairs(&a.sources, t)?;
    let sources = sources_from_pairs(&dedupe_unique(&pairs), &store);
    let mut outputs = BTreeMap::new();
    for (system, path) in &a.outputs {
        t.input(path);
        let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
        ensure!(
            outputs.insert(system.clone(), read_outputs_tsv(file)?).is_none(),
            "system `{system}` given twice"
        );
    }
    let report = build_survey(
        &outputs,
        &sources,
        BuildOptions {
            n_blocks: a.blocks,
            n_candidates: a.candidates,
            seed: cfg.seed,
        },
    )?;
    report.definition.save(&a.out)?;
    t.output(&a.out);
    println!(
        "{} blocks of {} candidates ({} sources skipped)",
        report.definition.blocks.len(),
        a.candidates,
        report.skipped.len()
    );
    Ok(())
}

fn serve(a: ServeArgs, cfg: &RunConfig) -> Result<()> {
    let mut service = match &a.service_config {
        Some(p) => {
            let mut s = ServiceConfig::load(p)?;
            s.survey = a.survey.clone();
            s
        }
        None => {
            let mut s = ServiceConfig::new(a.survey.clone());
            s.data_dir = cfg.output_dir.join("survey-data");
            s
        }
    };
    if let Some(h) = a.host {
        service.host = h;
    }
    if let Some(p) = a.port {
        service.port = p;
    }
    if let Some(d) = a.data_dir {
        service.data_dir = d;
    }
    if a.sessions.is_some() {
        service.sessions_dir = a.sessions;
    }
    if a.static_dir.is_some() {
        service.static_dir = a.static_dir;
    }
    eprintln!("serving {} on http://{}:{}", service.survey.display(), service.host, service.port);
    survey::serve_blocking(service)?;
    Ok(())
}

fn demo(a: DemoArgs, cfg: &RunConfig, t: &mut Touched) -> Result<()> {
    if let Some(path) = &a.export_corpus {
        let corpus = SyntheticCorpus::generate(&SyntheticConfig {
            seed: cfg.seed,
            cases: a.cases,
            ..SyntheticConfig::default()
        });
        corpus.store.write_jsonl(path)?;
        t.output(path);
    }
    let config = DemoConfig {
        seed: cfg.seed,
        cases: a.cases,
        pretrain_epochs: a.pretrain_epochs,
        train: cfg.train(),
        variants: cfg.variants()?,
        prompt_systems: !a.no_prompt_systems,
    };
    let outcome = run_demo(&config)?;
    let text = outcome.render_text();
    print!("{text}");
    let dir = a.out.unwrap_or_else(|| cfg.output_dir.join("demo"));
    write_suite(&dir, &outcome.suite, &text, t)?;
    for (system, outputs) in &outcome.outputs {
        write_outputs(&dir.join("outputs").join(format!("{system}.tsv")), outputs, t)?;
    }
    Ok(())
}

fn replay(a: ReplayArgs) -> Result<()> {
    let m = Manifest::load(&a.manifest)?;
    let changed = m.changed_inputs();
    if !changed.is_empty() && !a.force {
        bail!("inputs changed since the recorded run: {} (use --force)", changed.join(", "));
    }
    if m.working_dir.is_dir() {
        std::env::set_current_dir(&m.working_dir)?;
    }
    crate::run(m.argv)
}
