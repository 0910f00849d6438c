//! End-to-end run over the synthetic corpus: mine, score, train, rewrite, evaluate.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::{CorpusError, CorpusStore, Dimension};
use crate::eval::{evaluate_system, reference_content, EncoderCosine, EvalError, EvalSuite};
use crate::pairs::{apply_review, dedupe_unique, filter_view, mine_pairs, OverlapStatus, PairError, PerspectivePair, ReviewDecision, ReviewView};
use crate::prompt::{
    sample_examples, CurationError, CurationSession, ExamplePair, PromptError, PromptSpec, Rewriter, StubBackend,
    DEFAULT_CANDIDATES, DEFAULT_FEW_SHOT,
};
use crate::rng::substream;
use crate::scorer::{gold_examples, is_held_out, HashedNgramEncoder, PerspectiveRegressor, RegressorConfig, ScorerError};
use crate::synthetic::{SyntheticConfig, SyntheticCorpus};
use crate::transfer::{
    render_conditioned_input, train_unsupervised, MonoCorpora, RoundStats, Seq2Seq, Seq2SeqError, ToyConfig,
    ToySeq2Seq, TrainConfig, TransferError, Variant, Vocab, DEFAULT_SEPARATOR,
};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Pairs(#[from] PairError),
    #[error(transparent)]
    Scorer(#[from] ScorerError),
    #[error(transparent)]
    Transfer(#[from] TransferError),
    #[error(transparent)]
    Seq2Seq(#[from] Seq2SeqError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Curation(#[from] CurationError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DemoConfig {
    pub seed: u64,
    pub cases: usize,
    pub pretrain_epochs: usize,
    pub train: TrainConfig,
    pub variants: Vec<Variant>,
    /// Add stub-backed prompt systems (naive zero/few-shot and one curated prompt).
    pub prompt_systems: bool,
}

impl Default for DemoConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            cases: 40,
            pretrain_epochs: 30,
            train: TrainConfig::toy(),
            variants: vec![Variant::Base, Variant::SrcMeta, Variant::MetaSrc],
            prompt_systems: true,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DemoOutcome {
    pub suite: EvalSuite,
    /// Mean predicted blame of the evaluated sources.
    pub source_blame: f64,
    /// Mean predicted blame of their gold targets.
    pub target_blame: f64,
    /// Mean predicted blame of each system's outputs.
    pub system_blame: BTreeMap<String, f64>,
    pub round_stats: BTreeMap<String, Vec<RoundStats>>,
    pub outputs: BTreeMap<String, BTreeMap<String, String>>,
    pub mined_pairs: usize,
    pub unique_pairs: usize,
    pub evaluation_pairs: usize,
}

impl DemoOutcome {
    /// Summary lines followed by the three report tables.
    pub fn render_text(&self) -> String {
        let mut out = format!(
            "# mined pairs: {}  unique: {}  evaluated: {}\n# mean blame  source: {:.3}  target: {:.3}\n",
            self.mined_pairs, self.unique_pairs, self.evaluation_pairs, self.source_blame, self.target_blame
        );
        for (system, blame) in &self.system_blame {
            out.push_str(&format!("# mean blame  {system}: {blame:.3}\n"));
        }
        out.push_str(&self.suite.render_text());
        out
    }
}

/// Fit the reference regressor on every gold-annotated named dimension.
pub fn train_regressor(store: &CorpusStore, config: RegressorConfig) -> Result<PerspectiveRegressor<f64>, ScorerError> {
    let dims = Dimension::NAMED.to_vec();
    PerspectiveRegressor::train(&gold_examples(store, &dims), &dims, HashedNgramEncoder::default(), config)
}

/// Toy model over the corpora's vocabulary, warmed up by denoising.
pub fn pretrained_toy(
    mono: &MonoCorpora,
    seed: u64,
    pretrain_epochs: usize,
    train: &TrainConfig,
) -> Result<ToySeq2Seq<f32>, Seq2SeqError> {
    let mut init: ToySeq2Seq<f32> =
        ToySeq2Seq::new(Vocab::build(mono.vocabulary_texts()), ToyConfig { seed, ..ToyConfig::default() });
    let texts: Vec<String> = mono.low.iter().chain(&mono.high).map(|s| s.text.clone()).collect();
    init.pretrain_denoising(&texts, pretrain_epochs, train.noise_replace_prob, train.max_learning_rate, seed)?;
    Ok(init)
}

/// Rewrite the given sentences with a low-to-high model, conditioning as `variant` does.
pub fn rewrite_with_model<M: Seq2Seq, S: AsRef<str>>(
    model: &M,
    store: &CorpusStore,
    sentence_ids: &[S],
    variant: Variant,
    max_tokens: usize,
) -> Result<BTreeMap<String, String>, PipelineError> {
    let mut out = BTreeMap::new();
    for sid in sentence_ids {
        let sid = sid.as_ref();
        let sentence = store.sentence(sid).ok_or_else(|| EvalError::UnknownSentence(sid.to_string()))?;
        let input = render_conditioned_input(sentence, store.case_of(sentence), variant.order(), DEFAULT_SEPARATOR)
            .expect("sentence belongs to its case");
        out.insert(sid.to_string(), model.generate(&input, max_tokens, None)?.text);
    }
    Ok(out)
}

/// Run the full pipeline on a generated corpus.
pub fn run_demo(config: &DemoConfig) -> Result<DemoOutcome, PipelineError> {
    let corpus = SyntheticCorpus::generate(&SyntheticConfig {
        seed: config.seed,
        cases: config.cases,
        ..SyntheticConfig::default()
    });
    run_on_store(&corpus.store, config)
}

pub fn run_on_store(store: &CorpusStore, config: &DemoConfig) -> Result<DemoOutcome, PipelineError> {
    let reg_config = RegressorConfig::default();
    let regressor = train_regressor(store, reg_config.clone())?;

    // generated cases describe one event each, so every mined pair counts as overlapping
    let mined = mine_pairs(store, &Dimension::BlameMurderer)?;
    let decisions: Vec<ReviewDecision> = mined
        .iter()
        .map(|p| ReviewDecision {
            low_sentence: p.low_sentence.clone(),
            high_sentence: p.high_sentence.clone(),
            status: OverlapStatus::Overlapping,
            reviewer: Some("synthetic".into()),
        })
        .collect();
    let reviewed = filter_view(&apply_review(&mined, &decisions)?, ReviewView::Overlapping);
    let unique = dedupe_unique(&reviewed);
    let (eval_pairs, train_pairs): (Vec<PerspectivePair>, Vec<PerspectivePair>) = reviewed
        .iter()
        .cloned()
        .partition(|p| is_held_out(&p.low_sentence, reg_config.holdout_modulus));

    let mono = MonoCorpora::from_store(store, &Dimension::BlameMurderer, reg_config.holdout_modulus)?;
    let init = pretrained_toy(&mono, config.seed, config.pretrain_epochs, &config.train)?;

    let sources: Vec<&str> = {
        let mut v: Vec<&str> = eval_pairs.iter().map(|p| p.low_sentence.as_str()).collect();
        v.dedup();
        v
    };
    let train = TrainConfig { seed: config.seed, ..config.train.clone() };
    let mut outputs: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
    let mut round_stats = BTreeMap::new();
    for &variant in &config.variants {
        let trained = train_unsupervised(&mono, &init, &train, variant, None)?;
        let system = rewrite_with_model(&trained.lh.seq2seq, store, &sources, variant, train.max_token_length)?;
        outputs.insert(variant.name().to_string(), system);
        round_stats.insert(variant.name().to_string(), trained.stats);
    }

    if config.prompt_systems {
        let stub = StubBackend::default();
        let rewriter = Rewriter::new(&stub);
        let text = |id: &str| store.sentence(id).expect("mined ids exist").text.clone();
        let pool: Vec<ExamplePair> = dedupe_unique(&train_pairs)
            .iter()
            .map(|p| ExamplePair { low: text(&p.low_sentence), high: text(&p.high_sentence) })
            .collect();
        let few = sample_examples(&pool, DEFAULT_FEW_SHOT, &mut substream(config.seed, "few-shot"));
        let gold = sample_examples(&pool, DEFAULT_FEW_SHOT, &mut substream(config.seed, "curation/gold"));
        let curation_sources: Vec<String> = sample_examples(&pool, 5, &mut substream(config.seed, "curation/sources"))
            .into_iter()
            .map(|p| p.low)
            .collect();
        let mut session = CurationSession::start("iter-1", gold, curation_sources, &rewriter)?;
        session.curate(&rewriter, DEFAULT_CANDIDATES)?;
        for i in 0..session.items.len() {
            session.select(i, 0)?;
        }
        let specs = [
            ("na-zero", PromptSpec::naive_zero()),
            ("na-few", PromptSpec::naive_few(few)),
            ("iter-1", session.emit("iter-1/v1")?),
        ];
        for (name, spec) in specs {
            let mut system = BTreeMap::new();
            for &sid in &sources {
                system.insert(sid.to_string(), rewriter.rewrite(&spec, &text(sid))?);
            }
            outputs.insert(name.to_string(), system);
        }
    }

    let scorer = EncoderCosine::<HashedNgramEncoder>::default();
    let mut reports = Vec::new();
    let order: Vec<String> = config
        .variants
        .iter()
        .map(|v| v.name().to_string())
        .chain(["na-zero", "na-few", "iter-1"].into_iter().filter(|_| config.prompt_systems).map(String::from))
        .collect();
    for name in &order {
        reports.push(evaluate_system(name, &outputs[name], &eval_pairs, store, &scorer, &regressor)?);
    }
    let blame_of = |r: &crate::eval::EvalReport| r.perspective_on(&Dimension::BlameMurderer).cloned();
    let first = reports.first().and_then(blame_of);
    let system_blame = reports
        .iter()
        .filter_map(|r| blame_of(r).and_then(|c| c.output).map(|b| (r.system_id.clone(), b)))
        .collect();
    let suite = EvalSuite {
        reports,
        reference: reference_content(&eval_pairs, store, &scorer)?,
        r_squared: regressor
            .dimensions
            .iter()
            .cloned()
            .zip(regressor.held_out_r2.iter().copied())
            .collect(),
    };
    Ok(DemoOutcome {
        suite,
        source_blame: first.as_ref().map_or(0.0, |c| c.source),
        target_blame: first.as_ref().map_or(0.0, |c| c.target),
        system_blame,
        round_stats,
        outputs,
        mined_pairs: mined.len(),
        unique_pairs: unique.len(),
        evaluation_pairs: eval_pairs.len(),
    })
}
