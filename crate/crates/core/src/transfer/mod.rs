//! Unsupervised perspective transfer by iterative back-translation.
//!
//! Two direction models (low->high and high->low) share a tokenizer. In
//! each round every model translates the monolingual corpus of its source
//! style; the outputs, paired with the sentences they came from, become
//! training pairs for the opposite direction (synthetic source -> real
//! target). Only decoder parameters are trained.

mod adam;
mod checkpoint;
mod conditioning;
mod schedule;
mod toy;

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{CorpusError, CorpusStore, Dimension};
use crate::rng::substream;
use crate::scorer::is_held_out;

pub use adam::Adam;
pub use checkpoint::{load_model, CheckpointDir, CheckpointError};
pub use conditioning::{
    render_conditioned_input, CaseMismatch, ConditionedInput, ConditioningOrder, DEFAULT_SEPARATOR,
};
pub use schedule::LrSchedule;
pub use toy::{ToyConfig, ToySeq2Seq, Vocab};

#[derive(Debug, Error)]
pub enum Seq2SeqError {
    #[error("input has no tokens")]
    EmptyInput,
    #[error("{0}")]
    Backend(String),
}

#[derive(Debug, Error)]
pub enum TransferError {
    #[error("generation failed for sentence `{sentence_id}`: {source}")]
    Generation {
        sentence_id: String,
        #[source]
        source: Seq2SeqError,
    },
    #[error("training step failed: {0}")]
    Training(#[source] Seq2SeqError),
    #[error("direction models use different tokenizers ({0} vs {1})")]
    TokenizerMismatch(String, String),
    #[error("{0} corpus is empty")]
    EmptyCorpus(&'static str),
    #[error("frozen parameters of the {0} model changed during training")]
    FrozenParametersChanged(Direction),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
}

/// Output of one generation call.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Generated {
    pub text: String,
    /// Input exceeded the token limit and was cut.
    pub truncated: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepOutcome {
    /// Mean token cross-entropy; `None` if nothing in the batch was trainable.
    pub loss: Option<f64>,
    pub tokens: usize,
    pub truncated: usize,
    pub skipped: usize,
}

/// Pluggable encoder-decoder. Implementations own their tokenizer.
pub trait Seq2Seq: Clone + Send + Sync {
    /// Identifies the tokenizer; both direction models must agree.
    fn tokenizer_id(&self) -> String;

    fn token_count(&self, input: &str) -> usize;

    /// Greedy decoding when `sampling` is `None`, otherwise temperature sampling.
    fn generate(
        &self,
        input: &str,
        max_tokens: usize,
        sampling: Option<(f64, &mut ChaCha8Rng)>,
    ) -> Result<Generated, Seq2SeqError>;

    /// One optimizer step on trainable (decoder) parameters.
    fn train_step(
        &mut self,
        batch: &[(String, String)],
        max_tokens: usize,
        lr: f64,
    ) -> Result<StepOutcome, Seq2SeqError>;

    /// Optimizer steps taken so far.
    fn steps(&self) -> u64;

    fn frozen_fingerprint(&self) -> String;

    fn trainable_fingerprint(&self) -> String;

    /// Tell the model how conditioned inputs are laid out. Models that treat
    /// the input as opaque text can ignore this.
    fn configure_conditioning(&mut self, _order: ConditioningOrder, _separator: &str) {}
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    LowToHigh,
    HighToLow,
}

impl Direction {
    pub fn short(self) -> &'static str {
        match self {
            Direction::LowToHigh => "lh",
            Direction::HighToLow => "hl",
        }
    }
}

impl std::fmt::Display for Direction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.short())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DirectionModel<M> {
    pub direction: Direction,
    pub seq2seq: M,
}

impl<M: Seq2Seq> DirectionModel<M> {
    pub fn new(direction: Direction, seq2seq: M) -> Self {
        Self { direction, seq2seq }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    #[default]
    Base,
    SrcMeta,
    MetaSrc,
}

impl Variant {
    pub fn order(self) -> ConditioningOrder {
        match self {
            Variant::Base => ConditioningOrder::Plain,
            Variant::SrcMeta => ConditioningOrder::SourceMeta,
            Variant::MetaSrc => ConditioningOrder::MetaSource,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::Base => "base",
            Variant::SrcMeta => "src-meta",
            Variant::MetaSrc => "meta-src",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.replace('_', "-").as_str() {
            "base" => Ok(Variant::Base),
            "src-meta" | "source-meta" => Ok(Variant::SrcMeta),
            "meta-src" | "meta-source" => Ok(Variant::MetaSrc),
            other => Err(format!("unknown variant `{other}` (base, src-meta, meta-src)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    #[default]
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub max_learning_rate: f64,
    pub warmup_steps: u64,
    /// Exponent of the polynomial decay after warmup.
    pub lr_power: f64,
    pub optimizer: Optimizer,
    pub max_token_length: usize,
    pub bt_iterations: usize,
    pub epochs_per_round: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Per-token probability of replacing a synthetic source token with a random corpus word.
    pub noise_replace_prob: f64,
    /// `None` decodes greedily.
    pub sampling_temperature: Option<f64>,
    /// Apply metadata conditioning to back-translated inputs as well.
    pub condition_synthetic: bool,
    /// Overrides the schedule horizon derived from corpus size and rounds.
    pub total_steps: Option<u64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            max_learning_rate: 1e-4,
            warmup_steps: 100,
            lr_power: 1.0,
            optimizer: Optimizer::Adam,
            max_token_length: 150,
            bt_iterations: 3,
            epochs_per_round: 1,
            batch_size: 8,
            seed: 0,
            noise_replace_prob: 0.1,
            sampling_temperature: None,
            condition_synthetic: true,
            total_steps: None,
        }
    }
}

impl TrainConfig {
    /// Settings for the randomly initialized desk-scale model: it starts far
    /// from a useful solution, so it needs larger steps and more epochs than
    /// fine-tuning a pretrained checkpoint.
    pub fn toy() -> Self {
        Self {
            max_learning_rate: 5e-3,
            epochs_per_round: 12,
            noise_replace_prob: 0.15,
            ..Self::default()
        }
    }

    /// Schedule for a model trained on `pairs_per_round` pairs each round.
    pub fn schedule(&self, pairs_per_round: usize) -> LrSchedule {
        let batches = pairs_per_round.div_ceil(self.batch_size.max(1)) as u64;
        let derived = self.bt_iterations as u64 * self.epochs_per_round as u64 * batches;
        LrSchedule {
            max_lr: self.max_learning_rate,
            warmup_steps: self.warmup_steps,
            total_steps: self.total_steps.unwrap_or(derived).max(self.warmup_steps + 1),
            power: self.lr_power,
            end_lr: 0.0,
        }
    }
}

/// A sentence of one style with the metadata of its case.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonoSentence {
    pub sentence_id: String,
    pub text: String,
    pub meta: Vec<String>,
}

impl MonoSentence {
    pub fn conditioned(&self, text: &str, order: ConditioningOrder) -> String {
        ConditionedInput {
            text: text.to_owned(),
            meta_values: self.meta.clone(),
            order,
            separator: DEFAULT_SEPARATOR.to_owned(),
        }
        .render()
    }
}

/// Style-labelled, unpaired corpora.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MonoCorpora {
    pub low: Vec<MonoSentence>,
    pub high: Vec<MonoSentence>,
    pub held_out_low: Vec<MonoSentence>,
    pub held_out_high: Vec<MonoSentence>,
}

impl MonoCorpora {
    /// Label every scored sentence by the sign of its z-score on `dimension`
    /// (zero counts as high); one in `holdout_modulus` sentences is held out.
    pub fn from_store(
        store: &CorpusStore,
        dimension: &Dimension,
        holdout_modulus: u64,
    ) -> Result<Self, CorpusError> {
        let z = store.normalized_values(dimension)?;
        let mut out = MonoCorpora::default();
        for (sid, value) in z {
            let sentence = store.sentence(&sid).expect("scores resolve");
            let case = store.case_of(sentence);
            let mono = MonoSentence {
                sentence_id: sid.clone(),
                text: sentence.text.clone(),
                meta: case.meta_values().iter().map(|v| v.to_string()).collect(),
            };
            let held = is_held_out(&sid, holdout_modulus);
            match (value < 0.0, held) {
                (true, false) => out.low.push(mono),
                (true, true) => out.held_out_low.push(mono),
                (false, false) => out.high.push(mono),
                (false, true) => out.held_out_high.push(mono),
            }
        }
        Ok(out)
    }

    pub fn vocabulary_texts(&self) -> impl Iterator<Item = &str> {
        [&self.low, &self.high, &self.held_out_low, &self.held_out_high]
            .into_iter()
            .flatten()
            .flat_map(|s| std::iter::once(s.text.as_str()).chain(s.meta.iter().map(String::as_str)))
    }

    /// Same sentences with metadata blanked, for the unconditioned baseline.
    pub fn without_meta(&self) -> Self {
        let strip = |v: &[MonoSentence]| {
            v.iter()
                .map(|s| MonoSentence {
                    meta: vec![String::new(); s.meta.len()],
                    ..s.clone()
                })
                .collect()
        };
        Self {
            low: strip(&self.low),
            high: strip(&self.high),
            held_out_low: strip(&self.held_out_low),
            held_out_high: strip(&self.held_out_high),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundStats {
    pub round: usize,
    /// Pairs generated by the high->low model, used to train low->high.
    pub synthetic_pairs_lh: usize,
    pub synthetic_pairs_hl: usize,
    pub mean_loss_lh: Option<f64>,
    pub mean_loss_hl: Option<f64>,
    pub steps_lh: u64,
    pub steps_hl: u64,
    pub truncated: usize,
    pub skipped: usize,
    pub frozen_fingerprint_lh: String,
    pub frozen_fingerprint_hl: String,
    pub decoder_fingerprint_lh: String,
    pub decoder_fingerprint_hl: String,
}

#[derive(Debug, Clone)]
pub struct RoundOutcome<M> {
    pub lh: DirectionModel<M>,
    pub hl: DirectionModel<M>,
    /// `None` when the configuration asks for zero rounds.
    pub stats: Option<RoundStats>,
}

struct Synthesized {
    pairs: Vec<(String, String)>,
    truncated: usize,
}

fn noise_vocabulary(low: &[MonoSentence], high: &[MonoSentence]) -> Vec<String> {
    let words: BTreeSet<&str> = low
        .iter()
        .chain(high)
        .flat_map(|s| s.text.split_whitespace())
        .collect();
    words.into_iter().map(str::to_owned).collect()
}

fn add_noise(text: &str, vocabulary: &[String], prob: f64, rng: &mut ChaCha8Rng) -> String {
    if prob <= 0.0 || vocabulary.is_empty() {
        return text.to_owned();
    }
    text.split_whitespace()
        .map(|t| {
            if rng.random_bool(prob.min(1.0)) {
                vocabulary[rng.random_range(0..vocabulary.len())].as_str()
            } else {
                t
            }
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// Translate `targets` with `generator`; pair each output (as source) with the real sentence.
fn synthesize<M: Seq2Seq>(
    generator: &M,
    targets: &[MonoSentence],
    order: ConditioningOrder,
    config: &TrainConfig,
    vocabulary: &[String],
    stream: &str,
) -> Result<Synthesized, TransferError> {
    let mut noise_rng = substream(config.seed, &format!("{stream}/noise"));
    let mut sample_rng = substream(config.seed, &format!("{stream}/sample"));
    let mut truncated = 0;
    let mut pairs = Vec::with_capacity(targets.len());
    for sentence in targets {
        let input = sentence.conditioned(&sentence.text, order);
        let sampling = config
            .sampling_temperature
            .map(|t| (t, &mut sample_rng));
        let generated = generator
            .generate(&input, config.max_token_length, sampling)
            .map_err(|source| TransferError::Generation {
                sentence_id: sentence.sentence_id.clone(),
                source,
            })?;
        truncated += usize::from(generated.truncated);
        let noisy = add_noise(&generated.text, vocabulary, config.noise_replace_prob, &mut noise_rng);
        let source = if config.condition_synthetic {
            sentence.conditioned(&noisy, order)
        } else {
            noisy
        };
        pairs.push((source, sentence.text.clone()));
    }
    Ok(Synthesized { pairs, truncated })
}

struct EpochSummary {
    mean_loss: Option<f64>,
    truncated: usize,
    skipped: usize,
}

fn train_on_pairs<M: Seq2Seq>(
    model: &mut M,
    mut pairs: Vec<(String, String)>,
    schedule: LrSchedule,
    config: &TrainConfig,
    stream: &str,
) -> Result<EpochSummary, TransferError> {
    let mut rng = substream(config.seed, &format!("{stream}/shuffle"));
    let (mut loss_sum, mut loss_n, mut truncated, mut skipped) = (0.0, 0usize, 0, 0);
    for _ in 0..config.epochs_per_round {
        pairs.shuffle(&mut rng);
        for batch in pairs.chunks(config.batch_size.max(1)) {
            // first update happens at step 1, so warmup never multiplies by a zero lr
            let lr = schedule.lr::<f64>(model.steps() + 1);
            let out = model
                .train_step(batch, config.max_token_length, lr)
                .map_err(TransferError::Training)?;
            if let Some(l) = out.loss {
                loss_sum += l;
                loss_n += 1;
            }
            truncated += out.truncated;
            skipped += out.skipped;
        }
    }
    Ok(EpochSummary {
        mean_loss: (loss_n > 0).then(|| loss_sum / loss_n as f64),
        truncated,
        skipped,
    })
}

/// One back-translation round (round index `round`, 1-based).
pub fn backtranslation_round<M: Seq2Seq>(
    lh: DirectionModel<M>,
    hl: DirectionModel<M>,
    mono_low: &[MonoSentence],
    mono_high: &[MonoSentence],
    order: ConditioningOrder,
    config: &TrainConfig,
    round: usize,
) -> Result<RoundOutcome<M>, TransferError> {
    if config.bt_iterations == 0 {
        return Ok(RoundOutcome { lh, hl, stats: None });
    }
    if mono_low.is_empty() {
        return Err(TransferError::EmptyCorpus("low"));
    }
    if mono_high.is_empty() {
        return Err(TransferError::EmptyCorpus("high"));
    }
    let (tok_lh, tok_hl) = (lh.seq2seq.tokenizer_id(), hl.seq2seq.tokenizer_id());
    if tok_lh != tok_hl {
        return Err(TransferError::TokenizerMismatch(tok_lh, tok_hl));
    }
    let vocabulary = noise_vocabulary(mono_low, mono_high);
    let frozen_lh = lh.seq2seq.frozen_fingerprint();
    let frozen_hl = hl.seq2seq.frozen_fingerprint();

    // both directions generate with the models as they were at the start of the round
    let for_lh = synthesize(&hl.seq2seq, mono_high, order, config, &vocabulary, &format!("round{round}/lh"))?;
    let for_hl = synthesize(&lh.seq2seq, mono_low, order, config, &vocabulary, &format!("round{round}/hl"))?;
    let schedule_lh = config.schedule(for_lh.pairs.len());
    let schedule_hl = config.schedule(for_hl.pairs.len());
    let (n_lh, n_hl) = (for_lh.pairs.len(), for_hl.pairs.len());

    let (mut lh, mut hl) = (lh, hl);
    let (res_lh, res_hl) = rayon::join(
        || train_on_pairs(&mut lh.seq2seq, for_lh.pairs, schedule_lh, config, &format!("round{round}/lh")),
        || train_on_pairs(&mut hl.seq2seq, for_hl.pairs, schedule_hl, config, &format!("round{round}/hl")),
    );
    let (sum_lh, sum_hl) = (res_lh?, res_hl?);

    let stats = RoundStats {
        round,
        synthetic_pairs_lh: n_lh,
        synthetic_pairs_hl: n_hl,
        mean_loss_lh: sum_lh.mean_loss,
        mean_loss_hl: sum_hl.mean_loss,
        steps_lh: lh.seq2seq.steps(),
        steps_hl: hl.seq2seq.steps(),
        truncated: for_lh.truncated + for_hl.truncated + sum_lh.truncated + sum_hl.truncated,
        skipped: sum_lh.skipped + sum_hl.skipped,
        frozen_fingerprint_lh: lh.seq2seq.frozen_fingerprint(),
        frozen_fingerprint_hl: hl.seq2seq.frozen_fingerprint(),
        decoder_fingerprint_lh: lh.seq2seq.trainable_fingerprint(),
        decoder_fingerprint_hl: hl.seq2seq.trainable_fingerprint(),
    };
    if stats.frozen_fingerprint_lh != frozen_lh {
        return Err(TransferError::FrozenParametersChanged(Direction::LowToHigh));
    }
    if stats.frozen_fingerprint_hl != frozen_hl {
        return Err(TransferError::FrozenParametersChanged(Direction::HighToLow));
    }
    log::info!(
        "round {round}: pairs lh={} hl={}, loss lh={:?} hl={:?}",
        stats.synthetic_pairs_lh,
        stats.synthetic_pairs_hl,
        stats.mean_loss_lh,
        stats.mean_loss_hl
    );
    Ok(RoundOutcome { lh, hl, stats: Some(stats) })
}

#[derive(Debug, Clone)]
pub struct TrainedModels<M> {
    pub lh: DirectionModel<M>,
    pub hl: DirectionModel<M>,
    pub stats: Vec<RoundStats>,
}

/// Run `config.bt_iterations` rounds starting both directions from `init`.
///
/// With a checkpoint directory, each round's models and stats are written
/// before the next round starts.
pub fn train_unsupervised<M>(
    corpora: &MonoCorpora,
    init: &M,
    config: &TrainConfig,
    variant: Variant,
    checkpoints: Option<&CheckpointDir>,
) -> Result<TrainedModels<M>, TransferError>
where
    M: Seq2Seq + Serialize,
{
    let order = variant.order();
    let mut base = init.clone();
    base.configure_conditioning(order, DEFAULT_SEPARATOR);
    let mut lh = DirectionModel::new(Direction::LowToHigh, base.clone());
    let mut hl = DirectionModel::new(Direction::HighToLow, base);
    let mut stats = Vec::with_capacity(config.bt_iterations);
    for round in 1..=config.bt_iterations {
        let outcome = backtranslation_round(lh, hl, &corpora.low, &corpora.high, order, config, round)?;
        lh = outcome.lh;
        hl = outcome.hl;
        let round_stats = outcome.stats.expect("bt_iterations > 0");
        if let Some(dir) = checkpoints {
            dir.save_round(round, &lh.seq2seq, &hl.seq2seq, &round_stats)?;
        }
        stats.push(round_stats);
    }
    Ok(TrainedModels { lh, hl, stats })
}

impl<T: crate::Scalar> ToySeq2Seq<T> {
    /// Denoising autoencoder warm start on unlabeled text: reconstruct each
    /// sentence from a copy with randomly replaced words. Plays the role of
    /// a pretrained checkpoint; only decoder parameters move.
    pub fn pretrain_denoising(
        &mut self,
        texts: &[String],
        epochs: usize,
        noise_prob: f64,
        lr: f64,
        seed: u64,
    ) -> Result<Option<f64>, Seq2SeqError> {
        let vocabulary: Vec<String> = self.vocab().words().map(str::to_owned).collect();
        let mut rng = substream(seed, "pretrain");
        let mut order: Vec<usize> = (0..texts.len()).collect();
        let mut last = None;
        for _ in 0..epochs {
            order.shuffle(&mut rng);
            let (mut sum, mut n) = (0.0, 0);
            for chunk in order.chunks(8) {
                let batch: Vec<(String, String)> = chunk
                    .iter()
                    .map(|&i| (add_noise(&texts[i], &vocabulary, noise_prob, &mut rng), texts[i].clone()))
                    .collect();
                if let Some(l) = self.train_step(&batch, usize::MAX, lr)?.loss {
                    sum += l;
                    n += 1;
                }
            }
            last = (n > 0).then(|| sum / n as f64);
        }
        self.reset_optimizer();
        Ok(last)
    }
}
