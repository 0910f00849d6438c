//! Desk-scale encoder-decoder used when no pretrained checkpoint is available.
//!
//! Whitespace tokens, one output token per input text token. The encoder is
//! a frozen random projection of each token and its neighbours plus a pooled
//! metadata vector; the decoder is a one-hidden-layer network over the
//! encoder state and the previously emitted token, with a skip connection
//! into the output logits.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::adam::Adam;
use super::conditioning::{ConditioningOrder, DEFAULT_SEPARATOR};
use super::{Generated, Seq2Seq, Seq2SeqError, StepOutcome};
use crate::Scalar;

const PAD: usize = 0;
const BOS: usize = 1;
const UNK: usize = 2;
const SPECIALS: [&str; 3] = ["<pad>", "<bos>", "<unk>"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl From<Vec<String>> for Vocab {
    fn from(tokens: Vec<String>) -> Self {
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Self { tokens, index }
    }
}

impl From<Vocab> for Vec<String> {
    fn from(v: Vocab) -> Self {
        v.tokens
    }
}

impl Vocab {
    /// Vocabulary over the whitespace tokens of `texts`, sorted for determinism.
    pub fn build<'a>(texts: impl IntoIterator<Item = &'a str>) -> Self {
        let mut words: Vec<String> = texts
            .into_iter()
            .flat_map(str::split_whitespace)
            .map(str::to_owned)
            .collect();
        words.sort();
        words.dedup();
        let tokens: Vec<String> = SPECIALS
            .iter()
            .map(|s| s.to_string())
            .chain(words.into_iter().filter(|w| !SPECIALS.contains(&w.as_str())))
            .collect();
        Vocab::from(tokens)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(UNK)
    }

    pub fn token(&self, id: usize) -> &str {
        &self.tokens[id]
    }

    /// Ordinary (non-special) tokens.
    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.tokens[SPECIALS.len()..].iter().map(String::as_str)
    }

    fn digest(&self) -> String {
        let mut h = Sha256::new();
        for t in &self.tokens {
            h.update(t.as_bytes());
            h.update([0]);
        }
        hex::encode(&h.finalize()[..8])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyConfig {
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub seed: u64,
    /// Decoder reads the frozen shared embeddings; when false it gets its own trainable copy.
    pub freeze_embeddings: bool,
    pub order: ConditioningOrder,
    pub separator: String,
}

impl Default for ToyConfig {
    fn default() -> Self {
        Self {
            embed_dim: 24,
            hidden_dim: 64,
            seed: 0,
            freeze_embeddings: true,
            order: ConditioningOrder::Plain,
            separator: DEFAULT_SEPARATOR.to_owned(),
        }
    }
}

/// Row-major dense matrix view into a flat buffer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
struct Block {
    offset: usize,
    rows: usize,
    cols: usize,
}

impl Block {
    fn len(&self) -> usize {
        self.rows * self.cols
    }

    fn row<'a, T>(&self, buf: &'a [T], r: usize) -> &'a [T] {
        let start = self.offset + r * self.cols;
        &buf[start..start + self.cols]
    }

    fn matvec<T: Scalar>(&self, buf: &[T], x: &[T], out: &mut [T]) {
        for (r, o) in out.iter_mut().enumerate().take(self.rows) {
            *o = *o + self.row(buf, r).iter().zip(x).map(|(&w, &v)| w * v).sum::<T>();
        }
    }

    /// out += W^T y
    fn matvec_t<T: Scalar>(&self, buf: &[T], y: &[T], out: &mut [T]) {
        for (r, &yr) in y.iter().enumerate().take(self.rows) {
            if yr == T::zero() {
                continue;
            }
            for (o, &w) in out.iter_mut().zip(self.row(buf, r)) {
                *o = *o + w * yr;
            }
        }
    }

    /// grad += y x^T
    fn outer_acc<T: Scalar>(&self, grad: &mut [T], y: &[T], x: &[T]) {
        for (r, &yr) in y.iter().enumerate().take(self.rows) {
            if yr == T::zero() {
                continue;
            }
            let start = self.offset + r * self.cols;
            for (g, &xv) in grad[start..start + self.cols].iter_mut().zip(x) {
                *g = *g + yr * xv;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct FrozenLayout {
    embed: Block,
    ctx_left: Block,
    ctx_center: Block,
    ctx_right: Block,
    meta: Block,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct DecoderLayout {
    prev_embed: Option<Block>,
    hidden: Block,
    hidden_bias: Block,
    out_hidden: Block,
    out_skip: Block,
    out_bias: Block,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToySeq2Seq<T> {
    config: ToyConfig,
    vocab: Vocab,
    frozen_layout: FrozenLayout,
    decoder_layout: DecoderLayout,
    /// Encoder and shared embeddings; never updated.
    frozen: Vec<T>,
    /// Decoder parameters.
    decoder: Vec<T>,
    adam: Adam<T>,
}

struct Encoded<T> {
    /// Per text position: [token emb ; context ; meta].
    states: Vec<Vec<T>>,
}

impl<T: Scalar> ToySeq2Seq<T> {
    /// Freshly initialized model over `vocab`.
    pub fn new(vocab: Vocab, config: ToyConfig) -> Self {
        let d = config.embed_dim;
        let h = config.hidden_dim;
        let v = vocab.len();
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

        let mut offset = 0;
        let mut block = |rows, cols| {
            let b = Block { offset, rows, cols };
            offset += rows * cols;
            b
        };
        let frozen_layout = FrozenLayout {
            embed: block(v, d),
            ctx_left: block(d, d),
            ctx_center: block(d, d),
            ctx_right: block(d, d),
            meta: block(d, d),
        };
        let frozen_len = offset;
        let std = 1.0 / (d as f64).sqrt();
        let normal = Normal::new(0.0, std).expect("valid sigma");
        let frozen: Vec<T> = (0..frozen_len).map(|_| T::lit(normal.sample(&mut rng))).collect();

        let z = 4 * d;
        let mut offset = 0;
        let mut block = |rows, cols| {
            let b = Block { offset, rows, cols };
            offset += rows * cols;
            b
        };
        let prev_embed = (!config.freeze_embeddings).then(|| block(v, d));
        let decoder_layout = DecoderLayout {
            prev_embed,
            hidden: block(h, z),
            hidden_bias: block(1, h),
            out_hidden: block(v, h),
            out_skip: block(v, z),
            out_bias: block(1, v),
        };
        let mut decoder = vec![T::zero(); offset];
        let hidden_normal = Normal::new(0.0, 1.0 / (z as f64).sqrt()).expect("valid sigma");
        let hb = decoder_layout.hidden;
        for x in &mut decoder[hb.offset..hb.offset + hb.len()] {
            *x = T::lit(hidden_normal.sample(&mut rng));
        }
        if let Some(pe) = decoder_layout.prev_embed {
            let src = frozen_layout.embed;
            decoder[pe.offset..pe.offset + pe.len()]
                .copy_from_slice(&frozen[src.offset..src.offset + src.len()]);
        }
        let adam = Adam::new(decoder.len());
        Self {
            config,
            vocab,
            frozen_layout,
            decoder_layout,
            frozen,
            decoder,
            adam,
        }
    }

    pub fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    pub fn config(&self) -> &ToyConfig {
        &self.config
    }

    /// Fresh optimizer state and step counter, keeping the weights.
    pub fn reset_optimizer(&mut self) {
        self.adam = Adam::new(self.decoder.len());
    }

    /// Same weights, different conditioning order (for variant runs from one pretrained model).
    pub fn with_order(mut self, order: ConditioningOrder) -> Self {
        self.config.order = order;
        self
    }

    /// Split an input into (text tokens, metadata tokens) according to the conditioning order.
    fn parse<'a>(&self, input: &'a str) -> (Vec<&'a str>, Vec<&'a str>) {
        let sep = self.config.separator.as_str();
        let (text, meta) = match self.config.order {
            ConditioningOrder::Plain => (input, ""),
            ConditioningOrder::SourceMeta => input.split_once(sep).unwrap_or((input, "")),
            ConditioningOrder::MetaSource => match input.rsplit_once(sep) {
                Some((meta, text)) => (text, meta),
                None => (input, ""),
            },
        };
        (text.split_whitespace().collect(), meta.split_whitespace().map(|t| t.trim_end_matches(',')).filter(|t| !t.is_empty()).collect())
    }

    /// Tokens kept from (text, metadata) under `max_tokens`, cutting from the
    /// end of the rendered input, plus whether anything was cut.
    fn budget(&self, text: usize, meta: usize, max_tokens: usize) -> (usize, usize, bool) {
        let cut = text + meta > max_tokens;
        match self.config.order {
            ConditioningOrder::MetaSource => {
                let m = meta.min(max_tokens);
                (text.min(max_tokens - m), m, cut)
            }
            _ => {
                let t = text.min(max_tokens);
                (t, meta.min(max_tokens - t), cut)
            }
        }
    }

    fn embed_row(&self, id: usize) -> &[T] {
        self.frozen_layout.embed.row(&self.frozen, id)
    }

    fn prev_row(&self, id: usize) -> &[T] {
        match self.decoder_layout.prev_embed {
            Some(b) => b.row(&self.decoder, id),
            None => self.embed_row(id),
        }
    }

    fn encode(&self, text: &[usize], meta: &[usize]) -> Encoded<T> {
        let d = self.config.embed_dim;
        let fl = &self.frozen_layout;
        let mut meta_vec = vec![T::zero(); d];
        if !meta.is_empty() {
            let mut pooled = vec![T::zero(); d];
            for &m in meta {
                for (p, &e) in pooled.iter_mut().zip(self.embed_row(m)) {
                    *p = *p + e;
                }
            }
            let n = T::from_usize(meta.len()).unwrap();
            pooled.iter_mut().for_each(|p| *p = *p / n);
            fl.meta.matvec(&self.frozen, &pooled, &mut meta_vec);
            meta_vec.iter_mut().for_each(|m| *m = m.tanh());
        }
        let states = (0..text.len())
            .map(|i| {
                let left = if i == 0 { PAD } else { text[i - 1] };
                let right = text.get(i + 1).copied().unwrap_or(PAD);
                let mut ctx = vec![T::zero(); d];
                fl.ctx_left.matvec(&self.frozen, self.embed_row(left), &mut ctx);
                fl.ctx_center.matvec(&self.frozen, self.embed_row(text[i]), &mut ctx);
                fl.ctx_right.matvec(&self.frozen, self.embed_row(right), &mut ctx);
                let mut state = Vec::with_capacity(3 * d);
                state.extend_from_slice(self.embed_row(text[i]));
                state.extend(ctx.into_iter().map(|c| c.tanh()));
                state.extend_from_slice(&meta_vec);
                state
            })
            .collect();
        Encoded { states }
    }

    /// Decoder input, hidden activations and logits for one position.
    fn step_forward(&self, state: &[T], prev: usize) -> (Vec<T>, Vec<T>, Vec<T>) {
        let dl = &self.decoder_layout;
        let mut z = Vec::with_capacity(state.len() + self.config.embed_dim);
        z.extend_from_slice(state);
        z.extend_from_slice(self.prev_row(prev));
        let mut hidden = dl.hidden_bias.row(&self.decoder, 0).to_vec();
        dl.hidden.matvec(&self.decoder, &z, &mut hidden);
        hidden.iter_mut().for_each(|h| *h = h.tanh());
        let mut logits = dl.out_bias.row(&self.decoder, 0).to_vec();
        dl.out_hidden.matvec(&self.decoder, &hidden, &mut logits);
        dl.out_skip.matvec(&self.decoder, &z, &mut logits);
        (z, hidden, logits)
    }

    fn ids(&self, tokens: &[&str]) -> Vec<usize> {
        tokens.iter().map(|t| self.vocab.id(t)).collect()
    }

    fn hash(buf: &[T]) -> String {
        let mut h = Sha256::new();
        for x in buf {
            h.update(x.fingerprint_bits().to_le_bytes());
        }
        hex::encode(h.finalize())
    }
}

fn softmax_in_place<T: Scalar>(logits: &mut [T]) {
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let mut sum = T::zero();
    for l in logits.iter_mut() {
        *l = (*l - max).exp();
        sum = sum + *l;
    }
    logits.iter_mut().for_each(|l| *l = *l / sum);
}

fn mask_specials<T: Scalar>(logits: &mut [T]) {
    for s in [PAD, BOS, UNK] {
        logits[s] = T::neg_infinity();
    }
}

impl<T: Scalar> Seq2Seq for ToySeq2Seq<T> {
    fn tokenizer_id(&self) -> String {
        format!("whitespace:{}", self.vocab.digest())
    }

    fn token_count(&self, input: &str) -> usize {
        let (text, meta) = self.parse(input);
        text.len() + meta.len()
    }

    fn generate(
        &self,
        input: &str,
        max_tokens: usize,
        sampling: Option<(f64, &mut ChaCha8Rng)>,
    ) -> Result<Generated, Seq2SeqError> {
        let (mut text, meta) = self.parse(input);
        if text.is_empty() {
            return Err(Seq2SeqError::EmptyInput);
        }
        let (text_keep, meta_keep, truncated) = self.budget(text.len(), meta.len(), max_tokens);
        text.truncate(text_keep);
        if text.is_empty() {
            return Err(Seq2SeqError::EmptyInput);
        }
        let enc = self.encode(&self.ids(&text), &self.ids(&meta[..meta_keep]));
        let mut prev = BOS;
        let mut out = Vec::with_capacity(text.len());
        let mut sampling = sampling;
        for state in &enc.states {
            let (_, _, mut logits) = self.step_forward(state, prev);
            mask_specials(&mut logits);
            let next = match sampling.as_mut() {
                Some((temperature, rng)) if *temperature > 0.0 => {
                    let t = T::lit(*temperature);
                    logits.iter_mut().for_each(|l| *l = *l / t);
                    softmax_in_place(&mut logits);
                    let mut u = T::lit(rng.random::<f64>());
                    let mut pick = logits.len() - 1;
                    for (i, &p) in logits.iter().enumerate() {
                        if u < p {
                            pick = i;
                            break;
                        }
                        u = u - p;
                    }
                    pick
                }
                _ => {
                    let mut best = 0;
                    for (i, &l) in logits.iter().enumerate() {
                        if l > logits[best] {
                            best = i;
                        }
                    }
                    best
                }
            };
            out.push(self.vocab.token(next));
            prev = next;
        }
        Ok(Generated {
            text: out.join(" "),
            truncated,
        })
    }

    fn train_step(
        &mut self,
        batch: &[(String, String)],
        max_tokens: usize,
        lr: f64,
    ) -> Result<StepOutcome, Seq2SeqError> {
        let mut grad = vec![T::zero(); self.decoder.len()];
        let mut loss = T::zero();
        let mut tokens = 0usize;
        let mut outcome = StepOutcome::default();
        let dl = self.decoder_layout.clone();
        let mut work = Vec::new();
        for (source, target) in batch {
            let (mut src, meta) = self.parse(source);
            let mut tgt: Vec<&str> = target.split_whitespace().collect();
            let (src_keep, meta_keep, cut) = self.budget(src.len(), meta.len(), max_tokens);
            if cut || tgt.len() > max_tokens {
                outcome.truncated += 1;
            }
            src.truncate(src_keep);
            tgt.truncate(max_tokens);
            if src.len() != tgt.len() || src.is_empty() {
                outcome.skipped += 1;
                continue;
            }
            work.push((self.ids(&src), self.ids(&meta[..meta_keep]), self.ids(&tgt)));
        }
        let total: usize = work.iter().map(|w| w.2.len()).sum();
        if total == 0 {
            return Ok(outcome);
        }
        let scale = T::one() / T::from_usize(total).unwrap();
        for (src, meta, tgt) in &work {
            let enc = self.encode(src, meta);
            let mut prev = BOS;
            for (state, &gold) in enc.states.iter().zip(tgt) {
                let (z, hidden, mut probs) = self.step_forward(state, prev);
                softmax_in_place(&mut probs);
                loss = loss - probs[gold].max(T::lit(1e-300)).ln();
                tokens += 1;
                probs[gold] = probs[gold] - T::one();
                probs.iter_mut().for_each(|p| *p = *p * scale);
                let dlogits = probs;
                dl.out_bias.outer_acc(&mut grad, &[T::one()], &dlogits);
                dl.out_hidden.outer_acc(&mut grad, &dlogits, &hidden);
                dl.out_skip.outer_acc(&mut grad, &dlogits, &z);
                let mut dh = vec![T::zero(); hidden.len()];
                dl.out_hidden.matvec_t(&self.decoder, &dlogits, &mut dh);
                for (g, &a) in dh.iter_mut().zip(&hidden) {
                    *g = *g * (T::one() - a * a);
                }
                dl.hidden_bias.outer_acc(&mut grad, &[T::one()], &dh);
                dl.hidden.outer_acc(&mut grad, &dh, &z);
                if let Some(pe) = dl.prev_embed {
                    let mut dz = vec![T::zero(); z.len()];
                    dl.hidden.matvec_t(&self.decoder, &dh, &mut dz);
                    dl.out_skip.matvec_t(&self.decoder, &dlogits, &mut dz);
                    let d = self.config.embed_dim;
                    let start = pe.offset + prev * d;
                    for (g, &v) in grad[start..start + d].iter_mut().zip(&dz[z.len() - d..]) {
                        *g = *g + v;
                    }
                }
                prev = gold;
            }
        }
        let decoder = &mut self.decoder;
        self.adam.step(decoder, &grad, T::lit(lr));
        outcome.loss = Some((loss / T::from_usize(tokens).unwrap()).as_f64());
        outcome.tokens = tokens;
        Ok(outcome)
    }

    fn steps(&self) -> u64 {
        self.adam.steps()
    }

    fn frozen_fingerprint(&self) -> String {
        Self::hash(&self.frozen)
    }

    fn trainable_fingerprint(&self) -> String {
        Self::hash(&self.decoder)
    }

    fn configure_conditioning(&mut self, order: ConditioningOrder, separator: &str) {
        self.config.order = order;
        self.config.separator = separator.to_owned();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> ToySeq2Seq<f64> {
        let vocab = Vocab::build(["a b c d", "x y z"]);
        ToySeq2Seq::new(vocab, ToyConfig::default())
    }

    /// Finite-difference check of the analytic decoder gradient.
    #[test]
    fn gradient_matches_finite_differences() {
        for freeze in [true, false] {
            let vocab = Vocab::build(["a b c d", "x y z"]);
            let mut m: ToySeq2Seq<f64> = ToySeq2Seq::new(
                vocab,
                ToyConfig { embed_dim: 4, hidden_dim: 5, freeze_embeddings: freeze, ..Default::default() },
            );
            // give the zero-initialized output layers some signal
            for (i, w) in m.decoder.iter_mut().enumerate() {
                *w += 0.05 * ((i * 37 % 11) as f64 - 5.0) / 5.0;
            }
            let batch = vec![("a b c".to_string(), "x y z".to_string()), ("d a".into(), "z x".into())];
            let loss_at = |m: &ToySeq2Seq<f64>| {
                let mut total = 0.0;
                let mut n = 0.0;
                for (s, t) in &batch {
                    let (src, meta) = m.parse(s);
                    let enc = m.encode(&m.ids(&src), &m.ids(&meta));
                    let tgt: Vec<&str> = t.split_whitespace().collect();
                    let mut prev = BOS;
                    for (state, g) in enc.states.iter().zip(m.ids(&tgt)) {
                        let (_, _, mut p) = m.step_forward(state, prev);
                        softmax_in_place(&mut p);
                        total -= p[g].ln();
                        n += 1.0;
                        prev = g;
                    }
                }
                total / n
            };
            let grads = analytic_gradient(&mut m.clone(), &batch);
            let eps = 1e-6;
            for idx in (0..m.decoder.len()).step_by(7) {
                let mut plus = m.clone();
                plus.decoder[idx] += eps;
                let mut minus = m.clone();
                minus.decoder[idx] -= eps;
                let fd = (loss_at(&plus) - loss_at(&minus)) / (2.0 * eps);
                assert!((fd - grads[idx]).abs() < 1e-6, "param {idx}: fd {fd} vs analytic {}", grads[idx]);
            }
        }
    }

    /// Gradient used by `train_step`, recovered from the parameter delta of one update.
    fn analytic_gradient(m: &mut ToySeq2Seq<f64>, batch: &[(String, String)]) -> Vec<f64> {
        // With beta1 = beta2 = 0 and eps huge, Adam reduces to p -= lr * g / eps.
        let saved = m.adam.clone();
        let start = m.decoder.clone();
        m.adam.beta1 = 0.0;
        m.adam.beta2 = 0.0;
        m.adam.eps = 1e6;
        m.train_step(batch, 150, 1e6).unwrap();
        let grads: Vec<f64> = start.iter().zip(&m.decoder).map(|(a, b)| a - b).collect();
        m.decoder = start;
        m.adam = saved;
        grads
    }

    #[test]
    fn frozen_parameters_never_change() {
        let mut m = model();
        let frozen = m.frozen_fingerprint();
        let dec = m.trainable_fingerprint();
        let batch = vec![("a b c".to_string(), "x y z".to_string())];
        let out = m.train_step(&batch, 150, 1e-2).unwrap();
        assert!(out.loss.unwrap() > 0.0);
        assert_eq!(m.frozen_fingerprint(), frozen);
        assert_ne!(m.trainable_fingerprint(), dec);
        assert_eq!(m.steps(), 1);
    }

    #[test]
    fn learns_a_substitution() {
        let mut m = model();
        let batch = vec![("a b c".to_string(), "x y z".to_string())];
        for _ in 0..300 {
            m.train_step(&batch, 150, 1e-2).unwrap();
        }
        assert_eq!(m.generate("a b c", 150, None).unwrap().text, "x y z");
    }

    #[test]
    fn truncation_and_length_mismatch() {
        let mut m = model();
        let g = m.generate("a b c d", 2, None).unwrap();
        assert!(g.truncated);
        assert_eq!(g.text.split_whitespace().count(), 2);
        let out = m
            .train_step(&[("a b".to_string(), "x y z".to_string())], 150, 1e-2)
            .unwrap();
        assert_eq!(out.skipped, 1);
        assert!(out.loss.is_none());
        assert!(matches!(m.generate("   ", 150, None), Err(Seq2SeqError::EmptyInput)));
    }

    #[test]
    fn metadata_is_parsed_by_order() {
        let vocab = Vocab::build(["a b c", "Anna casa"]);
        let m: ToySeq2Seq<f64> = ToySeq2Seq::new(
            vocab.clone(),
            ToyConfig { order: ConditioningOrder::MetaSource, ..Default::default() },
        );
        let (text, meta) = m.parse("Anna, casa --- a b");
        assert_eq!(text, vec!["a", "b"]);
        assert_eq!(meta, vec!["Anna", "casa"]);
        let m = m.with_order(ConditioningOrder::SourceMeta);
        let (text, meta) = m.parse("a b --- Anna, casa");
        assert_eq!((text, meta), (vec!["a", "b"], vec!["Anna", "casa"]));
        assert_eq!(m.token_count("a b --- Anna, casa"), 4);
    }

    #[test]
    fn truncation_cuts_the_end_of_the_rendered_input() {
        let vocab = Vocab::build(["a b c d", "Anna casa"]);
        let cfg = |order| ToyConfig { order, ..Default::default() };
        let src_meta: ToySeq2Seq<f64> = ToySeq2Seq::new(vocab.clone(), cfg(ConditioningOrder::SourceMeta));
        let g = src_meta.generate("a b c --- Anna, casa", 4, None).unwrap();
        assert!(g.truncated);
        assert_eq!(g.text.split_whitespace().count(), 3);
        let meta_src: ToySeq2Seq<f64> = ToySeq2Seq::new(vocab, cfg(ConditioningOrder::MetaSource));
        let g = meta_src.generate("Anna, casa --- a b c", 4, None).unwrap();
        assert!(g.truncated);
        assert_eq!(g.text.split_whitespace().count(), 2);
    }

    #[test]
    fn serde_round_trip() {
        let m = model();
        let json = serde_json::to_string(&m).unwrap();
        let back: ToySeq2Seq<f64> = serde_json::from_str(&json).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.generate("a b", 150, None).unwrap(), m.generate("a b", 150, None).unwrap());
    }
}
