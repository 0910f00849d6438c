//! Perception regression: text -> z-scored value per perception dimension.
//!
//! The encoder is pluggable through [`TextEncoder`]; the bundled
//! [`HashedNgramEncoder`] needs no pretrained weights. The head is a ridge
//! regression fitted in closed form.

mod encoder;
pub mod ridge;

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::{CorpusStore, Dimension};
use crate::rng::stable_hash;
use crate::Scalar;

pub use encoder::{cosine, HashedNgramEncoder, TextEncoder};

/// Serialization format version of saved regressors.
pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Training sentences below this count are refused.
pub const MIN_TRAINING_SENTENCES: usize = 10;

#[derive(Debug, Error)]
pub enum ScorerError {
    #[error("need at least {MIN_TRAINING_SENTENCES} gold sentences, got {0}")]
    TooFewExamples(usize),
    #[error("target for sentence `{sentence}` on `{dimension}` is not finite")]
    NonFiniteTarget { sentence: String, dimension: Dimension },
    #[error("sentence `{0}` lacks a value for dimension `{1}`")]
    MissingTarget(String, Dimension),
    #[error("no dimensions to fit")]
    NoDimensions,
    #[error("normal equations are singular; use a positive ridge penalty")]
    Singular,
    #[error("cannot score an empty sentence (batch position {0})")]
    EmptySentence(usize),
    #[error("model file: {0}")]
    Io(#[from] std::io::Error),
    #[error("model file: {0}")]
    Format(#[from] serde_json::Error),
    #[error("unsupported model format version {0}")]
    Version(u32),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressorConfig {
    /// Ridge penalty on the mean-squared-error objective.
    pub lambda: f64,
    /// One in `holdout_modulus` sentences (by id hash) is held out.
    pub holdout_modulus: u64,
}

impl Default for RegressorConfig {
    fn default() -> Self {
        Self {
            lambda: 0.1,
            holdout_modulus: 5,
        }
    }
}

/// One gold training example.
#[derive(Debug, Clone, PartialEq)]
pub struct GoldExample<T> {
    pub sentence_id: String,
    pub text: String,
    pub targets: BTreeMap<Dimension, T>,
}

/// Gold examples of a store, restricted to sentences scored on every dimension in `dimensions`.
pub fn gold_examples(store: &CorpusStore, dimensions: &[Dimension]) -> Vec<GoldExample<f64>> {
    store
        .gold_targets()
        .into_iter()
        .filter(|(_, t)| dimensions.iter().all(|d| t.contains_key(d)))
        .map(|(sid, targets)| GoldExample {
            text: store.sentence(&sid).expect("scores resolve").text.clone(),
            sentence_id: sid,
            targets,
        })
        .collect()
}

/// Whether a sentence belongs to the held-out split.
pub fn is_held_out(sentence_id: &str, modulus: u64) -> bool {
    modulus > 1 && stable_hash(sentence_id) % modulus == 0
}

/// Coefficient of determination `1 - SS_res / SS_tot`.
///
/// `None` when the targets are constant.
pub fn r_squared<T: Scalar>(targets: &[T], predictions: &[T]) -> Option<T> {
    if targets.is_empty() {
        return None;
    }
    let n = T::from_usize(targets.len())?;
    let mean = targets.iter().copied().sum::<T>() / n;
    let ss_tot: T = targets.iter().map(|&y| (y - mean) * (y - mean)).sum();
    let ss_res: T = targets
        .iter()
        .zip(predictions)
        .map(|(&y, &p)| (y - p) * (y - p))
        .sum();
    (ss_tot > T::zero()).then(|| T::one() - ss_res / ss_tot)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerspectiveRegressor<T, E = HashedNgramEncoder> {
    pub format_version: u32,
    pub encoder: E,
    pub dimensions: Vec<Dimension>,
    pub weights: Vec<Vec<T>>,
    pub bias: Vec<T>,
    /// Held-out R^2 per dimension; absent when the split had < 2 distinct targets.
    pub held_out_r2: Vec<Option<T>>,
    pub training_fingerprint: String,
    pub config: RegressorConfig,
}

impl<T: Scalar, E: TextEncoder + Clone> PerspectiveRegressor<T, E> {
    /// Fit on the training split of `gold` and measure R^2 on the held-out split.
    pub fn train(
        gold: &[GoldExample<T>],
        dimensions: &[Dimension],
        encoder: E,
        config: RegressorConfig,
    ) -> Result<Self, ScorerError> {
        if dimensions.is_empty() {
            return Err(ScorerError::NoDimensions);
        }
        if gold.len() < MIN_TRAINING_SENTENCES {
            return Err(ScorerError::TooFewExamples(gold.len()));
        }
        let mut target_rows = Vec::with_capacity(gold.len());
        for ex in gold {
            let mut row = Vec::with_capacity(dimensions.len());
            for dim in dimensions {
                let v = *ex
                    .targets
                    .get(dim)
                    .ok_or_else(|| ScorerError::MissingTarget(ex.sentence_id.clone(), dim.clone()))?;
                if !v.is_finite() {
                    return Err(ScorerError::NonFiniteTarget {
                        sentence: ex.sentence_id.clone(),
                        dimension: dim.clone(),
                    });
                }
                row.push(v);
            }
            target_rows.push(row);
        }

        let (mut train_x, mut train_y, mut test_x, mut test_y) = (vec![], vec![], vec![], vec![]);
        for (ex, y) in gold.iter().zip(target_rows) {
            let x = encoder.encode::<T>(&ex.text);
            if is_held_out(&ex.sentence_id, config.holdout_modulus) {
                test_x.push(x);
                test_y.push(y);
            } else {
                train_x.push(x);
                train_y.push(y);
            }
        }
        if train_x.len() < 2 {
            return Err(ScorerError::TooFewExamples(train_x.len()));
        }
        let fit = ridge::fit(&train_x, &train_y, T::lit(config.lambda)).ok_or(ScorerError::Singular)?;

        let mut model = Self {
            format_version: MODEL_FORMAT_VERSION,
            training_fingerprint: fingerprint(gold, dimensions, &encoder.id(), &config),
            encoder,
            dimensions: dimensions.to_vec(),
            weights: fit.weights,
            bias: fit.bias,
            held_out_r2: Vec::new(),
            config,
        };
        model.held_out_r2 = (0..dimensions.len())
            .map(|k| {
                let ys: Vec<T> = test_y.iter().map(|y| y[k]).collect();
                let ps: Vec<T> = test_x.iter().map(|x| model.predict_features(x)[k]).collect();
                r_squared(&ys, &ps)
            })
            .collect();
        Ok(model)
    }

    fn predict_features(&self, x: &[T]) -> Vec<T> {
        self.weights
            .iter()
            .zip(&self.bias)
            .map(|(w, &b)| ridge::dot(w, x) + b)
            .collect()
    }

    /// Score one sentence; values follow `self.dimensions`.
    pub fn score(&self, text: &str) -> Result<Vec<T>, ScorerError> {
        if text.trim().is_empty() {
            return Err(ScorerError::EmptySentence(0));
        }
        Ok(self.predict_features(&self.encoder.encode::<T>(text)))
    }

    /// Score a batch; output order matches input order.
    pub fn score_sentences<S: AsRef<str> + Sync>(&self, sentences: &[S]) -> Result<Vec<Vec<T>>, ScorerError> {
        if let Some(pos) = sentences.iter().position(|s| s.as_ref().trim().is_empty()) {
            return Err(ScorerError::EmptySentence(pos));
        }
        Ok(sentences
            .par_iter()
            .map(|s| self.predict_features(&self.encoder.encode::<T>(s.as_ref())))
            .collect())
    }

    /// Score of a single dimension.
    pub fn score_dimension(&self, text: &str, dimension: &Dimension) -> Result<Option<T>, ScorerError> {
        let scores = self.score(text)?;
        Ok(self
            .dimensions
            .iter()
            .position(|d| d == dimension)
            .map(|k| scores[k]))
    }

    pub fn dimension_index(&self, dimension: &Dimension) -> Option<usize> {
        self.dimensions.iter().position(|d| d == dimension)
    }
}

impl<T: Scalar, E: TextEncoder + Clone + Serialize + serde::de::DeserializeOwned> PerspectiveRegressor<T, E> {
    pub fn save(&self, path: &Path) -> Result<(), ScorerError> {
        crate::io::write_atomic(path, serde_json::to_string_pretty(self)?.as_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, ScorerError> {
        let model: Self = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        if model.format_version != MODEL_FORMAT_VERSION {
            return Err(ScorerError::Version(model.format_version));
        }
        Ok(model)
    }
}

fn fingerprint<T: Scalar>(
    gold: &[GoldExample<T>],
    dimensions: &[Dimension],
    encoder_id: &str,
    config: &RegressorConfig,
) -> String {
    let mut h = Sha256::new();
    h.update(encoder_id.as_bytes());
    h.update(serde_json::to_vec(config).expect("config serializes"));
    for d in dimensions {
        h.update(d.as_str().as_bytes());
        h.update([0]);
    }
    for ex in gold {
        h.update(ex.sentence_id.as_bytes());
        h.update([0]);
        h.update(ex.text.as_bytes());
        h.update([0]);
        for (d, v) in &ex.targets {
            h.update(d.as_str().as_bytes());
            h.update(v.fingerprint_bits().to_le_bytes());
        }
    }
    hex::encode(h.finalize())
}
