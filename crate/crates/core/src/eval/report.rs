use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{bleu, rouge, TOKENIZATION};
use super::ratings::HumanScores;
use super::stats::{harmonic_mean, StatsError};
use super::table::{fmt2, fmt3, Table};
use crate::corpus::{CorpusStore, Dimension};
use crate::pairs::PerspectivePair;
use crate::scorer::{cosine, HashedNgramEncoder, PerspectiveRegressor, TextEncoder};
use crate::Scalar;

/// Neural content-similarity scorer; takes the candidate, its source and a reference.
pub trait SimilarityScorer: Send + Sync {
    fn id(&self) -> String;
    fn score(&self, candidate: &str, source: &str, reference: &str) -> Result<f64, String>;
}

/// Cosine between encoder vectors of candidate and reference.
#[derive(Debug, Clone, Default)]
pub struct EncoderCosine<E = HashedNgramEncoder> {
    pub encoder: E,
}

impl<E: TextEncoder> SimilarityScorer for EncoderCosine<E> {
    fn id(&self) -> String {
        format!("cosine[{}]", self.encoder.id())
    }

    fn score(&self, candidate: &str, _source: &str, reference: &str) -> Result<f64, String> {
        if candidate.trim().is_empty() || reference.trim().is_empty() {
            return Err("empty text".into());
        }
        cosine(&self.encoder.encode::<f64>(candidate), &self.encoder.encode::<f64>(reference))
            .ok_or_else(|| "zero vector: nothing to compare".to_string())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("output for `{0}`, which is not the low side of any pair")]
    UnknownSource(String),
    #[error("sentence `{0}` is not in the store")]
    UnknownSentence(String),
    #[error("regressor has no dimensions")]
    NoDimensions,
    #[error(transparent)]
    Stats(#[from] StatsError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerspectiveCell {
    pub dimension: Dimension,
    pub output: Option<f64>,
    pub source: f64,
    pub target: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub system_id: String,
    pub tokenization: String,
    pub similarity_scorer: String,
    pub evaluated: usize,
    pub missing_outputs: Vec<String>,
    pub neural_failures: usize,
    pub perspective: Vec<PerspectiveCell>,
    pub bleu_src: Option<f64>,
    pub rouge_src: Option<f64>,
    pub neural_src: Option<f64>,
    pub bleu_tgt: Option<f64>,
    pub rouge_tgt: Option<f64>,
    pub neural_tgt: Option<f64>,
    pub human_perspective: Option<f64>,
    pub human_similarity: Option<f64>,
    pub hm: Option<f64>,
}

impl EvalReport {
    pub fn with_human(mut self, human: &HumanScores) -> Result<Self, StatsError> {
        self.human_perspective = Some(human.perspective);
        self.human_similarity = Some(human.similarity);
        self.hm = Some(harmonic_mean(human.perspective, human.similarity)?);
        Ok(self)
    }

    pub fn perspective_on(&self, dimension: &Dimension) -> Option<&PerspectiveCell> {
        self.perspective.iter().find(|c| &c.dimension == dimension)
    }
}

/// Low sentence id to its sorted high partners.
fn pair_index(pairs: &[PerspectivePair]) -> BTreeMap<&str, Vec<&str>> {
    let mut idx: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for p in pairs {
        idx.entry(&p.low_sentence).or_default().insert(&p.high_sentence);
    }
    idx.into_iter().map(|(k, v)| (k, v.into_iter().collect())).collect()
}

fn text<'a>(store: &'a CorpusStore, id: &str) -> Result<&'a str, EvalError> {
    store
        .sentence(id)
        .map(|s| s.text.as_str())
        .ok_or_else(|| EvalError::UnknownSentence(id.to_string()))
}

fn mean(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let (mut sum, mut n) = (0.0, 0usize);
    for v in values {
        sum += v;
        n += 1;
    }
    (n > 0).then(|| sum / n as f64)
}

/// Column means of equally long rows, in row order.
fn column_means(rows: &[Vec<f64>], width: usize) -> Vec<Option<f64>> {
    (0..width).map(|d| mean(rows.iter().map(|r| r[d]))).collect()
}

fn perspective_of<T: Scalar, E: TextEncoder + Clone>(
    regressor: &PerspectiveRegressor<T, E>,
    text: &str,
) -> Option<Vec<f64>> {
    regressor.score(text).ok().map(|v| v.into_iter().map(|x| x.as_f64()).collect())
}

struct Item {
    perspective: Option<Vec<f64>>,
    source_perspective: Vec<f64>,
    target_perspective: Vec<f64>,
    bleu_src: f64,
    rouge_src: f64,
    neural_src: Option<f64>,
    bleu_tgt: f64,
    rouge_tgt: f64,
    neural_tgt: Option<f64>,
    neural_failures: usize,
}

/// Score a system's outputs (keyed by source sentence id) against the
/// mined pairs. Target-side values average over every gold target of a source.
pub fn evaluate_system<T: Scalar, E: TextEncoder + Clone>(
    system_id: &str,
    outputs: &BTreeMap<String, String>,
    pairs: &[PerspectivePair],
    store: &CorpusStore,
    similarity: &dyn SimilarityScorer,
    regressor: &PerspectiveRegressor<T, E>,
) -> Result<EvalReport, EvalError> {
    let dims = regressor.dimensions.len();
    if dims == 0 {
        return Err(EvalError::NoDimensions);
    }
    let index = pair_index(pairs);
    if let Some(unknown) = outputs.keys().find(|k| !index.contains_key(k.as_str())) {
        return Err(EvalError::UnknownSource(unknown.clone()));
    }
    let mut work = Vec::with_capacity(index.len());
    let mut missing = Vec::new();
    for (&source_id, targets) in &index {
        let source = text(store, source_id)?;
        let targets: Vec<&str> = targets.iter().map(|t| text(store, t)).collect::<Result<_, _>>()?;
        match outputs.get(source_id) {
            Some(out) => work.push((source, targets, out.as_str())),
            None => missing.push(source_id.to_string()),
        }
    }
    if !missing.is_empty() {
        log::warn!("{system_id}: {} source(s) have no output", missing.len());
    }

    let items: Vec<Item> = work
        .par_iter()
        .map(|(source, targets, output)| {
            let mut failures = 0;
            let mut neural = |reference: &str| match similarity.score(output, source, reference) {
                Ok(v) => Some(v),
                Err(e) => {
                    log::warn!("{system_id}: similarity scorer failed: {e}");
                    failures += 1;
                    None
                }
            };
            let neural_src = neural(source);
            let neural_tgt: Vec<Option<f64>> = targets.iter().map(|t| neural(t)).collect();
            let target_rows: Vec<Vec<f64>> = targets
                .iter()
                .filter_map(|t| perspective_of(regressor, t))
                .collect();
            Item {
                perspective: perspective_of(regressor, output),
                source_perspective: perspective_of(regressor, source).unwrap_or_else(|| vec![0.0; dims]),
                target_perspective: column_means(&target_rows, dims)
                    .into_iter()
                    .map(|v| v.unwrap_or(0.0))
                    .collect(),
                bleu_src: bleu(output, &[source]),
                rouge_src: rouge(output, &[source]),
                neural_src,
                bleu_tgt: mean(targets.iter().map(|t| bleu(output, &[t]))).unwrap_or(0.0),
                rouge_tgt: mean(targets.iter().map(|t| rouge(output, &[t]))).unwrap_or(0.0),
                neural_tgt: if neural_tgt.iter().all(Option::is_some) {
                    mean(neural_tgt.into_iter().flatten())
                } else {
                    None
                },
                neural_failures: failures,
            }
        })
        .collect();

    let outputs_rows: Vec<Vec<f64>> = items.iter().filter_map(|i| i.perspective.clone()).collect();
    let source_rows: Vec<Vec<f64>> = items.iter().map(|i| i.source_perspective.clone()).collect();
    let target_rows: Vec<Vec<f64>> = items.iter().map(|i| i.target_perspective.clone()).collect();
    let (out_means, src_means, tgt_means) = (
        column_means(&outputs_rows, dims),
        column_means(&source_rows, dims),
        column_means(&target_rows, dims),
    );
    let perspective = regressor
        .dimensions
        .iter()
        .enumerate()
        .map(|(d, dimension)| PerspectiveCell {
            dimension: dimension.clone(),
            output: out_means[d],
            source: src_means[d].unwrap_or(0.0),
            target: tgt_means[d].unwrap_or(0.0),
        })
        .collect();

    Ok(EvalReport {
        system_id: system_id.to_string(),
        tokenization: TOKENIZATION.to_string(),
        similarity_scorer: similarity.id(),
        evaluated: items.len(),
        missing_outputs: missing,
        neural_failures: items.iter().map(|i| i.neural_failures).sum(),
        perspective,
        bleu_src: mean(items.iter().map(|i| i.bleu_src)),
        rouge_src: mean(items.iter().map(|i| i.rouge_src)),
        neural_src: mean(items.iter().filter_map(|i| i.neural_src)),
        bleu_tgt: mean(items.iter().map(|i| i.bleu_tgt)),
        rouge_tgt: mean(items.iter().map(|i| i.rouge_tgt)),
        neural_tgt: mean(items.iter().filter_map(|i| i.neural_tgt)),
        human_perspective: None,
        human_similarity: None,
        hm: None,
    })
}

/// Outputs that copy each mined source unchanged.
pub fn copy_outputs(pairs: &[PerspectivePair], store: &CorpusStore) -> BTreeMap<String, String> {
    pair_index(pairs)
        .keys()
        .filter_map(|id| store.sentence(id).map(|s| (id.to_string(), s.text.clone())))
        .collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ContentScores {
    pub bleu: Option<f64>,
    pub rouge: Option<f64>,
    pub neural: Option<f64>,
}

/// Content overlap between the gold sides themselves, for the Source and Target columns.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ReferenceContent {
    /// Targets scored as candidates against their source.
    pub target_vs_source: ContentScores,
    /// Sources scored as candidates against their targets.
    pub source_vs_target: ContentScores,
}

pub fn reference_content(
    pairs: &[PerspectivePair],
    store: &CorpusStore,
    similarity: &dyn SimilarityScorer,
) -> Result<ReferenceContent, EvalError> {
    let index = pair_index(pairs);
    let mut rows = Vec::new();
    for (&s, targets) in &index {
        let source = text(store, s)?;
        for t in targets {
            rows.push((source, text(store, t)?));
        }
    }
    let per_source = |f: &dyn Fn(&str, &str) -> Option<f64>| -> Option<f64> {
        let mut by_source: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
        for &(s, t) in &rows {
            if let Some(v) = f(s, t) {
                by_source.entry(s).or_default().push(v);
            }
        }
        mean(by_source.values().filter_map(|v| mean(v.iter().copied())))
    };
    Ok(ReferenceContent {
        target_vs_source: ContentScores {
            bleu: per_source(&|s, t| Some(bleu(t, &[s]))),
            rouge: per_source(&|s, t| Some(rouge(t, &[s]))),
            neural: per_source(&|s, t| similarity.score(t, s, s).ok()),
        },
        source_vs_target: ContentScores {
            bleu: per_source(&|s, t| Some(bleu(s, &[t]))),
            rouge: per_source(&|s, t| Some(rouge(s, &[t]))),
            neural: per_source(&|s, t| similarity.score(s, s, t).ok()),
        },
    })
}

/// Everything needed to print the three report tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSuite {
    pub reports: Vec<EvalReport>,
    pub reference: ReferenceContent,
    /// Held-out R^2 of the perspective model per dimension.
    pub r_squared: Vec<(Dimension, Option<f64>)>,
}

impl EvalSuite {
    fn system_header(&self, lead: &[&str]) -> Vec<String> {
        lead.iter()
            .map(|s| s.to_string())
            .chain(self.reports.iter().map(|r| r.system_id.clone()))
            .collect()
    }

    /// Mean predicted z-score per dimension: source, averaged target, each system.
    pub fn perspective_table(&self) -> Table {
        let mut t = Table::new(
            "Perspective (mean z-score)",
            self.system_header(&["Dimension", "R2", "Source", "Target (avg)"]),
        );
        for (dimension, r2) in &self.r_squared {
            let first = self.reports.first().and_then(|r| r.perspective_on(dimension));
            let mut row = vec![
                Some(format!("\"{}\"", dimension.label())),
                fmt2(*r2),
                fmt3(first.map(|c| c.source)),
                fmt3(first.map(|c| c.target)),
            ];
            row.extend(
                self.reports
                    .iter()
                    .map(|r| fmt3(r.perspective_on(dimension).and_then(|c| c.output))),
            );
            t.push(row);
        }
        t
    }

    /// Content preservation against source and gold targets.
    pub fn content_table(&self) -> Table {
        let mut t = Table::new(
            "Content preservation",
            self.system_header(&["Metric", "vs", "Source", "Target (avg)"]),
        );
        let dash = || Some("-".to_string());
        type Pick = fn(&EvalReport) -> Option<f64>;
        let rows: [(&str, &str, Pick, Option<f64>); 6] = [
            ("BLEU", "src", |r| r.bleu_src, self.reference.target_vs_source.bleu),
            ("ROUGE", "src", |r| r.rouge_src, self.reference.target_vs_source.rouge),
            ("Neural", "src", |r| r.neural_src, self.reference.target_vs_source.neural),
            ("BLEU", "tgt", |r| r.bleu_tgt, self.reference.source_vs_target.bleu),
            ("ROUGE", "tgt", |r| r.rouge_tgt, self.reference.source_vs_target.rouge),
            ("Neural", "tgt", |r| r.neural_tgt, self.reference.source_vs_target.neural),
        ];
        for (metric, side, pick, reference) in rows {
            let (source, target) = if side == "src" { (dash(), fmt3(reference)) } else { (fmt3(reference), dash()) };
            let mut row = vec![Some(metric.to_string()), Some(side.to_string()), source, target];
            row.extend(self.reports.iter().map(|r| fmt3(pick(r))));
            t.push(row);
        }
        t
    }

    /// Human ratings; systems without ratings get blank cells.
    pub fn human_table(&self) -> Table {
        let mut t = Table::new(
            "Human evaluation (0-10)",
            vec!["System".into(), "Perspective".into(), "Similarity".into(), "HM".into()],
        );
        for r in &self.reports {
            t.push(vec![
                Some(r.system_id.clone()),
                fmt2(r.human_perspective),
                fmt2(r.human_similarity),
                fmt2(r.hm),
            ]);
        }
        t
    }

    pub fn tables(&self) -> [Table; 3] {
        [self.perspective_table(), self.content_table(), self.human_table()]
    }

    /// Aligned text of all tables, with tokenization and scorer noted up top.
    pub fn render_text(&self) -> String {
        let scorer = self.reports.first().map_or("none", |r| r.similarity_scorer.as_str());
        let mut out = format!("# tokenization: {TOKENIZATION}\n# similarity scorer: {scorer}\n");
        for t in self.tables() {
            out.push('\n');
            out.push_str(&t.to_text());
        }
        out
    }
}
