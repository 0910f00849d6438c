use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::Serialize;
use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

use super::{
    z_normalize, CaseRecord, CorpusRecord, Dimension, PerceptionScore, Provenance, SentenceRecord,
    ZScoreError,
};

/// File name of the canonical corpus inside a store directory.
pub const STORE_FILE: &str = "corpus.jsonl";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CorpusFormat {
    #[default]
    Jsonl,
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: schema violation: {message}")]
    Schema { line: usize, message: String },
    #[error("line {line}: {kind} `{id}` references unknown {target} `{reference}`")]
    Dangling {
        line: usize,
        kind: &'static str,
        id: String,
        target: &'static str,
        reference: String,
    },
    #[error("line {line}: duplicate {kind} id `{id}`")]
    Duplicate {
        line: usize,
        kind: &'static str,
        id: String,
    },
    #[error("dimension `{0}` has no scores in the store")]
    MissingDimension(Dimension),
    #[error("cannot normalize dimension `{dimension}`: {source}")]
    Normalization {
        dimension: Dimension,
        #[source]
        source: ZScoreError,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RecordCounts {
    pub cases: usize,
    pub sentences: usize,
    pub scores: usize,
}

type ScoreKey = (String, Dimension, Provenance);

/// Validated, immutable corpus.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CorpusStore {
    cases: BTreeMap<String, CaseRecord>,
    sentences: BTreeMap<String, SentenceRecord>,
    scores: BTreeMap<ScoreKey, f64>,
}

impl CorpusStore {
    /// Read and validate a corpus file.
    pub fn ingest(path: &Path, format: CorpusFormat) -> Result<Self, CorpusError> {
        let CorpusFormat::Jsonl = format;
        let io_err = |source| CorpusError::Io {
            path: path.display().to_string(),
            source,
        };
        let reader = BufReader::new(File::open(path).map_err(io_err)?);
        let mut records = Vec::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line.map_err(io_err)?;
            if line.trim().is_empty() {
                continue;
            }
            let record: CorpusRecord =
                serde_json::from_str(&line).map_err(|e| CorpusError::Schema {
                    line: idx + 1,
                    message: e.to_string(),
                })?;
            records.push((idx + 1, record));
        }
        Self::from_numbered(records)
    }

    /// Load a store directory written by [`CorpusStore::save`].
    pub fn load(dir: &Path) -> Result<Self, CorpusError> {
        Self::ingest(&dir.join(STORE_FILE), CorpusFormat::Jsonl)
    }

    /// Build from in-memory records; line numbers in errors are 1-based record positions.
    pub fn from_records(records: impl IntoIterator<Item = CorpusRecord>) -> Result<Self, CorpusError> {
        Self::from_numbered(records.into_iter().enumerate().map(|(i, r)| (i + 1, r)))
    }

    fn from_numbered(
        records: impl IntoIterator<Item = (usize, CorpusRecord)>,
    ) -> Result<Self, CorpusError> {
        let mut store = CorpusStore::default();
        let mut pending_sentences = Vec::new();
        let mut pending_scores = Vec::new();
        for (line, record) in records {
            match record {
                CorpusRecord::Case(case) => {
                    if case.case_id.trim().is_empty() {
                        return Err(schema(line, "case_id must be non-empty"));
                    }
                    if store.cases.contains_key(&case.case_id) {
                        return Err(CorpusError::Duplicate {
                            line,
                            kind: "case",
                            id: case.case_id,
                        });
                    }
                    store.cases.insert(case.case_id.clone(), nfc_case(case));
                }
                CorpusRecord::Sentence(sentence) => pending_sentences.push((line, sentence)),
                CorpusRecord::Score(score) => pending_scores.push((line, score)),
            }
        }
        for (line, mut sentence) in pending_sentences {
            if sentence.text.trim().is_empty() {
                return Err(schema(line, "sentence text is empty"));
            }
            if !store.cases.contains_key(&sentence.case_id) {
                return Err(CorpusError::Dangling {
                    line,
                    kind: "sentence",
                    id: sentence.sentence_id,
                    target: "case",
                    reference: sentence.case_id,
                });
            }
            if store.sentences.contains_key(&sentence.sentence_id) {
                return Err(CorpusError::Duplicate {
                    line,
                    kind: "sentence",
                    id: sentence.sentence_id,
                });
            }
            sentence.text = sentence.text.nfc().collect();
            store.sentences.insert(sentence.sentence_id.clone(), sentence);
        }
        for (line, score) in pending_scores {
            if !score.value.is_finite() {
                return Err(schema(line, "score value must be finite"));
            }
            if !store.sentences.contains_key(&score.sentence_id) {
                return Err(CorpusError::Dangling {
                    line,
                    kind: "score",
                    id: format!("{}/{}", score.sentence_id, score.dimension),
                    target: "sentence",
                    reference: score.sentence_id,
                });
            }
            let key = (score.sentence_id, score.dimension, score.provenance);
            if store.scores.contains_key(&key) {
                return Err(CorpusError::Duplicate {
                    line,
                    kind: "score",
                    id: format!("{}/{}/{:?}", key.0, key.1, key.2),
                });
            }
            store.scores.insert(key, score.value);
        }
        Ok(store)
    }

    pub fn counts(&self) -> RecordCounts {
        RecordCounts {
            cases: self.cases.len(),
            sentences: self.sentences.len(),
            scores: self.scores.len(),
        }
    }

    /// Canonical record order: cases, sentences, scores, each sorted by key.
    pub fn records(&self) -> impl Iterator<Item = CorpusRecord> + '_ {
        let cases = self.cases.values().cloned().map(CorpusRecord::Case);
        let sentences = self.sentences.values().cloned().map(CorpusRecord::Sentence);
        let scores = self.scores.iter().map(|((sid, dim, prov), value)| {
            CorpusRecord::Score(PerceptionScore {
                sentence_id: sid.clone(),
                dimension: dim.clone(),
                value: *value,
                provenance: *prov,
            })
        });
        cases.chain(sentences).chain(scores)
    }

    pub fn write_jsonl(&self, path: &Path) -> Result<(), CorpusError> {
        let io_err = |source| CorpusError::Io {
            path: path.display().to_string(),
            source,
        };
        let mut out = BufWriter::new(File::create(path).map_err(io_err)?);
        for record in self.records() {
            let line = serde_json::to_string(&record).expect("records serialize");
            writeln!(out, "{line}").map_err(io_err)?;
        }
        out.flush().map_err(io_err)
    }

    /// Write the canonical store file into `dir`, creating it if needed.
    pub fn save(&self, dir: &Path) -> Result<(), CorpusError> {
        std::fs::create_dir_all(dir).map_err(|source| CorpusError::Io {
            path: dir.display().to_string(),
            source,
        })?;
        self.write_jsonl(&dir.join(STORE_FILE))
    }

    pub fn case(&self, case_id: &str) -> Option<&CaseRecord> {
        self.cases.get(case_id)
    }

    pub fn sentence(&self, sentence_id: &str) -> Option<&SentenceRecord> {
        self.sentences.get(sentence_id)
    }

    pub fn cases(&self) -> impl Iterator<Item = &CaseRecord> {
        self.cases.values()
    }

    pub fn sentences(&self) -> impl Iterator<Item = &SentenceRecord> {
        self.sentences.values()
    }

    /// Case record of a sentence; always resolves for stored sentences.
    pub fn case_of(&self, sentence: &SentenceRecord) -> &CaseRecord {
        &self.cases[&sentence.case_id]
    }

    pub fn score(&self, sentence_id: &str, dimension: &Dimension, provenance: Provenance) -> Option<f64> {
        self.scores
            .get(&(sentence_id.to_owned(), dimension.clone(), provenance))
            .copied()
    }

    pub fn dimensions(&self) -> BTreeSet<Dimension> {
        self.scores.keys().map(|(_, dim, _)| dim.clone()).collect()
    }

    /// One raw value per scored sentence on `dimension`; gold wins over silver.
    pub fn raw_values(&self, dimension: &Dimension) -> BTreeMap<String, f64> {
        let mut values = BTreeMap::new();
        for ((sid, dim, prov), value) in &self.scores {
            if dim != dimension {
                continue;
            }
            match prov {
                Provenance::Gold => {
                    values.insert(sid.clone(), *value);
                }
                Provenance::Silver => {
                    values.entry(sid.clone()).or_insert(*value);
                }
            }
        }
        values
    }

    /// Z-scores over the mining population: every gold or silver scored
    /// sentence on `dimension`.
    pub fn normalized_values(&self, dimension: &Dimension) -> Result<BTreeMap<String, f64>, CorpusError> {
        let raw = self.raw_values(dimension);
        if raw.is_empty() {
            return Err(CorpusError::MissingDimension(dimension.clone()));
        }
        let values: Vec<f64> = raw.values().copied().collect();
        let z = z_normalize(&values).map_err(|source| CorpusError::Normalization {
            dimension: dimension.clone(),
            source,
        })?;
        Ok(raw.into_keys().zip(z).collect())
    }

    /// Gold annotations grouped per sentence, for regressor training.
    pub fn gold_targets(&self) -> BTreeMap<String, BTreeMap<Dimension, f64>> {
        let mut out: BTreeMap<String, BTreeMap<Dimension, f64>> = BTreeMap::new();
        for ((sid, dim, prov), value) in &self.scores {
            if *prov == Provenance::Gold {
                out.entry(sid.clone()).or_default().insert(dim.clone(), *value);
            }
        }
        out
    }
}

fn schema(line: usize, message: &str) -> CorpusError {
    CorpusError::Schema {
        line,
        message: message.to_owned(),
    }
}

fn nfc_case(mut case: CaseRecord) -> CaseRecord {
    for field in [
        &mut case.victim_name,
        &mut case.perpetrator_name,
        &mut case.relationship,
        &mut case.weapon,
        &mut case.location_town,
        &mut case.location_place,
    ] {
        *field = field.nfc().collect();
    }
    case
}
