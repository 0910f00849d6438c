//! Quasi-parallel low/high pairs mined within each case.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{CorpusError, CorpusStore, Dimension};

#[derive(Debug, thiserror::Error)]
pub enum PairError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("decision for unknown pair ({low}, {high})")]
    UnknownPair { low: String, high: String },
    #[error("unknown review status `{0}`")]
    BadStatus(String),
    #[error("unknown sentence `{0}`")]
    UnknownSentence(String),
    #[error("tsv: {0}")]
    Tsv(#[from] csv::Error),
    #[error("journal {path}: {source}")]
    Journal {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OverlapStatus {
    Unreviewed,
    Overlapping,
    Rejected,
}

impl OverlapStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            OverlapStatus::Unreviewed => "unreviewed",
            OverlapStatus::Overlapping => "overlapping",
            OverlapStatus::Rejected => "rejected",
        }
    }
}

impl FromStr for OverlapStatus {
    type Err = PairError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "unreviewed" => Ok(OverlapStatus::Unreviewed),
            "overlapping" => Ok(OverlapStatus::Overlapping),
            "rejected" => Ok(OverlapStatus::Rejected),
            other => Err(PairError::BadStatus(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerspectivePair {
    pub low_sentence: String,
    pub high_sentence: String,
    pub case_id: String,
    pub overlap_status: OverlapStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reviewer: Option<String>,
    /// z(high) - z(low) on the mining dimension.
    pub gap: f64,
}

impl PerspectivePair {
    pub fn key(&self) -> (&str, &str) {
        (&self.low_sentence, &self.high_sentence)
    }
}

/// Every same-case (below average, at or above average) combination on `dimension`,
/// ordered by case, low id, high id.
pub fn mine_pairs(store: &CorpusStore, dimension: &Dimension) -> Result<Vec<PerspectivePair>, PairError> {
    let z = store.normalized_values(dimension)?;
    let mut by_case: BTreeMap<&str, (Vec<(&str, f64)>, Vec<(&str, f64)>)> = BTreeMap::new();
    for (sid, &value) in &z {
        let case_id = store.sentence(sid).expect("scored sentences exist").case_id.as_str();
        let slot = by_case.entry(case_id).or_default();
        if value < 0.0 {
            slot.0.push((sid, value));
        } else {
            slot.1.push((sid, value));
        }
    }
    let mut pairs = Vec::new();
    for (case_id, (lows, highs)) in by_case {
        for &(low, zl) in &lows {
            for &(high, zh) in &highs {
                pairs.push(PerspectivePair {
                    low_sentence: low.to_string(),
                    high_sentence: high.to_string(),
                    case_id: case_id.to_string(),
                    overlap_status: OverlapStatus::Unreviewed,
                    reviewer: None,
                    gap: zh - zl,
                });
            }
        }
    }
    Ok(pairs)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewDecision {
    pub low_sentence: String,
    pub high_sentence: String,
    pub status: OverlapStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reviewer: Option<String>,
}

/// Apply decisions in order; later decisions on the same pair win.
pub fn apply_review(
    pairs: &[PerspectivePair],
    decisions: &[ReviewDecision],
) -> Result<Vec<PerspectivePair>, PairError> {
    let index: BTreeMap<(&str, &str), usize> =
        pairs.iter().enumerate().map(|(i, p)| (p.key(), i)).collect();
    let mut out = pairs.to_vec();
    for d in decisions {
        let i = *index
            .get(&(d.low_sentence.as_str(), d.high_sentence.as_str()))
            .ok_or_else(|| PairError::UnknownPair {
                low: d.low_sentence.clone(),
                high: d.high_sentence.clone(),
            })?;
        out[i].overlap_status = d.status;
        out[i].reviewer = d.reviewer.clone();
    }
    Ok(out)
}

/// Which pairs a consumer sees after review.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReviewView {
    /// Only pairs confirmed to describe the same event.
    #[default]
    Overlapping,
    /// Everything not explicitly rejected.
    NotRejected,
    All,
}

impl FromStr for ReviewView {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.replace('_', "-").as_str() {
            "overlapping" => Ok(ReviewView::Overlapping),
            "not-rejected" => Ok(ReviewView::NotRejected),
            "all" => Ok(ReviewView::All),
            other => Err(format!("unknown view `{other}` (overlapping, not-rejected, all)")),
        }
    }
}

pub fn filter_view(pairs: &[PerspectivePair], view: ReviewView) -> Vec<PerspectivePair> {
    pairs
        .iter()
        .filter(|p| match view {
            ReviewView::Overlapping => p.overlap_status == OverlapStatus::Overlapping,
            ReviewView::NotRejected => p.overlap_status != OverlapStatus::Rejected,
            ReviewView::All => true,
        })
        .cloned()
        .collect()
}

/// Append-only log of review decisions.
#[derive(Debug, Clone)]
pub struct ReviewJournal {
    path: PathBuf,
}

impl ReviewJournal {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        Self { path: path.into() }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Validate `decisions` against `pairs`, then append them.
    pub fn record(&self, pairs: &[PerspectivePair], decisions: &[ReviewDecision]) -> Result<(), PairError> {
        apply_review(pairs, decisions)?;
        for d in decisions {
            crate::io::append_jsonl(&self.path, d).map_err(|source| PairError::Journal {
                path: self.path.clone(),
                source,
            })?;
        }
        Ok(())
    }

    pub fn decisions(&self) -> Result<Vec<ReviewDecision>, PairError> {
        crate::io::read_jsonl(&self.path).map_err(|source| PairError::Journal {
            path: self.path.clone(),
            source,
        })
    }

    /// Re-apply every journaled decision to freshly mined pairs.
    pub fn replay(&self, pairs: &[PerspectivePair]) -> Result<Vec<PerspectivePair>, PairError> {
        apply_review(pairs, &self.decisions()?)
    }
}

/// Keep pairs by descending gap (ties by ids), skipping any that reuse a sentence.
///
/// The result is a maximal matching, so it is at least half the size of a maximum one.
pub fn dedupe_unique(pairs: &[PerspectivePair]) -> Vec<PerspectivePair> {
    let mut order: Vec<&PerspectivePair> = pairs.iter().collect();
    order.sort_by(|a, b| {
        b.gap
            .total_cmp(&a.gap)
            .then_with(|| a.low_sentence.cmp(&b.low_sentence))
            .then_with(|| a.high_sentence.cmp(&b.high_sentence))
    });
    let mut used: BTreeSet<&str> = BTreeSet::new();
    let mut kept = Vec::new();
    for p in order {
        if used.contains(p.low_sentence.as_str()) || used.contains(p.high_sentence.as_str()) {
            continue;
        }
        used.insert(&p.low_sentence);
        used.insert(&p.high_sentence);
        kept.push(p.clone());
    }
    kept.sort_by(|a, b| (&a.case_id, &a.low_sentence, &a.high_sentence).cmp(&(&b.case_id, &b.low_sentence, &b.high_sentence)));
    kept
}

pub const TSV_HEADER: [&str; 6] = ["low_id", "high_id", "case_id", "low_text", "high_text", "status"];

pub fn write_tsv<W: Write>(pairs: &[PerspectivePair], store: &CorpusStore, out: W) -> Result<(), PairError> {
    let mut w = csv::WriterBuilder::new().delimiter(b'\t').from_writer(out);
    w.write_record(TSV_HEADER)?;
    for p in pairs {
        let text = |id: &str| {
            store
                .sentence(id)
                .map(|s| s.text.as_str())
                .ok_or_else(|| PairError::UnknownSentence(id.to_string()))
        };
        w.write_record([
            p.low_sentence.as_str(),
            p.high_sentence.as_str(),
            p.case_id.as_str(),
            text(&p.low_sentence)?,
            text(&p.high_sentence)?,
            p.overlap_status.as_str(),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Read review decisions from a TSV with at least `low_id`, `high_id` and
/// `status` columns; `unreviewed` rows are ignored.
pub fn read_decisions_tsv<R: Read>(input: R, reviewer: Option<&str>) -> Result<Vec<ReviewDecision>, PairError> {
    #[derive(Deserialize)]
    struct Row {
        low_id: String,
        high_id: String,
        status: String,
    }
    let mut r = csv::ReaderBuilder::new().delimiter(b'\t').flexible(true).from_reader(input);
    let mut out = Vec::new();
    for row in r.deserialize::<Row>() {
        let row = row?;
        let status: OverlapStatus = row.status.parse()?;
        if status == OverlapStatus::Unreviewed {
            continue;
        }
        out.push(ReviewDecision {
            low_sentence: row.low_id,
            high_sentence: row.high_id,
            status,
            reviewer: reviewer.map(str::to_string),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{CaseRecord, CaseType, CorpusRecord, PerceptionScore, Provenance, SentenceRecord};

    pub(crate) fn store(spec: &[(&str, &str, f64)]) -> CorpusStore {
        let cases: BTreeSet<&str> = spec.iter().map(|s| s.1).collect();
        let mut records: Vec<CorpusRecord> = cases
            .into_iter()
            .map(|c| {
                CorpusRecord::Case(CaseRecord {
                    case_id: c.into(),
                    case_type: CaseType::Femicide,
                    victim_name: String::new(),
                    perpetrator_name: String::new(),
                    relationship: String::new(),
                    weapon: String::new(),
                    location_town: String::new(),
                    location_place: String::new(),
                    date: None,
                })
            })
            .collect();
        for (sid, case, v) in spec {
            records.push(CorpusRecord::Sentence(SentenceRecord {
                sentence_id: sid.to_string(),
                case_id: case.to_string(),
                article_id: "a".into(),
                text: format!("testo {sid}"),
                language: "it".into(),
            }));
            records.push(CorpusRecord::Score(PerceptionScore {
                sentence_id: sid.to_string(),
                dimension: Dimension::BlameMurderer,
                value: *v,
                provenance: Provenance::Gold,
            }));
        }
        CorpusStore::from_records(records).unwrap()
    }

    fn ids(pairs: &[PerspectivePair]) -> Vec<(&str, &str)> {
        pairs.iter().map(|p| p.key()).collect()
    }

    #[test]
    fn only_same_case_combinations() {
        // raw values chosen so that z(s1) < 0 <= z(s2), z(s3)
        let s = store(&[("s1", "A", 0.0), ("s2", "A", 2.0), ("s3", "B", 1.5)]);
        let pairs = mine_pairs(&s, &Dimension::BlameMurderer).unwrap();
        assert_eq!(ids(&pairs), vec![("s1", "s2")]);
        assert!(pairs.iter().all(|p| p.overlap_status == OverlapStatus::Unreviewed && p.gap > 0.0));
    }

    #[test]
    fn missing_dimension_is_an_error() {
        let s = store(&[("s1", "A", 0.0), ("s2", "A", 2.0)]);
        assert!(matches!(
            mine_pairs(&s, &Dimension::HumanCause),
            Err(PairError::Corpus(CorpusError::MissingDimension(_)))
        ));
    }

    #[test]
    fn review_filters_and_rejects_unknown() {
        let s = store(&[("a", "A", 0.0), ("b", "A", 0.1), ("c", "A", 3.0), ("d", "A", 3.1), ("e", "A", 3.2)]);
        let pairs = mine_pairs(&s, &Dimension::BlameMurderer).unwrap();
        let three = &pairs[..3];
        let reject = ReviewDecision {
            low_sentence: three[1].low_sentence.clone(),
            high_sentence: three[1].high_sentence.clone(),
            status: OverlapStatus::Rejected,
            reviewer: Some("r1".into()),
        };
        let reviewed = apply_review(three, std::slice::from_ref(&reject)).unwrap();
        assert_eq!(filter_view(&reviewed, ReviewView::NotRejected).len(), 2);
        assert_eq!(filter_view(&reviewed, ReviewView::Overlapping).len(), 0);
        assert_eq!(apply_review(three, &[]).unwrap(), three.to_vec());
        let bogus = ReviewDecision {
            low_sentence: "zz".into(),
            ..reject
        };
        assert!(matches!(apply_review(three, &[bogus]), Err(PairError::UnknownPair { .. })));
    }

    #[test]
    fn journal_replays_decisions() {
        let dir = tempfile::tempdir().unwrap();
        let s = store(&[("a", "A", 0.0), ("b", "A", 3.0), ("c", "A", 3.1)]);
        let pairs = mine_pairs(&s, &Dimension::BlameMurderer).unwrap();
        let journal = ReviewJournal::new(dir.path().join("review.jsonl"));
        let d = |h: &str, status| ReviewDecision {
            low_sentence: "a".into(),
            high_sentence: h.into(),
            status,
            reviewer: None,
        };
        journal.record(&pairs, &[d("b", OverlapStatus::Overlapping)]).unwrap();
        journal.record(&pairs, &[d("c", OverlapStatus::Rejected), d("b", OverlapStatus::Rejected)]).unwrap();
        assert!(journal.record(&pairs, &[d("zz", OverlapStatus::Rejected)]).is_err());
        assert_eq!(journal.decisions().unwrap().len(), 3);
        let replayed = journal.replay(&pairs).unwrap();
        assert!(replayed.iter().all(|p| p.overlap_status == OverlapStatus::Rejected));
    }

    #[test]
    fn dedupe_single_conflict_and_identity() {
        let p = |l: &str, h: &str, gap| PerspectivePair {
            low_sentence: l.into(),
            high_sentence: h.into(),
            case_id: "A".into(),
            overlap_status: OverlapStatus::Unreviewed,
            reviewer: None,
            gap,
        };
        let kept = dedupe_unique(&[p("a", "b", 1.0), p("a", "c", 2.0)]);
        assert_eq!(ids(&kept), vec![("a", "c")]);
        let disjoint = vec![p("a", "b", 1.0), p("c", "d", 1.0)];
        assert_eq!(dedupe_unique(&disjoint), disjoint);
    }

    #[test]
    fn tsv_round_trip() {
        let s = store(&[("a", "A", 0.0), ("b", "A", 3.0), ("c", "A", 3.1)]);
        let pairs = mine_pairs(&s, &Dimension::BlameMurderer).unwrap();
        let mut buf = Vec::new();
        write_tsv(&pairs, &s, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("low_id\thigh_id\tcase_id\tlow_text\thigh_text\tstatus\n"));
        assert!(text.contains("a\tb\tA\ttesto a\ttesto b\tunreviewed"));
        let edited = text.replacen("unreviewed", "overlapping", 1);
        let decisions = read_decisions_tsv(edited.as_bytes(), Some("ann")).unwrap();
        assert_eq!(decisions.len(), 1);
        assert_eq!(decisions[0].status, OverlapStatus::Overlapping);
    }
}
