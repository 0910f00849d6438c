//! Append-only JSONL journals for consents and ratings.
//!
//! Every write holds the state's write lock while it appends, so the journal
//! has a single writer and its order matches the in-memory order.

use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};
use std::sync::RwLock;

use perspectra::eval::{check_scale, RatingError, RatingRecord};
use perspectra::io::{append_jsonl, read_jsonl};
use serde::{Deserialize, Serialize};

use crate::{SurveyDefinition, SurveyError};

pub const RATINGS_FILE: &str = "ratings.jsonl";
pub const CONSENTS_FILE: &str = "consents.jsonl";
pub const CONSENT_VERSION: &str = "1";
pub const CONSENT_TEXT: &str = "This questionnaire contains descriptions of gender-based violence, \
including femicides reported in the news. Some sentences may be upsetting. Participation is voluntary, \
ratings are stored under a pseudonymous id only, and you may stop at any time.";

/// Body of a rating submission. Both scores are required; range is checked on submit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatingSubmission {
    pub rater_id: String,
    pub block_id: String,
    pub candidate_id: String,
    pub blame: i64,
    pub similarity: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConsentRecord {
    pub rater_id: String,
    pub version: String,
    pub timestamp: u64,
}

#[derive(Debug, Default)]
struct Ratings {
    records: Vec<RatingRecord>,
    keys: HashSet<(String, String)>,
}

#[derive(Debug)]
pub struct SurveyStore {
    dir: PathBuf,
    ratings: RwLock<Ratings>,
    consents: RwLock<BTreeMap<String, ConsentRecord>>,
}

/// Pseudonymous rater tokens: 1 to 64 characters from `[A-Za-z0-9_-]`.
pub fn validate_rater(rater: &str) -> Result<(), SurveyError> {
    let ok = !rater.is_empty()
        && rater.len() <= 64
        && rater.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_');
    if ok {
        Ok(())
    } else {
        Err(SurveyError::InvalidRater(rater.to_string()))
    }
}

pub fn unix_now() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

impl SurveyStore {
    /// Open the journals in `dir`, replaying whatever is already there.
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, SurveyError> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir).map_err(|e| SurveyError::io(&dir, e))?;
        let ratings_path = dir.join(RATINGS_FILE);
        let records: Vec<RatingRecord> = read_jsonl(&ratings_path).map_err(|e| SurveyError::io(&ratings_path, e))?;
        let mut ratings = Ratings::default();
        for r in records {
            r.validate()?;
            if !ratings.keys.insert((r.rater_id.clone(), r.candidate_id.clone())) {
                return Err(RatingError::Duplicate {
                    rater_id: r.rater_id,
                    candidate_id: r.candidate_id,
                }
                .into());
            }
            ratings.records.push(r);
        }
        let consents_path = dir.join(CONSENTS_FILE);
        let consents: Vec<ConsentRecord> = read_jsonl(&consents_path).map_err(|e| SurveyError::io(&consents_path, e))?;
        let consents = consents.into_iter().map(|c| (c.rater_id.clone(), c)).collect();
        Ok(Self {
            dir,
            ratings: RwLock::new(ratings),
            consents: RwLock::new(consents),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Record consent; repeated consent by the same rater is a no-op.
    pub fn consent(&self, rater: &str, timestamp: u64) -> Result<ConsentRecord, SurveyError> {
        validate_rater(rater)?;
        let mut consents = self.consents.write().expect("consent lock");
        if let Some(existing) = consents.get(rater) {
            return Ok(existing.clone());
        }
        let record = ConsentRecord {
            rater_id: rater.to_string(),
            version: CONSENT_VERSION.to_string(),
            timestamp,
        };
        let path = self.dir.join(CONSENTS_FILE);
        append_jsonl(&path, &record).map_err(|e| SurveyError::io(&path, e))?;
        consents.insert(rater.to_string(), record.clone());
        Ok(record)
    }

    pub fn has_consented(&self, rater: &str) -> bool {
        self.consents.read().expect("consent lock").contains_key(rater)
    }

    /// Validate against the survey and append. Ratings are immutable once stored.
    pub fn submit(
        &self,
        survey: &SurveyDefinition,
        submission: &RatingSubmission,
        timestamp: u64,
    ) -> Result<RatingRecord, SurveyError> {
        validate_rater(&submission.rater_id)?;
        if !self.has_consented(&submission.rater_id) {
            return Err(SurveyError::ConsentRequired(submission.rater_id.clone()));
        }
        let block = survey
            .block(&submission.block_id)
            .ok_or_else(|| SurveyError::UnknownBlock(submission.block_id.clone()))?;
        if !block.candidates.iter().any(|c| c.candidate_id == submission.candidate_id) {
            return Err(SurveyError::UnknownCandidate {
                block: submission.block_id.clone(),
                candidate: submission.candidate_id.clone(),
            });
        }
        let record = RatingRecord {
            rater_id: submission.rater_id.clone(),
            block_id: submission.block_id.clone(),
            candidate_id: submission.candidate_id.clone(),
            blame: check_scale("blame", submission.blame)?,
            similarity: check_scale("similarity", submission.similarity)?,
            timestamp,
        };
        let mut ratings = self.ratings.write().expect("ratings lock");
        let key = (record.rater_id.clone(), record.candidate_id.clone());
        if ratings.keys.contains(&key) {
            return Err(RatingError::Duplicate {
                rater_id: key.0,
                candidate_id: key.1,
            }
            .into());
        }
        let path = self.dir.join(RATINGS_FILE);
        append_jsonl(&path, &record).map_err(|e| SurveyError::io(&path, e))?;
        ratings.keys.insert(key);
        ratings.records.push(record.clone());
        Ok(record)
    }

    /// All ratings in submission order.
    pub fn export(&self) -> Vec<RatingRecord> {
        self.ratings.read().expect("ratings lock").records.clone()
    }

    pub fn ratings_of(&self, rater: &str) -> Vec<RatingRecord> {
        self.ratings
            .read()
            .expect("ratings lock")
            .records
            .iter()
            .filter(|r| r.rater_id == rater)
            .cloned()
            .collect()
    }
}

/// Ratings as TSV with a header row.
pub fn ratings_tsv(records: &[RatingRecord]) -> String {
    let mut out = String::from("rater_id\tblock_id\tcandidate_id\tblame\tsimilarity\ttimestamp\n");
    for r in records {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\n",
            r.rater_id, r.block_id, r.candidate_id, r.blame, r.similarity, r.timestamp
        ));
    }
    out
}
