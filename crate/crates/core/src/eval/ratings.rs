use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::stats::{spearman, StatsError};

pub const SCALE_MAX: u8 = 10;

/// One rater's judgement of one candidate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatingRecord {
    pub rater_id: String,
    pub block_id: String,
    pub candidate_id: String,
    pub blame: u8,
    pub similarity: u8,
    pub timestamp: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RatingError {
    #[error("{field} must be within 0..={SCALE_MAX}, got {value}")]
    OutOfRange { field: &'static str, value: i64 },
    #[error("{0} must not be empty")]
    Empty(&'static str),
    #[error("rater `{rater_id}` already rated candidate `{candidate_id}`")]
    Duplicate { rater_id: String, candidate_id: String },
}

impl RatingRecord {
    pub fn validate(&self) -> Result<(), RatingError> {
        for (field, value) in [("rater_id", &self.rater_id), ("block_id", &self.block_id), ("candidate_id", &self.candidate_id)] {
            if value.trim().is_empty() {
                return Err(RatingError::Empty(field));
            }
        }
        check_scale("blame", i64::from(self.blame))?;
        check_scale("similarity", i64::from(self.similarity)).map(|_| ())
    }
}

pub fn check_scale(field: &'static str, value: i64) -> Result<u8, RatingError> {
    if (0..=i64::from(SCALE_MAX)).contains(&value) {
        Ok(value as u8)
    } else {
        Err(RatingError::OutOfRange { field, value })
    }
}

/// Reject any second rating of the same candidate by the same rater.
pub fn check_unique(records: &[RatingRecord]) -> Result<(), RatingError> {
    let mut seen = BTreeSet::new();
    for r in records {
        if !seen.insert((&r.rater_id, &r.candidate_id)) {
            return Err(RatingError::Duplicate {
                rater_id: r.rater_id.clone(),
                candidate_id: r.candidate_id.clone(),
            });
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    Blame,
    Similarity,
}

impl Scale {
    pub fn of(self, r: &RatingRecord) -> u8 {
        match self {
            Scale::Blame => r.blame,
            Scale::Similarity => r.similarity,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Scale::Blame => "blame",
            Scale::Similarity => "similarity",
        }
    }
}

/// Spearman agreement between two raters over the candidates both rated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementCell {
    pub rater_a: String,
    pub rater_b: String,
    pub scale: Scale,
    pub shared: usize,
    pub rho: Option<f64>,
    pub p_value: Option<f64>,
    /// Why rho is missing, when it is.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

pub fn agreement(records: &[RatingRecord], scale: Scale) -> Vec<AgreementCell> {
    let mut by_rater: BTreeMap<&str, BTreeMap<&str, f64>> = BTreeMap::new();
    for r in records {
        by_rater
            .entry(&r.rater_id)
            .or_default()
            .insert(&r.candidate_id, f64::from(scale.of(r)));
    }
    let raters: Vec<&str> = by_rater.keys().copied().collect();
    let mut cells = Vec::new();
    for (i, a) in raters.iter().enumerate() {
        for b in &raters[i + 1..] {
            let (ra, rb) = (&by_rater[a], &by_rater[b]);
            let (xs, ys): (Vec<f64>, Vec<f64>) = ra
                .iter()
                .filter_map(|(c, &x)| rb.get(c).map(|&y| (x, y)))
                .unzip();
            let (rho, p_value, note) = match spearman(&xs, &ys) {
                Ok(s) => (Some(s.rho), Some(s.p_value), None),
                Err(e @ (StatsError::TooShort(_) | StatsError::Constant)) => (None, None, Some(e.to_string())),
                Err(e) => unreachable!("paired values have equal length: {e}"),
            };
            cells.push(AgreementCell {
                rater_a: a.to_string(),
                rater_b: b.to_string(),
                scale,
                shared: xs.len(),
                rho,
                p_value,
                note,
            });
        }
    }
    cells
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HumanScores {
    pub perspective: f64,
    pub similarity: f64,
    pub ratings: usize,
}

/// Mean blame and similarity per system, using the server-side candidate key.
pub fn human_scores(
    records: &[RatingRecord],
    candidate_systems: &BTreeMap<String, String>,
) -> BTreeMap<String, HumanScores> {
    let mut acc: BTreeMap<&str, (f64, f64, usize)> = BTreeMap::new();
    for r in records {
        let Some(system) = candidate_systems.get(&r.candidate_id) else {
            log::warn!("rating for unknown candidate `{}` ignored", r.candidate_id);
            continue;
        };
        let e = acc.entry(system).or_default();
        e.0 += f64::from(r.blame);
        e.1 += f64::from(r.similarity);
        e.2 += 1;
    }
    acc.into_iter()
        .map(|(s, (b, m, n))| {
            (
                s.to_string(),
                HumanScores {
                    perspective: b / n as f64,
                    similarity: m / n as f64,
                    ratings: n,
                },
            )
        })
        .collect()
}
