//! Cases, sentences and perception annotations.
//!
//! A [`CorpusStore`] is built once (from JSONL or in memory), validated for
//! referential integrity, and read-only afterwards.

mod store;
mod zscore;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use store::{CorpusError, CorpusFormat, CorpusStore, RecordCounts};
pub use zscore::{z_normalize, ZScoreError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseType {
    Femicide,
    OtherGbv,
}

/// One gender-based-violence case and the event metadata attached to it.
///
/// Unknown metadata is an empty string, never absent.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseRecord {
    pub case_id: String,
    pub case_type: CaseType,
    pub victim_name: String,
    pub perpetrator_name: String,
    pub relationship: String,
    pub weapon: String,
    pub location_town: String,
    pub location_place: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub date: Option<String>,
}

impl CaseRecord {
    /// Metadata values in conditioning order: victim, perpetrator,
    /// relationship, weapon, town, place.
    pub fn meta_values(&self) -> [&str; 6] {
        [
            &self.victim_name,
            &self.perpetrator_name,
            &self.relationship,
            &self.weapon,
            &self.location_town,
            &self.location_place,
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SentenceRecord {
    pub sentence_id: String,
    pub case_id: String,
    pub article_id: String,
    pub text: String,
    pub language: String,
}

/// Perception dimension. The three named dimensions are the ones with
/// published regressor quality; any other label is carried through as-is.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "String", into = "String")]
pub enum Dimension {
    BlameMurderer,
    HumanCause,
    FocusMurderer,
    Other(String),
}

impl Dimension {
    pub const NAMED: [Dimension; 3] = [
        Dimension::BlameMurderer,
        Dimension::HumanCause,
        Dimension::FocusMurderer,
    ];

    pub fn as_str(&self) -> &str {
        match self {
            Dimension::BlameMurderer => "blame_murderer",
            Dimension::HumanCause => "human_cause",
            Dimension::FocusMurderer => "focus_murderer",
            Dimension::Other(name) => name,
        }
    }

    /// Column label used in report tables.
    pub fn label(&self) -> &str {
        match self {
            Dimension::BlameMurderer => "blames the murderer",
            Dimension::HumanCause => "caused by a human",
            Dimension::FocusMurderer => "focuses on the murderer",
            Dimension::Other(name) => name,
        }
    }
}

impl From<String> for Dimension {
    fn from(value: String) -> Self {
        match value.as_str() {
            "blame_murderer" => Dimension::BlameMurderer,
            "human_cause" => Dimension::HumanCause,
            "focus_murderer" => Dimension::FocusMurderer,
            _ => Dimension::Other(value),
        }
    }
}

impl From<Dimension> for String {
    fn from(value: Dimension) -> Self {
        value.as_str().to_owned()
    }
}

impl std::str::FromStr for Dimension {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(Dimension::from(s.replace('-', "_")))
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Gold,
    Silver,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerceptionScore {
    pub sentence_id: String,
    pub dimension: Dimension,
    pub value: f64,
    pub provenance: Provenance,
}

/// One line of the corpus JSONL format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CorpusRecord {
    Case(CaseRecord),
    Sentence(SentenceRecord),
    Score(PerceptionScore),
}
