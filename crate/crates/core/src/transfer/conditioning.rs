use serde::{Deserialize, Serialize};

use crate::corpus::{CaseRecord, SentenceRecord};

pub const DEFAULT_SEPARATOR: &str = " --- ";

/// Where the event metadata goes relative to the sentence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditioningOrder {
    #[default]
    Plain,
    SourceMeta,
    MetaSource,
}

/// A sentence plus the metadata values it may be conditioned on.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConditionedInput {
    pub text: String,
    /// victim, perpetrator, relationship, weapon, town, place
    pub meta_values: Vec<String>,
    pub order: ConditioningOrder,
    pub separator: String,
}

impl ConditionedInput {
    pub fn new(text: impl Into<String>, case: &CaseRecord, order: ConditioningOrder) -> Self {
        Self {
            text: text.into(),
            meta_values: case.meta_values().iter().map(|v| v.to_string()).collect(),
            order,
            separator: DEFAULT_SEPARATOR.to_owned(),
        }
    }

    /// Values only, never property names; empty values are dropped with their comma.
    pub fn meta_block(&self) -> String {
        self.meta_values
            .iter()
            .map(|v| v.trim())
            .filter(|v| !v.is_empty())
            .collect::<Vec<_>>()
            .join(", ")
    }

    pub fn render(&self) -> String {
        let meta = self.meta_block();
        if meta.is_empty() {
            return self.text.clone();
        }
        match self.order {
            ConditioningOrder::Plain => self.text.clone(),
            ConditioningOrder::SourceMeta => format!("{}{}{}", self.text, self.separator, meta),
            ConditioningOrder::MetaSource => format!("{}{}{}", meta, self.separator, self.text),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("sentence `{sentence}` belongs to case `{expected}`, not `{got}`")]
pub struct CaseMismatch {
    pub sentence: String,
    pub expected: String,
    pub got: String,
}

/// Render a corpus sentence with its case metadata in the requested order.
pub fn render_conditioned_input(
    sentence: &SentenceRecord,
    case: &CaseRecord,
    order: ConditioningOrder,
    separator: &str,
) -> Result<String, CaseMismatch> {
    if sentence.case_id != case.case_id {
        return Err(CaseMismatch {
            sentence: sentence.sentence_id.clone(),
            expected: sentence.case_id.clone(),
            got: case.case_id.clone(),
        });
    }
    let mut input = ConditionedInput::new(sentence.text.clone(), case, order);
    input.separator = separator.to_owned();
    Ok(input.render())
}
