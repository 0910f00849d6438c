use std::path::Path;

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::PromptError;

/// Zero-shot instruction ("rewrite the sentence focusing on the culprit").
pub const NAIVE_ZERO_INSTRUCTION: &str = "Riscrivi la frase concentrandoti sul colpevole";

/// Few-shot instruction placed before the example pairs.
pub const NAIVE_FEW_INSTRUCTION: &str = "Riscrivi le seguenti frasi da low ad high. Per high si intende che la colpa è attribuita interamente al killer. Ecco alcuni esempi:";

/// Line between the example pairs and the sentence to rewrite.
pub const NAIVE_FEW_QUERY_PREAMBLE: &str = "Riscrivi la seguente frase:";

/// Task definition obtained by asking the model to explain gold pairs,
/// kept as a reference fixture.
pub const REFERENCE_DEFINITION: &str = "Le frasi precedute dall'etichetta \"Low:\" tendono ad essere più brevi e non danno la colpa esplicita all'assassino, mentre le frasi precedute dall'etichetta \"High:\" tendono ad essere più dirette e a dare la colpa all'assassino.";

/// Question appended to labelled gold pairs to elicit a task definition.
pub const EXPLAIN_QUESTION: &str = "Spiega le differenze tra le frasi precedute dall'etichetta \"Low:\" e le frasi precedute dall'etichetta \"High:\".";

pub const DEFAULT_FEW_SHOT: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptMode {
    NaiveZero,
    NaiveFew,
    Iter,
}

impl std::str::FromStr for PromptMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.replace('_', "-").as_str() {
            "naive-zero" | "na-zero" | "zero" => Ok(PromptMode::NaiveZero),
            "naive-few" | "na-few" | "few" => Ok(PromptMode::NaiveFew),
            "iter" => Ok(PromptMode::Iter),
            other => Err(format!("unknown prompt mode `{other}` (naive-zero, naive-few, iter)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExamplePair {
    pub low: String,
    pub high: String,
}

impl From<(String, String)> for ExamplePair {
    fn from((low, high): (String, String)) -> Self {
        Self { low, high }
    }
}

/// A fully materialized prompt template.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptSpec {
    pub mode: PromptMode,
    pub instruction: String,
    #[serde(default)]
    pub examples: Vec<ExamplePair>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub query_preamble: Option<String>,
    #[serde(default = "default_low_label")]
    pub low_label: String,
    #[serde(default = "default_high_label")]
    pub high_label: String,
    pub version_tag: String,
}

fn default_low_label() -> String {
    "Low:".into()
}

fn default_high_label() -> String {
    "High:".into()
}

impl PromptSpec {
    pub fn naive_zero() -> Self {
        Self {
            mode: PromptMode::NaiveZero,
            instruction: NAIVE_ZERO_INSTRUCTION.into(),
            examples: Vec::new(),
            query_preamble: None,
            low_label: default_low_label(),
            high_label: default_high_label(),
            version_tag: "naive-zero/v1".into(),
        }
    }

    pub fn naive_few(examples: Vec<ExamplePair>) -> Self {
        Self {
            mode: PromptMode::NaiveFew,
            instruction: NAIVE_FEW_INSTRUCTION.into(),
            examples,
            query_preamble: Some(NAIVE_FEW_QUERY_PREAMBLE.into()),
            low_label: default_low_label(),
            high_label: default_high_label(),
            version_tag: "naive-few/v1".into(),
        }
    }

    pub fn validate(&self) -> Result<(), PromptError> {
        match (self.mode, self.examples.len()) {
            (PromptMode::NaiveZero, 0) => Ok(()),
            (PromptMode::NaiveZero, n) => Err(PromptError::InvalidSpec(format!(
                "naive-zero prompt must not carry examples, found {n}"
            ))),
            (_, 0) => Err(PromptError::InvalidSpec(format!(
                "{:?} prompt needs at least one example pair",
                self.mode
            ))),
            _ if self.instruction.trim().is_empty() => {
                Err(PromptError::InvalidSpec("instruction is empty".into()))
            }
            _ => Ok(()),
        }
    }

    /// Render the prompt for `source`.
    pub fn build(&self, source: &str) -> Result<String, PromptError> {
        self.validate()?;
        let mut out = String::new();
        out.push_str(&self.instruction);
        out.push('\n');
        if self.mode == PromptMode::NaiveZero {
            out.push_str(source);
            return Ok(out);
        }
        for ex in &self.examples {
            out.push_str(&format!("{} {}\n{} {}\n", self.low_label, ex.low, self.high_label, ex.high));
        }
        if let Some(pre) = &self.query_preamble {
            out.push_str(pre);
            out.push('\n');
        }
        out.push_str(&format!("{} {}\n{}", self.low_label, source, self.high_label));
        Ok(out)
    }

    pub fn save(&self, path: &Path) -> Result<(), PromptError> {
        let text = serde_json::to_string_pretty(self).map_err(|e| PromptError::Storage(e.to_string()))?;
        crate::io::write_atomic(path, text.as_bytes()).map_err(|e| PromptError::Storage(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, PromptError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PromptError::Storage(format!("{}: {e}", path.display())))?;
        let spec: Self = serde_json::from_str(&text)
            .map_err(|e| PromptError::Storage(format!("{}: {e}", path.display())))?;
        spec.validate()?;
        Ok(spec)
    }
}

/// Render a prompt; see [`PromptSpec::build`].
pub fn build_prompt(spec: &PromptSpec, source: &str) -> Result<String, PromptError> {
    spec.build(source)
}

/// Draw `k` distinct pairs (or all of them when fewer exist), keeping the pool's order.
pub fn sample_examples<R: Rng>(pool: &[ExamplePair], k: usize, rng: &mut R) -> Vec<ExamplePair> {
    let k = k.min(pool.len());
    let mut idx = sample(rng, pool.len(), k).into_vec();
    idx.sort_unstable();
    idx.into_iter().map(|i| pool[i].clone()).collect()
}

/// Prompt asking the model to explain what separates the low and high sentences.
pub fn explain_prompt(pairs: &[ExamplePair]) -> String {
    let mut out = String::new();
    for p in pairs {
        out.push_str(&format!("Low: {}\nHigh: {}\n", p.low, p.high));
    }
    out.push_str(EXPLAIN_QUESTION);
    out
}
