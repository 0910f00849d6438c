use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::backend::{CompletionBackend, Rewriter};
use super::spec::{explain_prompt, ExamplePair, PromptMode, PromptSpec, NAIVE_ZERO_INSTRUCTION};
use super::PromptError;

pub const DEFAULT_CANDIDATES: usize = 3;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CurationError {
    #[error("at least 2 gold pairs are needed, got {0}")]
    InsufficientPairs(usize),
    #[error("no source sentence at index {0}")]
    UnknownItem(usize),
    #[error("candidate {candidate} is not among the {available} generated for item {item}")]
    NotACandidate { item: usize, candidate: usize, available: usize },
    #[error("session incomplete: {missing} source(s) lack a selected rewrite")]
    Incomplete { missing: usize },
    #[error("invalid session id `{0}`")]
    InvalidId(String),
    #[error("unknown session `{0}`")]
    UnknownSession(String),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error("storage: {0}")]
    Storage(String),
}

/// Ask the backend to explain the difference between labelled gold pairs.
pub fn generate_definition<B: CompletionBackend>(
    pairs: &[ExamplePair],
    rewriter: &Rewriter<'_, B>,
) -> Result<String, CurationError> {
    if pairs.len() < 2 {
        return Err(CurationError::InsufficientPairs(pairs.len()));
    }
    Ok(rewriter.complete(&explain_prompt(pairs), None)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurationItem {
    pub source: String,
    #[serde(default)]
    pub candidates: Vec<String>,
    #[serde(default)]
    pub selected: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurationSession {
    pub session_id: String,
    #[serde(default)]
    pub annotator: Option<String>,
    pub gold_pairs: Vec<ExamplePair>,
    pub definition: String,
    pub adapted_prompt: String,
    pub items: Vec<CurationItem>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SelectionEvent {
    item: usize,
    candidate: usize,
}

impl CurationSession {
    /// Generate a definition from `gold_pairs` and open a session over `sources`.
    ///
    /// The adapted prompt starts as the definition followed by the zero-shot
    /// instruction and may be edited before candidates are generated.
    pub fn start<B: CompletionBackend>(
        session_id: impl Into<String>,
        gold_pairs: Vec<ExamplePair>,
        sources: Vec<String>,
        rewriter: &Rewriter<'_, B>,
    ) -> Result<Self, CurationError> {
        let session_id = session_id.into();
        validate_id(&session_id)?;
        let definition = generate_definition(&gold_pairs, rewriter)?;
        let adapted_prompt = format!("{definition}\n{NAIVE_ZERO_INSTRUCTION}");
        Ok(Self {
            session_id,
            annotator: None,
            gold_pairs,
            definition,
            adapted_prompt,
            items: sources
                .into_iter()
                .map(|source| CurationItem {
                    source,
                    candidates: Vec::new(),
                    selected: None,
                })
                .collect(),
        })
    }

    pub fn zero_shot_spec(&self) -> PromptSpec {
        PromptSpec {
            mode: PromptMode::NaiveZero,
            instruction: self.adapted_prompt.clone(),
            examples: Vec::new(),
            query_preamble: None,
            low_label: "Low:".into(),
            high_label: "High:".into(),
            version_tag: format!("curation/{}", self.session_id),
        }
    }

    /// Generate `per_source` candidate rewrites for every source. Clears earlier selections.
    pub fn curate<B: CompletionBackend>(
        &mut self,
        rewriter: &Rewriter<'_, B>,
        per_source: usize,
    ) -> Result<(), CurationError> {
        let spec = self.zero_shot_spec();
        for item in &mut self.items {
            item.candidates = (0..per_source)
                .map(|_| rewriter.rewrite(&spec, &item.source))
                .collect::<Result<_, _>>()?;
            item.selected = None;
        }
        Ok(())
    }

    pub fn select(&mut self, item: usize, candidate: usize) -> Result<(), CurationError> {
        let entry = self.items.get_mut(item).ok_or(CurationError::UnknownItem(item))?;
        if candidate >= entry.candidates.len() {
            return Err(CurationError::NotACandidate {
                item,
                candidate,
                available: entry.candidates.len(),
            });
        }
        entry.selected = Some(candidate);
        Ok(())
    }

    pub fn missing(&self) -> usize {
        self.items.iter().filter(|i| i.selected.is_none()).count()
    }

    pub fn is_complete(&self) -> bool {
        self.missing() == 0
    }

    /// Emit an iterative prompt using each source and its chosen rewrite as an example.
    pub fn emit(&self, version_tag: impl Into<String>) -> Result<PromptSpec, CurationError> {
        if !self.is_complete() || self.items.is_empty() {
            return Err(CurationError::Incomplete { missing: self.missing() });
        }
        let examples = self
            .items
            .iter()
            .map(|i| ExamplePair {
                low: i.source.clone(),
                high: i.candidates[i.selected.expect("complete")].clone(),
            })
            .collect();
        let spec = PromptSpec {
            mode: PromptMode::Iter,
            instruction: self.adapted_prompt.clone(),
            examples,
            query_preamble: None,
            low_label: "Low:".into(),
            high_label: "High:".into(),
            version_tag: version_tag.into(),
        };
        spec.validate()?;
        Ok(spec)
    }
}

fn validate_id(id: &str) -> Result<(), CurationError> {
    let ok = !id.is_empty()
        && id.len() <= 128
        && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_');
    if ok {
        Ok(())
    } else {
        Err(CurationError::InvalidId(id.to_string()))
    }
}

/// Session files on disk. Selections go to an append-only journal that is
/// replayed over the session snapshot on load.
#[derive(Debug, Clone)]
pub struct SessionStore {
    dir: PathBuf,
}

impl SessionStore {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn snapshot_path(&self, id: &str) -> PathBuf {
        self.dir.join(format!("{id}.json"))
    }

    fn journal_path(&self, id: &str) -> PathBuf {
        self.dir.join(format!("{id}.selections.jsonl"))
    }

    /// Write a snapshot and discard any journaled selections it supersedes.
    pub fn save(&self, session: &CurationSession) -> Result<(), CurationError> {
        validate_id(&session.session_id)?;
        let text = serde_json::to_vec_pretty(session).map_err(|e| CurationError::Storage(e.to_string()))?;
        crate::io::write_atomic(&self.snapshot_path(&session.session_id), &text)
            .map_err(|e| CurationError::Storage(e.to_string()))?;
        let journal = self.journal_path(&session.session_id);
        if journal.exists() {
            std::fs::remove_file(&journal).map_err(|e| CurationError::Storage(e.to_string()))?;
        }
        Ok(())
    }

    pub fn load(&self, id: &str) -> Result<CurationSession, CurationError> {
        validate_id(id)?;
        let path = self.snapshot_path(id);
        let text = match std::fs::read(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(CurationError::UnknownSession(id.to_string()))
            }
            Err(e) => return Err(CurationError::Storage(e.to_string())),
        };
        let mut session: CurationSession =
            serde_json::from_slice(&text).map_err(|e| CurationError::Storage(e.to_string()))?;
        let events: Vec<SelectionEvent> = crate::io::read_jsonl(&self.journal_path(id))
            .map_err(|e| CurationError::Storage(e.to_string()))?;
        for ev in events {
            session.select(ev.item, ev.candidate)?;
        }
        Ok(session)
    }

    /// Validate and journal a selection, returning the updated session.
    pub fn record_selection(&self, id: &str, item: usize, candidate: usize) -> Result<CurationSession, CurationError> {
        let mut session = self.load(id)?;
        session.select(item, candidate)?;
        crate::io::append_jsonl(&self.journal_path(id), &SelectionEvent { item, candidate })
            .map_err(|e| CurationError::Storage(e.to_string()))?;
        Ok(session)
    }

    pub fn list(&self) -> Result<Vec<String>, CurationError> {
        let entries = match std::fs::read_dir(&self.dir) {
            Ok(e) => e,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(CurationError::Storage(e.to_string())),
        };
        let mut ids: Vec<String> = entries
            .filter_map(|e| e.ok())
            .filter_map(|e| {
                let name = e.file_name().into_string().ok()?;
                let id = name.strip_suffix(".json")?;
                validate_id(id).ok().map(|_| id.to_string())
            })
            .collect();
        ids.sort();
        Ok(ids)
    }
}
