//! Prompt-based rewriting through a pluggable completion backend.

mod backend;
mod curation;
#[cfg(feature = "live-backend")]
mod live;
mod spec;

pub use backend::{
    clean_completion, replay_journal, BackendError, CompletionBackend, CompletionRequest,
    CompletionResponse, GenerationParams, Journal, JournalEntry, ReplayMismatch, RetryPolicy,
    Rewriter, StubBackend,
};
pub use curation::{generate_definition, CurationError, CurationSession, SessionStore, DEFAULT_CANDIDATES};
#[cfg(feature = "live-backend")]
pub use live::HttpBackend;
pub use spec::{
    build_prompt, explain_prompt, sample_examples, ExamplePair, PromptMode, PromptSpec,
    DEFAULT_FEW_SHOT, EXPLAIN_QUESTION, NAIVE_FEW_INSTRUCTION, NAIVE_FEW_QUERY_PREAMBLE,
    NAIVE_ZERO_INSTRUCTION, REFERENCE_DEFINITION,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PromptError {
    #[error("invalid prompt spec: {0}")]
    InvalidSpec(String),
    #[error("backend failed after {attempts} attempt(s): {source}")]
    Backend {
        attempts: u32,
        #[source]
        source: BackendError,
    },
    #[error("backend returned an empty completion")]
    EmptyCompletion,
    #[error("storage: {0}")]
    Storage(String),
}
