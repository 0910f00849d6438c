use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::spec::{PromptSpec, EXPLAIN_QUESTION, REFERENCE_DEFINITION};
use super::PromptError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub prompt: String,
    pub max_tokens: usize,
    pub temperature: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionResponse {
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BackendError {
    #[error("backend timed out")]
    Timeout,
    #[error("backend refused the request: {0}")]
    Refusal(String),
    #[error("transport failure: {0}")]
    Transport(String),
}

/// Anything that completes a prompt.
pub trait CompletionBackend: Send + Sync {
    fn id(&self) -> String;
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, BackendError>;
}

impl<B: CompletionBackend + ?Sized> CompletionBackend for &B {
    fn id(&self) -> String {
        (**self).id()
    }

    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, BackendError> {
        (**self).complete(request)
    }
}

impl<B: CompletionBackend + ?Sized> CompletionBackend for Box<B> {
    fn id(&self) -> String {
        (**self).id()
    }

    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, BackendError> {
        (**self).complete(request)
    }
}

/// Deterministic offline backend.
///
/// Prompts ending in `High:` are answered with the last `Low:` sentence
/// followed by ` [REWRITTEN]`. Explanation prompts receive the configured
/// definition. Anything else is treated as zero-shot and its last line is
/// echoed with the same marker.
#[derive(Debug, Clone)]
pub struct StubBackend {
    pub definition: String,
    pub marker: String,
}

impl Default for StubBackend {
    fn default() -> Self {
        Self {
            definition: REFERENCE_DEFINITION.into(),
            marker: "[REWRITTEN]".into(),
        }
    }
}

impl StubBackend {
    pub fn with_definition(definition: impl Into<String>) -> Self {
        Self {
            definition: definition.into(),
            ..Self::default()
        }
    }
}

impl CompletionBackend for StubBackend {
    fn id(&self) -> String {
        "stub".into()
    }

    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, BackendError> {
        let prompt = request.prompt.trim_end();
        if prompt.ends_with(EXPLAIN_QUESTION) {
            return Ok(CompletionResponse {
                text: self.definition.clone(),
            });
        }
        let source = if prompt.ends_with("High:") {
            prompt
                .lines()
                .rev()
                .find_map(|l| l.strip_prefix("Low: ").or_else(|| l.strip_prefix("Low:")))
                .unwrap_or("")
        } else {
            prompt.lines().last().unwrap_or("")
        };
        Ok(CompletionResponse {
            text: format!(" {} {}", source.trim(), self.marker),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerationParams {
    pub max_tokens: usize,
    pub temperature: f64,
}

impl Default for GenerationParams {
    fn default() -> Self {
        Self {
            max_tokens: 256,
            temperature: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub attempts: u32,
    pub base_delay_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            attempts: 3,
            base_delay_ms: 500,
        }
    }
}

impl RetryPolicy {
    pub fn immediate(attempts: u32) -> Self {
        Self {
            attempts,
            base_delay_ms: 0,
        }
    }

    fn delay(&self, attempt: u32) -> Duration {
        Duration::from_millis(self.base_delay_ms.saturating_mul(1 << attempt.min(16)))
    }
}

/// One logged backend exchange.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JournalEntry {
    pub backend: String,
    pub version_tag: Option<String>,
    pub prompt: String,
    pub max_tokens: usize,
    pub temperature: f64,
    pub completion: String,
    pub output: String,
    pub latency_ms: u64,
    pub unix_time: u64,
}

/// Append-only JSONL log of every prompt and completion.
#[derive(Debug)]
pub struct Journal {
    path: PathBuf,
    lock: Mutex<()>,
}

impl Journal {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        Self {
            path: path.into(),
            lock: Mutex::new(()),
        }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&self, entry: &JournalEntry) -> Result<(), PromptError> {
        let _guard = self.lock.lock().unwrap_or_else(|p| p.into_inner());
        crate::io::append_jsonl(&self.path, entry)
            .map_err(|e| PromptError::Storage(e.to_string()))
    }

    pub fn entries(&self) -> Result<Vec<JournalEntry>, PromptError> {
        crate::io::read_jsonl(&self.path).map_err(|e| PromptError::Storage(e.to_string()))
    }
}

/// Remove an echoed prompt and surrounding whitespace from a completion.
pub fn clean_completion(prompt: &str, completion: &str) -> String {
    let body = completion.strip_prefix(prompt).unwrap_or(completion);
    body.trim().to_string()
}

pub struct Rewriter<'a, B: CompletionBackend> {
    backend: &'a B,
    pub params: GenerationParams,
    pub retry: RetryPolicy,
    journal: Option<&'a Journal>,
}

impl<'a, B: CompletionBackend> Rewriter<'a, B> {
    pub fn new(backend: &'a B) -> Self {
        Self {
            backend,
            params: GenerationParams::default(),
            retry: RetryPolicy::default(),
            journal: None,
        }
    }

    pub fn with_journal(mut self, journal: &'a Journal) -> Self {
        self.journal = Some(journal);
        self
    }

    pub fn with_params(mut self, params: GenerationParams) -> Self {
        self.params = params;
        self
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    /// Send a raw prompt, retrying transient failures, and return the cleaned output.
    pub fn complete(&self, prompt: &str, version_tag: Option<&str>) -> Result<String, PromptError> {
        let request = CompletionRequest {
            prompt: prompt.to_string(),
            max_tokens: self.params.max_tokens,
            temperature: self.params.temperature,
        };
        let attempts = self.retry.attempts.max(1);
        let mut last = None;
        for attempt in 0..attempts {
            if attempt > 0 {
                std::thread::sleep(self.retry.delay(attempt - 1));
            }
            let start = Instant::now();
            match self.backend.complete(&request) {
                Ok(resp) => {
                    let output = clean_completion(prompt, &resp.text);
                    if let Some(journal) = self.journal {
                        journal.append(&JournalEntry {
                            backend: self.backend.id(),
                            version_tag: version_tag.map(str::to_string),
                            prompt: prompt.to_string(),
                            max_tokens: request.max_tokens,
                            temperature: request.temperature,
                            completion: resp.text.clone(),
                            output: output.clone(),
                            latency_ms: start.elapsed().as_millis() as u64,
                            unix_time: SystemTime::now()
                                .duration_since(UNIX_EPOCH)
                                .map(|d| d.as_secs())
                                .unwrap_or(0),
                        })?;
                    }
                    if output.is_empty() {
                        return Err(PromptError::EmptyCompletion);
                    }
                    return Ok(output);
                }
                Err(e) => {
                    log::warn!("backend {} attempt {} failed: {e}", self.backend.id(), attempt + 1);
                    last = Some(e);
                }
            }
        }
        Err(PromptError::Backend {
            attempts,
            source: last.unwrap_or(BackendError::Timeout),
        })
    }

    pub fn rewrite(&self, spec: &PromptSpec, source: &str) -> Result<String, PromptError> {
        let prompt = spec.build(source)?;
        self.complete(&prompt, Some(&spec.version_tag))
    }

    /// Rewrite many sources concurrently; results keep input order.
    pub fn rewrite_all(&self, spec: &PromptSpec, sources: &[String]) -> Vec<Result<String, PromptError>> {
        spec.validate().map(|_| ()).map_or_else(
            |e| sources.iter().map(|_| Err(e.clone())).collect(),
            |_| sources.par_iter().map(|s| self.rewrite(spec, s)).collect(),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayMismatch {
    pub index: usize,
    pub expected: String,
    pub actual: String,
}

/// Re-issue every journaled prompt against `backend` and report completions that differ.
pub fn replay_journal<B: CompletionBackend>(
    journal: &Journal,
    backend: &B,
) -> Result<Vec<ReplayMismatch>, PromptError> {
    let mut mismatches = Vec::new();
    for (index, entry) in journal.entries()?.into_iter().enumerate() {
        let request = CompletionRequest {
            prompt: entry.prompt.clone(),
            max_tokens: entry.max_tokens,
            temperature: entry.temperature,
        };
        let actual = backend
            .complete(&request)
            .map_err(|source| PromptError::Backend { attempts: 1, source })?
            .text;
        if actual != entry.completion {
            mismatches.push(ReplayMismatch {
                index,
                expected: entry.completion,
                actual,
            });
        }
    }
    Ok(mismatches)
}
