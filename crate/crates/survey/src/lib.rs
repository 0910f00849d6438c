//! Human evaluation survey and curation service.
//!
//! Raters only ever see [`BlockView`]s, which have no system field; the
//! candidate-to-system key stays in the [`SurveyDefinition`] file on the server.

use std::path::Path;

use perspectra::eval::RatingError;
use perspectra::prompt::CurationError;

pub mod config;
pub mod definition;
pub mod http;
pub mod store;

/// Crate version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub use config::ServiceConfig;
pub use definition::{
    build_survey, sources_from_pairs, BlockView, BuildOptions, BuildReport, Candidate, CandidateView, SkippedSource,
    SurveyBlock, SurveyDefinition, SurveySource, DEFAULT_BLOCKS, DEFAULT_CANDIDATES, GOLD_SYSTEM,
};
pub use http::{router, serve, serve_blocking, AppState};
pub use store::{ConsentRecord, RatingSubmission, SurveyStore, CONSENT_TEXT, CONSENT_VERSION};

#[derive(Debug, thiserror::Error)]
pub enum SurveyError {
    #[error("invalid survey options: {0}")]
    InvalidOptions(String),
    #[error("no source has enough candidates")]
    NoEligibleSources,
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed data: {0}")]
    Format(String),
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Rating(#[from] RatingError),
    #[error("invalid rater id `{0}`")]
    InvalidRater(String),
    #[error("rater `{0}` has not given consent")]
    ConsentRequired(String),
    #[error("consent must be accepted")]
    ConsentDeclined,
    #[error("no block `{0}`")]
    UnknownBlock(String),
    #[error("block index {index} out of range (survey has {total})")]
    BlockIndex { index: usize, total: usize },
    #[error("candidate `{candidate}` is not in block `{block}`")]
    UnknownCandidate { block: String, candidate: String },
    #[error("curation is not enabled on this server")]
    CurationDisabled,
    #[error(transparent)]
    Curation(#[from] CurationError),
}

impl SurveyError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.display().to_string(),
            source,
        }
    }
}
