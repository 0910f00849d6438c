//! JSON endpoints for raters and curation annotators.

use std::path::Path;
use std::sync::{Arc, Mutex};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use perspectra::eval::{RatingError, RatingRecord};
use perspectra::prompt::{CurationError, CurationSession, SessionStore};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tower_http::services::ServeDir;

use crate::definition::{scales, ScaleView};
use crate::store::{ratings_tsv, unix_now, validate_rater, ConsentRecord, RatingSubmission, CONSENT_TEXT, CONSENT_VERSION};
use crate::{ServiceConfig, SurveyDefinition, SurveyError, SurveyStore};

#[derive(Clone)]
pub struct AppState {
    survey: Arc<SurveyDefinition>,
    store: Arc<SurveyStore>,
    sessions: Option<Arc<SessionStore>>,
    session_writer: Arc<Mutex<()>>,
}

impl AppState {
    pub fn new(survey: SurveyDefinition, store: SurveyStore, sessions: Option<SessionStore>) -> Self {
        Self {
            survey: Arc::new(survey),
            store: Arc::new(store),
            sessions: sessions.map(Arc::new),
            session_writer: Arc::new(Mutex::new(())),
        }
    }

    /// Load survey, journals and session store as described by `config`.
    pub fn from_config(config: &ServiceConfig) -> Result<Self, SurveyError> {
        let mut survey = SurveyDefinition::load(&config.survey)?;
        if let Some(seed) = config.seed {
            survey.seed = seed;
        }
        let store = SurveyStore::open(&config.data_dir)?;
        Ok(Self::new(survey, store, config.sessions_dir.clone().map(SessionStore::new)))
    }

    pub fn survey(&self) -> &SurveyDefinition {
        &self.survey
    }

    pub fn store(&self) -> &SurveyStore {
        &self.store
    }
}

struct ApiError(SurveyError);

impl From<SurveyError> for ApiError {
    fn from(e: SurveyError) -> Self {
        Self(e)
    }
}

impl From<CurationError> for ApiError {
    fn from(e: CurationError) -> Self {
        Self(e.into())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        use SurveyError as E;
        let (status, code) = match &self.0 {
            E::Rating(RatingError::Duplicate { .. }) => (StatusCode::CONFLICT, "conflict"),
            E::Rating(_)
            | E::InvalidRater(_)
            | E::InvalidOptions(_)
            | E::ConsentDeclined
            | E::UnknownCandidate { .. } => (StatusCode::UNPROCESSABLE_ENTITY, "validation"),
            E::ConsentRequired(_) => (StatusCode::FORBIDDEN, "consent_required"),
            E::UnknownBlock(_) | E::BlockIndex { .. } | E::CurationDisabled => (StatusCode::NOT_FOUND, "not_found"),
            E::Curation(CurationError::UnknownSession(_)) => (StatusCode::NOT_FOUND, "not_found"),
            E::Curation(CurationError::Storage(_)) => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
            E::Curation(_) => (StatusCode::UNPROCESSABLE_ENTITY, "validation"),
            E::Format(_) => (StatusCode::BAD_REQUEST, "bad_request"),
            E::NoEligibleSources | E::Io { .. } | E::Config(_) => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
        };
        if status.is_server_error() {
            log::error!("{}", self.0);
        }
        (status, Json(json!({ "error": { "code": code, "message": self.0.to_string() } }))).into_response()
    }
}

fn body<T>(payload: Result<Json<T>, JsonRejection>) -> Result<T, ApiError> {
    match payload {
        Ok(Json(v)) => Ok(v),
        Err(JsonRejection::JsonDataError(e)) => Err(SurveyError::InvalidOptions(e.body_text()).into()),
        Err(e) => Err(SurveyError::Format(e.body_text()).into()),
    }
}

#[derive(Serialize)]
struct ConsentInfo {
    version: &'static str,
    text: &'static str,
}

async fn get_consent() -> Json<ConsentInfo> {
    Json(ConsentInfo {
        version: CONSENT_VERSION,
        text: CONSENT_TEXT,
    })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ConsentRequest {
    rater_id: String,
    accepted: bool,
}

async fn post_consent(
    State(state): State<AppState>,
    payload: Result<Json<ConsentRequest>, JsonRejection>,
) -> Result<Json<ConsentRecord>, ApiError> {
    let req = body(payload)?;
    if !req.accepted {
        return Err(SurveyError::ConsentDeclined.into());
    }
    Ok(Json(state.store.consent(&req.rater_id, unix_now())?))
}

#[derive(Serialize)]
struct SurveyInfo {
    blocks: usize,
    candidates_per_block: usize,
    scales: Vec<ScaleView>,
}

async fn get_info(State(state): State<AppState>) -> Json<SurveyInfo> {
    Json(SurveyInfo {
        blocks: state.survey.blocks.len(),
        candidates_per_block: state.survey.n_candidates,
        scales: scales(),
    })
}

#[derive(Deserialize)]
struct RaterQuery {
    rater: String,
}

async fn get_block(
    State(state): State<AppState>,
    UrlPath(index): UrlPath<usize>,
    Query(q): Query<RaterQuery>,
) -> Result<Response, ApiError> {
    validate_rater(&q.rater)?;
    if !state.store.has_consented(&q.rater) {
        return Err(SurveyError::ConsentRequired(q.rater).into());
    }
    let view = state.survey.view(index, &q.rater).ok_or(SurveyError::BlockIndex {
        index,
        total: state.survey.blocks.len(),
    })?;
    Ok(Json(view).into_response())
}

async fn get_progress(
    State(state): State<AppState>,
    Query(q): Query<RaterQuery>,
) -> Result<Json<Vec<RatingRecord>>, ApiError> {
    validate_rater(&q.rater)?;
    Ok(Json(state.store.ratings_of(&q.rater)))
}

async fn post_rating(
    State(state): State<AppState>,
    payload: Result<Json<RatingSubmission>, JsonRejection>,
) -> Result<(StatusCode, Json<RatingRecord>), ApiError> {
    let sub = body(payload)?;
    let record = state.store.submit(&state.survey, &sub, unix_now())?;
    Ok((StatusCode::CREATED, Json(record)))
}

#[derive(Deserialize)]
struct ExportQuery {
    format: Option<String>,
}

async fn get_export(State(state): State<AppState>, Query(q): Query<ExportQuery>) -> Result<Response, ApiError> {
    let records = state.store.export();
    match q.format.as_deref() {
        None | Some("json") => Ok(Json(records).into_response()),
        Some("tsv") => Ok((
            [(header::CONTENT_TYPE, "text/tab-separated-values; charset=utf-8")],
            ratings_tsv(&records),
        )
            .into_response()),
        Some(other) => Err(SurveyError::InvalidOptions(format!("unknown export format `{other}`")).into()),
    }
}

#[derive(Serialize)]
struct SessionSummary {
    session_id: String,
    annotator: Option<String>,
    items: usize,
    missing: usize,
    complete: bool,
}

#[derive(Serialize)]
struct ItemView<'a> {
    index: usize,
    source: &'a str,
    candidates: &'a [String],
    selected: Option<usize>,
}

#[derive(Serialize)]
struct SessionView<'a> {
    session_id: &'a str,
    annotator: Option<&'a str>,
    definition: &'a str,
    adapted_prompt: &'a str,
    missing: usize,
    complete: bool,
    items: Vec<ItemView<'a>>,
}

fn session_json(s: &CurationSession) -> Response {
    Json(SessionView {
        session_id: &s.session_id,
        annotator: s.annotator.as_deref(),
        definition: &s.definition,
        adapted_prompt: &s.adapted_prompt,
        missing: s.missing(),
        complete: s.is_complete(),
        items: s
            .items
            .iter()
            .enumerate()
            .map(|(index, it)| ItemView {
                index,
                source: &it.source,
                candidates: &it.candidates,
                selected: it.selected,
            })
            .collect(),
    })
    .into_response()
}

fn sessions(state: &AppState) -> Result<&SessionStore, ApiError> {
    state.sessions.as_deref().ok_or(ApiError(SurveyError::CurationDisabled))
}

async fn list_sessions(State(state): State<AppState>) -> Result<Json<Vec<SessionSummary>>, ApiError> {
    let store = sessions(&state)?;
    let mut out = Vec::new();
    for id in store.list()? {
        let s = store.load(&id)?;
        out.push(SessionSummary {
            items: s.items.len(),
            missing: s.missing(),
            complete: s.is_complete(),
            session_id: s.session_id,
            annotator: s.annotator,
        });
    }
    Ok(Json(out))
}

async fn get_session(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> Result<Response, ApiError> {
    Ok(session_json(&sessions(&state)?.load(&id)?))
}

/// Pick a candidate by index, by exact text, or both (they must agree).
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SelectionRequest {
    item: usize,
    #[serde(default)]
    candidate: Option<usize>,
    #[serde(default)]
    text: Option<String>,
}

async fn post_selection(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
    payload: Result<Json<SelectionRequest>, JsonRejection>,
) -> Result<Response, ApiError> {
    let req = body(payload)?;
    let store = sessions(&state)?;
    let _writer = state.session_writer.lock().expect("session writer");
    let session = store.load(&id)?;
    let item = session.items.get(req.item).ok_or(CurationError::UnknownItem(req.item))?;
    let by_text = match &req.text {
        Some(text) => Some(item.candidates.iter().position(|c| c == text).ok_or_else(|| {
            SurveyError::InvalidOptions(format!("`{text}` is not a candidate for item {}", req.item))
        })?),
        None => None,
    };
    let candidate = match (req.candidate, by_text) {
        (Some(a), Some(b)) if a != b => {
            return Err(SurveyError::InvalidOptions("candidate index and text disagree".into()).into())
        }
        (Some(a), _) => a,
        (None, Some(b)) => b,
        (None, None) => return Err(SurveyError::InvalidOptions("give `candidate` or `text`".into()).into()),
    };
    let updated = store.record_selection(&id, req.item, candidate)?;
    Ok(session_json(&updated))
}

/// All API routes, plus the UI bundle under `/` when `static_dir` is given.
pub fn router(state: AppState, static_dir: Option<&Path>) -> Router {
    let api = Router::new()
        .route("/health", get(|| async { "ok" }))
        .route("/survey/consent", get(get_consent).post(post_consent))
        .route("/survey/info", get(get_info))
        .route("/survey/blocks/{index}", get(get_block))
        .route("/survey/progress", get(get_progress))
        .route("/survey/ratings", axum::routing::post(post_rating))
        .route("/survey/export", get(get_export))
        .route("/curation/sessions", get(list_sessions))
        .route("/curation/sessions/{id}", get(get_session))
        .route("/curation/sessions/{id}/selection", axum::routing::post(post_selection))
        .with_state(state);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

/// Bind and serve until Ctrl-C.
pub async fn serve(config: ServiceConfig) -> Result<(), SurveyError> {
    let state = AppState::from_config(&config)?;
    let addr = config.addr()?;
    let app = router(state, config.static_dir.as_deref());
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|e| SurveyError::Io {
            path: addr.to_string(),
            source: e,
        })?;
    log::info!("survey service listening on http://{addr}");
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| SurveyError::Io {
            path: addr.to_string(),
            source: e,
        })
}

/// [`serve`] on a fresh multi-threaded runtime, for synchronous callers.
pub fn serve_blocking(config: ServiceConfig) -> Result<(), SurveyError> {
    tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| SurveyError::io(Path::new("tokio runtime"), e))?
        .block_on(serve(config))
}
