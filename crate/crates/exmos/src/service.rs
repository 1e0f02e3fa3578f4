//! HTTP service: sessions, dashboards, configuration, steering and telemetry.
//!
//! Sessions live in memory. Each one is a serialized actor behind an async
//! mutex; reads go to a snapshot refreshed after every mutation, so they
//! never wait for a retrain. With a state directory, every session's history
//! journal and the shared telemetry journal are appended to disk and
//! replayed at startup.

use std::collections::BTreeMap;
use std::collections::hash_map::RandomState;
use std::hash::{BuildHasher, Hasher};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use exmos_core::analytics::{render_table, AnalyticsError, AttemptRecord, InteractionEvent};
use exmos_core::dataset::DataTable;
use exmos_core::explain::{ExplanationBundle, Variant};
use exmos_core::quality::{CorrectionOutcome, IssueKind, IssueReport, QualityLevel};
use exmos_core::steering::{
    AutoConfig, ConfigStep, ConfigVersion, JournalEntry, ManualConfig, SampleWarning, Session, SessionSettings,
    SteeringError,
};
use exmos_core::ModelMetrics;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::io::{append_lines, read_lines};
use crate::telemetry::{usage_summary, TelemetryRecord};

const HISTORY_SUFFIX: &str = ".history.jsonl";
const TELEMETRY_FILE: &str = "telemetry.jsonl";

pub struct ServiceConfig {
    pub table: DataTable,
    pub seed: u64,
    /// Where journals are written; `None` keeps everything in memory.
    pub state_dir: Option<PathBuf>,
}

#[derive(Clone)]
pub struct AppState(Arc<Shared>);

struct Shared {
    original: DataTable,
    seed: u64,
    state_dir: Option<PathBuf>,
    sessions: RwLock<BTreeMap<String, Arc<Slot>>>,
    telemetry: Mutex<Vec<TelemetryRecord>>,
}

struct Slot {
    id: String,
    session: Arc<tokio::sync::Mutex<Session>>,
    view: RwLock<Arc<View>>,
    last_event_ts: Mutex<u64>,
    persisted: AtomicUsize,
}

/// Read-side snapshot of a session.
struct View {
    variant: Variant,
    head: ConfigVersion,
    committed_id: u64,
    unsaved: bool,
    draft_steps: usize,
    history: Vec<VersionSummary>,
}

#[derive(Debug, Clone, Serialize)]
pub struct VersionSummary {
    pub version_id: u64,
    pub parent_id: Option<u64>,
    pub config_kind: &'static str,
    pub config: Vec<ConfigStep>,
    pub table_digest: String,
    pub metrics: ModelMetrics,
    pub quality_score: f64,
    pub quality_level: QualityLevel,
    pub created_at: u64,
    pub saved: bool,
}

impl From<&ConfigVersion> for VersionSummary {
    fn from(v: &ConfigVersion) -> Self {
        VersionSummary {
            version_id: v.version_id,
            parent_id: v.parent_id,
            config_kind: v.config_kind(),
            config: v.config.clone(),
            table_digest: v.table_digest.clone(),
            metrics: v.metrics,
            quality_score: v.quality.score,
            quality_level: v.quality.level,
            created_at: v.created_at,
            saved: v.saved,
        }
    }
}

impl View {
    fn of(s: &Session) -> Self {
        View {
            variant: s.variant(),
            head: s.head().clone(),
            committed_id: s.committed().version_id,
            unsaved: s.has_unsaved(),
            draft_steps: s.draft().len(),
            history: s.versions().iter().map(VersionSummary::from).collect(),
        }
    }
}

fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64)
}

fn new_session_id() -> String {
    let mut h = RandomState::new().build_hasher();
    h.write_u64(now_ms());
    format!("{:016x}", h.finish())
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: String,
    message: String,
    detail: Value,
    version_id: Option<u64>,
}

impl ApiError {
    fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        ApiError { status, code: code.into(), message: message.into(), detail: Value::Null, version_id: None }
    }

    fn at(mut self, version_id: u64) -> Self {
        self.version_id = Some(version_id);
        self
    }

    fn internal(e: impl std::fmt::Display) -> Self {
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "Internal", e.to_string())
    }

    fn steering(e: SteeringError, version_id: u64) -> Self {
        let status = match &e {
            SteeringError::UnknownFeature(_)
            | SteeringError::InvertedRange { .. }
            | SteeringError::RangeOnExcludedFeature(_)
            | SteeringError::EmptySelection => StatusCode::BAD_REQUEST,
            SteeringError::NothingToCorrect | SteeringError::NothingUnsaved => StatusCode::CONFLICT,
            SteeringError::UnknownVersion(_) => StatusCode::NOT_FOUND,
            _ => match e.code() {
                "NotCorrectable" => StatusCode::BAD_REQUEST,
                "AllRowsFiltered" | "DegenerateClass" | "EmptyTable" => StatusCode::UNPROCESSABLE_ENTITY,
                _ => StatusCode::INTERNAL_SERVER_ERROR,
            },
        };
        let detail = match &e {
            SteeringError::InvertedRange { feature, lower, upper } => {
                json!({ "feature": feature, "lower": lower, "upper": upper })
            }
            SteeringError::UnknownFeature(f) | SteeringError::RangeOnExcludedFeature(f) => json!({ "feature": f }),
            SteeringError::UnknownVersion(v) => json!({ "requested": v }),
            _ => Value::Null,
        };
        ApiError { status, code: e.code().into(), message: e.to_string(), detail, version_id: Some(version_id) }
    }

    fn analytics(e: AnalyticsError) -> Self {
        let code = match e {
            AnalyticsError::EmptyCohort => "EmptyCohort",
            AnalyticsError::NoAttempts => "NoAttempts",
            AnalyticsError::NoSuccesses => "NoSuccesses",
            AnalyticsError::InvalidEvent(_) => "InvalidEvent",
        };
        let status = match e {
            AnalyticsError::InvalidEvent(_) => StatusCode::BAD_REQUEST,
            _ => StatusCode::UNPROCESSABLE_ENTITY,
        };
        ApiError::new(status, code, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = json!({ "code": self.code, "message": self.message, "detail": self.detail });
        if let Some(v) = self.version_id {
            body["version_id"] = json!(v);
        }
        (self.status, Json(body)).into_response()
    }
}

type ApiResult = Result<Response, ApiError>;

fn parse_body<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "InvalidRequest", e.to_string()))
}

fn settings_for(variant: Variant, seed: u64) -> SessionSettings {
    SessionSettings::new(variant, seed)
}

impl AppState {
    /// Build the state, replaying any journals found in the state directory.
    pub fn new(config: ServiceConfig) -> Self {
        let shared = Shared {
            original: config.table.canonicalized(),
            seed: config.seed,
            state_dir: config.state_dir,
            sessions: RwLock::new(BTreeMap::new()),
            telemetry: Mutex::new(Vec::new()),
        };
        let state = AppState(Arc::new(shared));
        if let Some(dir) = state.0.state_dir.clone() {
            state.recover(&dir);
        }
        state
    }

    fn recover(&self, dir: &Path) {
        let telemetry = dir.join(TELEMETRY_FILE);
        if telemetry.exists() {
            match read_lines::<TelemetryRecord>(&telemetry) {
                Ok(records) => *self.0.telemetry.lock().expect("telemetry lock") = records,
                Err(e) => tracing::warn!("skipping telemetry journal: {e}"),
            }
        }
        let Ok(entries) = std::fs::read_dir(dir) else { return };
        for entry in entries.flatten() {
            let path = entry.path();
            let Some(id) = path.file_name().and_then(|n| n.to_str()).and_then(|n| n.strip_suffix(HISTORY_SUFFIX)) else {
                continue;
            };
            match self.replay_session(id, &path) {
                Ok(slot) => {
                    tracing::info!(session = id, versions = slot.view().history.len(), "recovered session");
                    self.0.sessions.write().expect("sessions lock").insert(id.to_string(), Arc::new(slot));
                }
                Err(e) => tracing::warn!(session = id, "skipping journal: {e}"),
            }
        }
    }

    fn replay_session(&self, id: &str, path: &Path) -> anyhow::Result<Slot> {
        let journal: Vec<JournalEntry> = read_lines(path)?;
        let Some(JournalEntry::Version(v0)) = journal.first() else {
            anyhow::bail!("journal does not start with version 0");
        };
        let settings = settings_for(v0.bundle.variant, self.0.seed);
        let session = Session::replay(id, self.0.original.clone(), settings, &journal, Box::new(now_ms))?;
        let last_ts = self
            .0
            .telemetry
            .lock()
            .expect("telemetry lock")
            .iter()
            .filter_map(|r| match r {
                TelemetryRecord::Event { session_id, event } if session_id == id => Some(event.timestamp),
                _ => None,
            })
            .max()
            .unwrap_or(0);
        Ok(Slot::new(id.to_string(), session, journal.len(), last_ts))
    }

    fn slot(&self, id: &str) -> Result<Arc<Slot>, ApiError> {
        self.0
            .sessions
            .read()
            .expect("sessions lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "UnknownSession", format!("no session `{id}`")))
    }

    fn history_path(&self, id: &str) -> Option<PathBuf> {
        self.0.state_dir.as_ref().map(|d| d.join(format!("{id}{HISTORY_SUFFIX}")))
    }

    fn record_telemetry(&self, record: TelemetryRecord) -> Result<(), ApiError> {
        let mut log = self.0.telemetry.lock().expect("telemetry lock");
        if let Some(dir) = &self.0.state_dir {
            append_lines(&dir.join(TELEMETRY_FILE), std::slice::from_ref(&record)).map_err(ApiError::internal)?;
        }
        log.push(record);
        Ok(())
    }

    /// Run one mutation on the session actor, then persist new journal
    /// entries and refresh the read snapshot.
    async fn mutate<T, F>(&self, id: &str, f: F) -> Result<(T, Arc<View>), ApiError>
    where
        T: Send + 'static,
        F: FnOnce(&mut Session) -> Result<T, SteeringError> + Send + 'static,
    {
        let slot = self.slot(id)?;
        let mut guard = slot.session.clone().lock_owned().await;
        let path = self.history_path(id);
        tokio::task::spawn_blocking(move || {
            let out = f(&mut guard).map_err(|e| ApiError::steering(e, guard.head().version_id))?;
            let journal = guard.journal();
            let done = slot.persisted.load(Ordering::SeqCst);
            if let Some(path) = path {
                append_lines(&path, &journal[done..]).map_err(ApiError::internal)?;
            }
            slot.persisted.store(journal.len(), Ordering::SeqCst);
            let view = Arc::new(View::of(&guard));
            *slot.view.write().expect("view lock") = view.clone();
            Ok((out, view))
        })
        .await
        .map_err(ApiError::internal)?
    }
}

impl Slot {
    fn new(id: String, session: Session, persisted: usize, last_event_ts: u64) -> Self {
        Slot {
            view: RwLock::new(Arc::new(View::of(&session))),
            id,
            session: Arc::new(tokio::sync::Mutex::new(session)),
            last_event_ts: Mutex::new(last_event_ts),
            persisted: AtomicUsize::new(persisted),
        }
    }

    fn view(&self) -> Arc<View> {
        self.view.read().expect("view lock").clone()
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}/dashboard", get(dashboard))
        .route("/sessions/{id}/config/manual", post(post_manual))
        .route("/sessions/{id}/config/auto", post(post_auto))
        .route("/sessions/{id}/retrain", post(post_retrain))
        .route("/sessions/{id}/save", post(post_save))
        .route("/sessions/{id}/discard", post(post_discard))
        .route("/sessions/{id}/revert/{version}", post(post_revert))
        .route("/sessions/{id}/history", get(history))
        .route("/sessions/{id}/events", post(post_event))
        .route("/analytics", get(analytics))
        .with_state(state)
}

/// Serve until Ctrl-C.
pub async fn serve(listener: tokio::net::TcpListener, state: AppState) -> std::io::Result<()> {
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

async fn health() -> Json<Value> {
    Json(json!({ "status": "ok" }))
}

#[derive(Deserialize)]
struct CreateSession {
    variant: String,
}

async fn create_session(State(state): State<AppState>, body: Bytes) -> ApiResult {
    let req: CreateSession = parse_body(&body)?;
    let variant: Variant = req
        .variant
        .parse()
        .map_err(|e: exmos_core::explain::UnknownVariant| ApiError::new(StatusCode::BAD_REQUEST, "InvalidVariant", e.to_string()))?;
    let id = new_session_id();
    let settings = settings_for(variant, state.0.seed);
    let original = state.0.original.clone();
    let sid = id.clone();
    let session = tokio::task::spawn_blocking(move || Session::with_clock(sid, original, settings, Box::new(now_ms)))
        .await
        .map_err(ApiError::internal)?
        .map_err(|e| ApiError::steering(e, 0))?;
    if let Some(path) = state.history_path(&id) {
        append_lines(&path, session.journal()).map_err(ApiError::internal)?;
    }
    let slot = Slot::new(id.clone(), session, 1, 0);
    let view = slot.view();
    state.0.sessions.write().expect("sessions lock").insert(id.clone(), Arc::new(slot));
    let body = json!({
        "session_id": id,
        "variant": variant,
        "version_id": view.head.version_id,
        "bundle": view.head.bundle,
    });
    Ok((StatusCode::CREATED, Json(body)).into_response())
}

#[derive(Serialize)]
struct Dashboard<'a> {
    session_id: &'a str,
    variant: Variant,
    version_id: u64,
    committed_id: u64,
    unsaved: bool,
    draft_steps: usize,
    bundle: &'a ExplanationBundle,
}

async fn dashboard(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> ApiResult {
    let slot = state.slot(&id)?;
    let view = slot.view();
    Ok(Json(Dashboard {
        session_id: &slot.id,
        variant: view.variant,
        version_id: view.head.version_id,
        committed_id: view.committed_id,
        unsaved: view.unsaved,
        draft_steps: view.draft_steps,
        bundle: &view.head.bundle,
    })
    .into_response())
}

async fn post_manual(State(state): State<AppState>, UrlPath(id): UrlPath<String>, body: Bytes) -> ApiResult {
    let cfg: ManualConfig = parse_body(&body)?;
    let ((rows_before, rows_after, features, warning), view) = state
        .mutate(&id, move |s| {
            let before = s.working_table().n_rows();
            let (t, w) = s.apply_manual(cfg)?;
            Ok((before, t.n_rows(), t.predictor_names(), w))
        })
        .await?;
    let warning: Option<SampleWarning> = warning;
    Ok(Json(json!({
        "version_id": view.head.version_id,
        "rows_before": rows_before,
        "rows_after": rows_after,
        "features": features,
        "warning": warning,
        "draft_steps": view.draft_steps,
    }))
    .into_response())
}

#[derive(Serialize)]
struct OutcomeView {
    kind: IssueKind,
    before: IssueReport,
    after: IssueReport,
    rows_removed: usize,
    rows_added: usize,
    features_removed: Vec<String>,
    rows_after: usize,
}

impl From<CorrectionOutcome> for OutcomeView {
    fn from(o: CorrectionOutcome) -> Self {
        OutcomeView {
            kind: o.kind,
            rows_after: o.table_after.n_rows(),
            before: o.before,
            after: o.after,
            rows_removed: o.rows_removed,
            rows_added: o.rows_added,
            features_removed: o.features_removed,
        }
    }
}

async fn post_auto(State(state): State<AppState>, UrlPath(id): UrlPath<String>, body: Bytes) -> ApiResult {
    let cfg: AutoConfig = parse_body(&body)?;
    let (outcomes, view) = state.mutate(&id, move |s| s.apply_auto(cfg)).await?;
    let outcomes: Vec<OutcomeView> = outcomes.into_iter().map(OutcomeView::from).collect();
    Ok(Json(json!({
        "version_id": view.head.version_id,
        "outcomes": outcomes,
        "draft_steps": view.draft_steps,
    }))
    .into_response())
}

async fn post_retrain(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> ApiResult {
    let ((version, attempt), view) = state
        .mutate(&id, |s| {
            let out = s.retrain()?;
            Ok((out.version.clone(), out.attempt))
        })
        .await?;
    let attempt: Option<AttemptRecord> = attempt;
    if let Some(a) = &attempt {
        state.record_telemetry(TelemetryRecord::Attempt(a.clone()))?;
    }
    Ok(Json(json!({
        "version_id": view.head.version_id,
        "version": version,
        "attempt": attempt,
    }))
    .into_response())
}

fn version_response(version: ConfigVersion, view: &View) -> Response {
    Json(json!({ "version_id": view.head.version_id, "version": version })).into_response()
}

async fn post_save(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> ApiResult {
    let (v, view) = state.mutate(&id, |s| s.save().cloned()).await?;
    Ok(version_response(v, &view))
}

async fn post_discard(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> ApiResult {
    let (v, view) = state.mutate(&id, |s| s.discard().cloned()).await?;
    Ok(version_response(v, &view))
}

async fn post_revert(State(state): State<AppState>, UrlPath((id, version)): UrlPath<(String, u64)>) -> ApiResult {
    let (v, view) = state.mutate(&id, move |s| s.revert_to(version).cloned()).await?;
    Ok(version_response(v, &view))
}

async fn history(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> ApiResult {
    let view = state.slot(&id)?.view();
    Ok(Json(json!({
        "version_id": view.head.version_id,
        "committed_id": view.committed_id,
        "versions": view.history,
    }))
    .into_response())
}

async fn post_event(State(state): State<AppState>, UrlPath(id): UrlPath<String>, body: Bytes) -> ApiResult {
    let slot = state.slot(&id)?;
    let version_id = slot.view().head.version_id;
    let event: InteractionEvent = parse_body(&body).map_err(|e| e.at(version_id))?;
    event.validate().map_err(|e| ApiError::analytics(e).at(version_id))?;
    {
        let mut last = slot.last_event_ts.lock().expect("event lock");
        if event.timestamp < *last {
            return Err(ApiError::new(
                StatusCode::BAD_REQUEST,
                "NonMonotoneTimestamp",
                format!("timestamp {} precedes {}", event.timestamp, *last),
            )
            .at(version_id));
        }
        *last = event.timestamp;
        state.record_telemetry(TelemetryRecord::Event { session_id: id, event })?;
    }
    Ok((StatusCode::ACCEPTED, Json(json!({ "version_id": version_id, "accepted": true }))).into_response())
}

#[derive(Deserialize)]
struct AnalyticsQuery {
    session_id: Option<String>,
}

async fn analytics(State(state): State<AppState>, Query(q): Query<AnalyticsQuery>) -> ApiResult {
    let mut records: Vec<TelemetryRecord> = state.0.telemetry.lock().expect("telemetry lock").clone();
    let mut cohort: Vec<String> = state.0.sessions.read().expect("sessions lock").keys().cloned().collect();
    if let Some(sid) = &q.session_id {
        state.slot(sid)?;
        cohort = vec![sid.clone()];
        records.retain(|r| match r {
            TelemetryRecord::Event { session_id, .. } => session_id == sid,
            TelemetryRecord::Attempt(a) => &a.session_id == sid,
        });
    }
    let summary = usage_summary(&records, &cohort).map_err(ApiError::analytics)?;
    Ok(Json(json!({ "summary": summary, "table": render_table(&summary) })).into_response())
}
