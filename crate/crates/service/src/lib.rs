//! HTTP API over design sessions.
//!
//! Sessions live on disk under the artifacts directory and are reloaded on
//! every request, so a restarted server answers reads for old sessions.
//! At most one turn runs per session; a second one gets 409.

use std::collections::{HashMap, HashSet};
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tower_http::services::ServeDir;
use wirespec::devicespec::DeviceSpec;
use wirespec::erc::ErcReport;
use wirespec::export::{export, Format};
use wirespec::llmgateway::{open_provider, CompletionProvider, GatewayError, GenerationParams, ProvidersFile};
use wirespec::partsdb::KnowledgeBase;
use wirespec::pipeline::{Generator, Limits, PipelineError, PromptTemplate, Session, SessionStore, Termination, TurnKind};
use wirespec::specparser::ParseDiagnostic;

const SESSION_CONFIG: &str = "service.json";

pub struct ServiceConfig {
    pub artifacts: PathBuf,
    pub kb: KnowledgeBase,
    pub template: PromptTemplate,
    pub providers: Option<ProvidersFile>,
    pub limits: Limits,
    pub params: GenerationParams,
    /// Static bundle served at `/` when set.
    pub ui_dir: Option<PathBuf>,
    named: HashMap<String, Arc<dyn CompletionProvider>>,
}

impl ServiceConfig {
    pub fn new(artifacts: impl Into<PathBuf>, kb: KnowledgeBase) -> Self {
        ServiceConfig {
            artifacts: artifacts.into(),
            kb,
            template: PromptTemplate::bundled(),
            providers: None,
            limits: Limits::default(),
            params: GenerationParams::default(),
            ui_dir: None,
            named: HashMap::new(),
        }
    }

    /// Makes an in-process provider selectable by `name` when creating a
    /// session. Checked before the `replay:`/`live:`/`record:` forms.
    pub fn register_provider(mut self, name: impl Into<String>, p: Arc<dyn CompletionProvider>) -> Self {
        self.named.insert(name.into(), p);
        self
    }
}

struct AppState {
    cfg: ServiceConfig,
    store: SessionStore,
    busy: Mutex<HashSet<String>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct SessionConfig {
    provider: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    template: Option<String>,
}

#[derive(Debug)]
pub enum ApiError {
    NotFound(String),
    Busy(String),
    BadRequest(String),
    Unprocessable { error: &'static str, message: String, diagnostics: Vec<ParseDiagnostic> },
    Provider(String),
    Internal(String),
}

impl ApiError {
    fn unprocessable(error: &'static str, message: impl Into<String>) -> Self {
        ApiError::Unprocessable { error, message: message.into(), diagnostics: Vec::new() }
    }
}

impl From<PipelineError> for ApiError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::UnknownSession(id) => ApiError::NotFound(format!("unknown session {id:?}")),
            PipelineError::NoBaseSpec => ApiError::unprocessable("no_base_spec", e.to_string()),
            PipelineError::ParseFailure { diagnostics } => ApiError::Unprocessable {
                error: "parse_failure",
                message: "no round produced a parsable device spec".into(),
                diagnostics,
            },
            PipelineError::Provider(g) => ApiError::Provider(g.to_string()),
            PipelineError::Template(m) => ApiError::unprocessable("template", m),
            other => ApiError::Internal(other.to_string()),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, body) = match self {
            ApiError::NotFound(m) => (StatusCode::NOT_FOUND, json!({"error": "not_found", "message": m})),
            ApiError::Busy(m) => (StatusCode::CONFLICT, json!({"error": "turn_in_progress", "message": m})),
            ApiError::BadRequest(m) => (StatusCode::BAD_REQUEST, json!({"error": "bad_request", "message": m})),
            ApiError::Unprocessable { error, message, diagnostics } => (
                StatusCode::UNPROCESSABLE_ENTITY,
                json!({"error": error, "message": message, "diagnostics": diagnostics}),
            ),
            ApiError::Provider(m) => (StatusCode::BAD_GATEWAY, json!({"error": "provider", "message": m})),
            ApiError::Internal(m) => {
                log::error!("{m}");
                (StatusCode::INTERNAL_SERVER_ERROR, json!({"error": "internal", "message": m}))
            }
        };
        (status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

/// Marks a session busy for the lifetime of the guard.
struct TurnGuard {
    state: Arc<AppState>,
    id: String,
}

impl TurnGuard {
    fn acquire(state: &Arc<AppState>, id: &str) -> ApiResult<Self> {
        let mut busy = state.busy.lock().expect("busy set");
        if !busy.insert(id.to_string()) {
            return Err(ApiError::Busy(format!("session {id} already has a turn in progress")));
        }
        Ok(TurnGuard { state: state.clone(), id: id.to_string() })
    }
}

impl Drop for TurnGuard {
    fn drop(&mut self) {
        if let Ok(mut busy) = self.state.busy.lock() {
            busy.remove(&self.id);
        }
    }
}

impl AppState {
    fn resolve_provider(&self, spec: &str) -> Result<Arc<dyn CompletionProvider>, GatewayError> {
        match self.cfg.named.get(spec) {
            Some(p) => Ok(p.clone()),
            None => open_provider(spec, self.cfg.providers.as_ref()),
        }
    }

    fn session_config(&self, id: &str) -> ApiResult<SessionConfig> {
        let path = self.store.dir(id).join(SESSION_CONFIG);
        let text = std::fs::read_to_string(path).map_err(|_| ApiError::NotFound(format!("unknown session {id:?}")))?;
        serde_json::from_str(&text).map_err(|e| ApiError::Internal(format!("session {id}: {e}")))
    }

    fn load(&self, id: &str) -> ApiResult<Session> {
        Ok(self.store.load(id)?)
    }

    fn current(&self, id: &str) -> ApiResult<(Session, DeviceSpec)> {
        let s = self.load(id)?;
        match s.current.clone() {
            Some(spec) => Ok((s, spec)),
            None => Err(ApiError::NotFound(format!("session {id} has no device yet"))),
        }
    }
}

pub fn router(cfg: ServiceConfig) -> Router {
    let ui = cfg.ui_dir.clone();
    let state = Arc::new(AppState {
        store: SessionStore::new(cfg.artifacts.clone()),
        cfg,
        busy: Mutex::new(HashSet::new()),
    });
    let api = Router::new()
        .route("/healthz", get(healthz))
        .route("/sessions", post(create_session).get(list_sessions))
        .route("/sessions/{id}", get(session_info))
        .route("/sessions/{id}/generate", post(generate))
        .route("/sessions/{id}/refine", post(refine))
        .route("/sessions/{id}/spec", get(get_spec))
        .route("/sessions/{id}/erc", get(get_erc))
        .route("/sessions/{id}/export", get(get_export))
        .with_state(state);
    match ui {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

/// Binds `addr` and serves until the process stops.
pub async fn serve(cfg: ServiceConfig, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(cfg)).await
}

async fn healthz() -> &'static str {
    "ok"
}

#[derive(Deserialize)]
struct CreateBody {
    provider: String,
    #[serde(default)]
    template: Option<String>,
}

async fn create_session(State(st): State<Arc<AppState>>, body: Option<Json<CreateBody>>) -> ApiResult<Response> {
    let Some(Json(body)) = body else {
        return Err(ApiError::BadRequest("expected JSON body {\"provider\": ...}".into()));
    };
    st.resolve_provider(&body.provider)
        .map_err(|e| ApiError::unprocessable("provider_config", e.to_string()))?;
    if let Some(t) = &body.template {
        PromptTemplate::load(t).map_err(|e| ApiError::unprocessable("template", e.to_string()))?;
    }
    let session = st.store.create()?;
    let conf = SessionConfig { provider: body.provider, template: body.template };
    std::fs::write(
        st.store.dir(&session.id).join(SESSION_CONFIG),
        serde_json::to_string_pretty(&conf).expect("config") + "\n",
    )
    .map_err(|e| ApiError::Internal(e.to_string()))?;
    let out = json!({"id": session.id, "created_at": session.created_at});
    Ok((StatusCode::CREATED, Json(out)).into_response())
}

async fn list_sessions(State(st): State<Arc<AppState>>) -> ApiResult<Json<Value>> {
    Ok(Json(json!({"sessions": st.store.list()?})))
}

async fn session_info(State(st): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let s = st.load(&id)?;
    let conf = st.session_config(&id)?;
    let turns: Vec<Value> = s
        .turns
        .iter()
        .map(|t| json!({"kind": t.kind, "text": t.user_text, "iterations": t.run.iterations, "termination": t.run.termination}))
        .collect();
    Ok(Json(json!({"id": s.id, "created_at": s.created_at, "provider": conf.provider, "turns": turns})))
}

#[derive(Serialize)]
struct TurnSummary {
    session: String,
    turn: usize,
    kind: TurnKind,
    spec: DeviceSpec,
    erc: Option<ErcReport>,
    iterations: u32,
    termination: Termination,
    warnings: Vec<String>,
}

#[derive(Deserialize)]
struct GenerateBody {
    description: String,
}

#[derive(Deserialize)]
struct RefineBody {
    text: String,
}

async fn run_turn(st: Arc<AppState>, id: String, kind: TurnKind, text: String) -> ApiResult<Json<TurnSummary>> {
    if !SessionStore::valid_id(&id) {
        return Err(ApiError::NotFound(format!("unknown session {id:?}")));
    }
    let guard = TurnGuard::acquire(&st, &id)?;
    let work = move || -> ApiResult<TurnSummary> {
        let _guard = guard;
        let st = &_guard.state;
        let mut session = st.load(&id)?;
        let conf = st.session_config(&id)?;
        let provider = st.resolve_provider(&conf.provider).map_err(|e| ApiError::Provider(e.to_string()))?;
        let custom;
        let template = match &conf.template {
            Some(path) => {
                custom = PromptTemplate::load(path)?;
                &custom
            }
            None => &st.cfg.template,
        };
        let gen = Generator::new(provider.as_ref(), template, &st.cfg.kb)
            .with_params(st.cfg.params.clone())
            .with_limits(st.cfg.limits);
        let index = session.turns.len();
        let turn = match kind {
            TurnKind::Generate => session.generate(&text, &gen)?,
            TurnKind::Refine => session.refine(&text, &gen)?,
        };
        let summary = TurnSummary {
            session: id.clone(),
            turn: index,
            kind,
            spec: turn.run.spec.clone(),
            erc: turn.run.final_erc().cloned(),
            iterations: turn.run.iterations,
            termination: turn.run.termination,
            warnings: turn.run.warnings.clone(),
        };
        st.store.record_last_turn(&session)?;
        Ok(summary)
    };
    tokio::task::spawn_blocking(work)
        .await
        .map_err(|e| ApiError::Internal(format!("turn worker: {e}")))?
        .map(Json)
}

async fn generate(
    State(st): State<Arc<AppState>>,
    Path(id): Path<String>,
    Json(body): Json<GenerateBody>,
) -> ApiResult<Json<TurnSummary>> {
    run_turn(st, id, TurnKind::Generate, body.description).await
}

async fn refine(
    State(st): State<Arc<AppState>>,
    Path(id): Path<String>,
    Json(body): Json<RefineBody>,
) -> ApiResult<Json<TurnSummary>> {
    run_turn(st, id, TurnKind::Refine, body.text).await
}

async fn get_spec(State(st): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Response> {
    let (_, spec) = st.current(&id)?;
    let doc = wirespec::devicespec::to_document(&spec);
    Ok(([(header::CONTENT_TYPE, "application/json")], doc).into_response())
}

async fn get_erc(State(st): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Json<ErcReport>> {
    let (session, spec) = st.current(&id)?;
    let report = session
        .turns
        .last()
        .and_then(|t| t.run.final_erc().cloned())
        .unwrap_or_else(|| wirespec::erc::check(&spec, &st.cfg.kb));
    Ok(Json(report))
}

#[derive(Deserialize)]
struct ExportQuery {
    #[serde(default)]
    format: Option<String>,
}

async fn get_export(
    State(st): State<Arc<AppState>>,
    Path(id): Path<String>,
    Query(q): Query<ExportQuery>,
) -> ApiResult<Response> {
    let format: Format = q
        .format
        .as_deref()
        .unwrap_or("flat")
        .parse()
        .map_err(ApiError::BadRequest)?;
    let (_, spec) = st.current(&id)?;
    let text = export(&spec, format, Some(&st.cfg.kb))
        .map_err(|e| ApiError::unprocessable("export", e.to_string()))?;
    let ctype = match format {
        Format::Flat => "text/plain; charset=utf-8",
        Format::Graph => "text/vnd.graphviz",
    };
    Ok(([(header::CONTENT_TYPE, ctype)], text).into_response())
}
