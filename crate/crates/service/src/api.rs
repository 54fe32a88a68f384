//! HTTP API. Every request reads the current snapshot exactly once, so a
//! reload never produces a response mixing two builds.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use arc_swap::ArcSwap;
use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use dxengine_core::inference::InferenceError;
use dxengine_core::nlp::NlpError;
use dxengine_core::ontology::root_class;
use dxengine_core::ConceptId;
use serde::Deserialize;
use serde_json::{json, Value};
use tokio::net::TcpListener;

use crate::store::CaseStore;
use crate::{diagnose_to_json, AppConfig, CaseInput, ServiceError, Snapshot};

const MAX_SUGGESTIONS: usize = 20;

pub struct AppState {
    snapshot: ArcSwap<Snapshot>,
    config_path: PathBuf,
    store: CaseStore,
    reload_lock: tokio::sync::Mutex<()>,
}

impl AppState {
    pub fn new(config_path: impl Into<PathBuf>, snapshot: Snapshot, store: CaseStore) -> Self {
        AppState {
            snapshot: ArcSwap::from_pointee(snapshot),
            config_path: config_path.into(),
            store,
            reload_lock: tokio::sync::Mutex::new(()),
        }
    }

    /// Loads the config and builds the first snapshot.
    pub fn from_config_path(path: impl Into<PathBuf>) -> Result<Self, ServiceError> {
        let path = path.into();
        let cfg = AppConfig::load(&path)?;
        let snapshot = Snapshot::build(&cfg)?;
        let store = CaseStore::open(cfg.case_store())?;
        Ok(AppState::new(path, snapshot, store))
    }

    pub fn snapshot(&self) -> Arc<Snapshot> {
        self.snapshot.load_full()
    }
}

pub struct ApiError(ServiceError);

impl From<ServiceError> for ApiError {
    fn from(e: ServiceError) -> Self {
        ApiError(e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, code, detail) = classify(&self.0);
        let body = json!({ "code": code, "message": self.0.to_string(), "detail": detail });
        (status, Json(body)).into_response()
    }
}

fn classify(e: &ServiceError) -> (StatusCode, &'static str, Value) {
    let unprocessable = StatusCode::UNPROCESSABLE_ENTITY;
    match e {
        ServiceError::Inference(InferenceError::Conflict(id)) | ServiceError::Nlp(NlpError::Conflict(id)) => {
            (unprocessable, "conflict", json!({ "finding": id }))
        }
        ServiceError::Inference(InferenceError::UnknownFinding(id)) | ServiceError::Nlp(NlpError::UnknownFinding(id)) => {
            (unprocessable, "unknown_finding", json!({ "finding": id }))
        }
        ServiceError::Nlp(NlpError::Xml(m)) => (StatusCode::BAD_REQUEST, "malformed_xml", json!({ "parser": m })),
        ServiceError::Nlp(_) | ServiceError::BadInput(_) => (StatusCode::BAD_REQUEST, "bad_request", Value::Null),
        ServiceError::UnsupportedMedia(ct) => (
            StatusCode::UNSUPPORTED_MEDIA_TYPE,
            "unsupported_media_type",
            json!({ "content_type": ct, "accepted": ["application/json", "application/xml", "text/plain"] }),
        ),
        ServiceError::NotFound(_) => (StatusCode::NOT_FOUND, "not_found", Value::Null),
        ServiceError::Inference(_) => (StatusCode::INTERNAL_SERVER_ERROR, "numerical", Value::Null),
        ServiceError::Config(_) | ServiceError::Pipeline(_) => {
            (StatusCode::INTERNAL_SERVER_ERROR, "build_failed", Value::Null)
        }
        ServiceError::Io(_) | ServiceError::Bind { .. } => (StatusCode::INTERNAL_SERVER_ERROR, "internal", Value::Null),
    }
}

type ApiResult<T> = Result<T, ApiError>;

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/api/health", get(health))
        .route("/api/findings", get(findings))
        .route("/api/concepts/:id", get(concept))
        .route("/api/diagnose", post(diagnose))
        .route("/api/cases/:hash", get(case))
        .route("/api/reload", post(reload))
        .with_state(state)
}

async fn health(State(state): State<Arc<AppState>>) -> Json<Value> {
    let s = state.snapshot();
    Json(json!({
        "status": "ok",
        "fingerprint": s.fingerprint,
        "disorders": s.compiled.kb.disorders().len(),
        "findings": s.compiled.kb.findings().len(),
        "links": s.compiled.kb.links().len(),
    }))
}

#[derive(Deserialize)]
struct FindingQuery {
    #[serde(default)]
    q: String,
}

async fn findings(State(state): State<Arc<AppState>>, Query(query): Query<FindingQuery>) -> Json<Value> {
    let s = state.snapshot();
    let hits: Vec<Value> = s
        .lexicon
        .search(&query.q, MAX_SUGGESTIONS)
        .into_iter()
        .map(|(phrase, id)| {
            let name = s.compiled.kb.finding(id).map(|f| f.name.as_str()).unwrap_or(phrase);
            json!({ "id": id, "phrase": phrase, "name": name })
        })
        .collect();
    Json(Value::Array(hits))
}

async fn concept(State(state): State<Arc<AppState>>, Path(raw): Path<String>) -> ApiResult<Json<Value>> {
    let id: ConceptId = raw
        .parse()
        .map_err(|_| ServiceError::BadInput(format!("`{raw}` is not a concept id")))?;
    let s = state.snapshot();
    let onto = &s.compiled.onto;
    let c = onto
        .ontology
        .concept(id)
        .ok_or_else(|| ServiceError::NotFound(format!("concept {id}")))?;
    let root = root_class(&onto.closure, &onto.roots, id).ok();
    Ok(Json(json!({
        "id": id,
        "term": c.preferred_term,
        "active": c.active,
        "synonyms": c.synonyms,
        "ancestors": onto.closure.ancestors(id),
        "depth": onto.closure.depth(id),
        "root_class": root,
        "finding": s.compiled.kb.finding(id),
        "disorder": s.compiled.kb.disorder(id),
    })))
}

async fn diagnose(State(state): State<Arc<AppState>>, headers: HeaderMap, body: Bytes) -> ApiResult<Response> {
    let content_type = headers
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .unwrap_or("");
    let body = String::from_utf8(body.to_vec()).map_err(|_| ServiceError::BadInput("body is not UTF-8".into()))?;
    let input = CaseInput::from_content_type(content_type, body)?;
    let snapshot = state.snapshot();
    let (input, json) = tokio::task::spawn_blocking(move || {
        let out = diagnose_to_json(&snapshot, &input);
        (input, out)
    })
    .await
    .map_err(|e| ServiceError::Io(e.to_string()))?;
    let json = json?;
    let key = state.store.put(input.kind(), input.body(), &json)?;
    let mut response = json_body(json);
    if let Ok(v) = HeaderValue::from_str(&key) {
        response.headers_mut().insert("x-case-hash", v);
    }
    Ok(response)
}

fn json_body(body: String) -> Response {
    ([(header::CONTENT_TYPE, "application/json")], body).into_response()
}

async fn case(State(state): State<Arc<AppState>>, Path(hash): Path<String>) -> ApiResult<Response> {
    Ok(json_body(state.store.get(&hash)?))
}

async fn reload(State(state): State<Arc<AppState>>) -> ApiResult<Json<Value>> {
    let _guard = state.reload_lock.lock().await;
    let path = state.config_path.clone();
    let built = tokio::task::spawn_blocking(move || AppConfig::load(&path).and_then(|cfg| Snapshot::build(&cfg)))
        .await
        .map_err(|e| ServiceError::Io(e.to_string()))??;
    let previous = state.snapshot().fingerprint.clone();
    let fingerprint = built.fingerprint.clone();
    state.snapshot.store(Arc::new(built));
    tracing::info!(%previous, %fingerprint, "snapshot reloaded");
    Ok(Json(json!({ "fingerprint": fingerprint, "previous": previous })))
}

/// Binds the listening socket; a busy port is reported with its address.
pub async fn bind(port: u16) -> Result<TcpListener, ServiceError> {
    let addr = SocketAddr::from(([127, 0, 0, 1], port));
    TcpListener::bind(addr).await.map_err(|e| ServiceError::Bind {
        addr: addr.to_string(),
        message: if e.kind() == std::io::ErrorKind::AddrInUse {
            "port already in use".into()
        } else {
            e.to_string()
        },
    })
}

/// Serves until the process is stopped.
pub async fn serve(state: Arc<AppState>, listener: TcpListener) -> Result<(), ServiceError> {
    let addr = listener.local_addr().map_err(|e| ServiceError::Io(e.to_string()))?;
    tracing::info!(%addr, fingerprint = %state.snapshot().fingerprint, "listening");
    axum::serve(listener, router(state))
        .await
        .map_err(|e| ServiceError::Io(e.to_string()))
}
