//! HTTP/JSON facade over the discovery engine.
//!
//! Readers serve from an immutable [`Published`] generation that refreshes
//! swap atomically; ingestion and profile updates go through a single
//! writer lock.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex, OnceLock, RwLock};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use discovery::engine::{Engine, EngineError, Published, RefreshReport, StreamRequest, Window};
use discovery::events::EventEnvelope;
use discovery::pipeline::RankingConfig;
use serde::Serialize;
use serde_json::json;
use thiserror::Error;
use tower_http::cors::CorsLayer;

pub const DEFAULT_PORT: u16 = 8080;
pub const DEFAULT_DATA_DIR: &str = "data";
const PAGE_CACHE_CAPACITY: usize = 4096;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("engine is still loading")]
    Loading,
    #[error("engine failed to load: {0}")]
    LoadFailed(String),
    #[error("{0}")]
    BadRequest(String),
    #[error("a refresh is already in progress")]
    RefreshInProgress,
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("{0}")]
    Internal(String),
}

impl ServiceError {
    fn parts(&self) -> (StatusCode, &'static str) {
        match self {
            ServiceError::Loading => (StatusCode::SERVICE_UNAVAILABLE, "loading"),
            ServiceError::LoadFailed(_) => (StatusCode::SERVICE_UNAVAILABLE, "load_failed"),
            ServiceError::BadRequest(_) => (StatusCode::BAD_REQUEST, "bad_request"),
            ServiceError::RefreshInProgress => (StatusCode::CONFLICT, "refresh_in_progress"),
            ServiceError::Engine(EngineError::InvalidRequest(_) | EngineError::InvalidEvent { .. }) => {
                (StatusCode::BAD_REQUEST, "bad_request")
            }
            ServiceError::Engine(EngineError::RefreshInProgress) => (StatusCode::CONFLICT, "refresh_in_progress"),
            ServiceError::Engine(_) | ServiceError::Internal(_) => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
        }
    }
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let (status, code) = self.parts();
        (status, Json(json!({"error": code, "message": self.to_string()}))).into_response()
    }
}

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub data_dir: PathBuf,
    pub port: u16,
    pub ranking: RankingConfig,
}

impl ServiceConfig {
    /// Reads `ENGINE_DATA_DIR` and `ENGINE_PORT`.
    pub fn from_env() -> Result<Self, ServiceError> {
        let data_dir = std::env::var_os("ENGINE_DATA_DIR")
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from(DEFAULT_DATA_DIR));
        let port = match std::env::var("ENGINE_PORT") {
            Ok(p) => p
                .parse()
                .map_err(|_| ServiceError::BadRequest(format!("ENGINE_PORT is not a port number: {p:?}")))?,
            Err(_) => DEFAULT_PORT,
        };
        Ok(Self {
            data_dir,
            port,
            ranking: RankingConfig::default(),
        })
    }
}

struct Loaded {
    writer: Mutex<Engine>,
    published: RwLock<Arc<Published>>,
}

/// (user, session, generation, profile clicks, last click time)
type CacheKey = (Option<String>, String, u64, u64, i64);

#[derive(Default)]
pub struct AppState {
    loaded: OnceLock<Loaded>,
    load_error: Mutex<Option<String>>,
    refreshing: AtomicBool,
    cache: Mutex<HashMap<CacheKey, Arc<Window>>>,
}

/// Holds the refresh slot; released on drop.
pub struct RefreshTicket<'a>(&'a AtomicBool);

impl Drop for RefreshTicket<'_> {
    fn drop(&mut self) {
        self.0.store(false, Ordering::Release);
    }
}

fn lock<T>(m: &Mutex<T>) -> std::sync::MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|e| e.into_inner())
}

impl AppState {
    pub fn new() -> Arc<Self> {
        Arc::new(Self::default())
    }

    /// Installs a loaded engine; later calls are ignored.
    pub fn install(&self, engine: Engine) {
        let published = RwLock::new(engine.published());
        let _ = self.loaded.set(Loaded {
            writer: Mutex::new(engine),
            published,
        });
    }

    pub fn fail(&self, reason: String) {
        *lock(&self.load_error) = Some(reason);
    }

    pub fn is_loaded(&self) -> bool {
        self.loaded.get().is_some()
    }

    fn loaded(&self) -> Result<&Loaded, ServiceError> {
        match self.loaded.get() {
            Some(l) => Ok(l),
            None => match lock(&self.load_error).clone() {
                Some(e) => Err(ServiceError::LoadFailed(e)),
                None => Err(ServiceError::Loading),
            },
        }
    }

    pub fn published(&self) -> Result<Arc<Published>, ServiceError> {
        let l = self.loaded()?;
        let guard = l.published.read().unwrap_or_else(|e| e.into_inner());
        Ok(Arc::clone(&guard))
    }

    pub fn begin_refresh(&self) -> Result<RefreshTicket<'_>, ServiceError> {
        self.loaded()?;
        self.refreshing
            .compare_exchange(false, true, Ordering::AcqRel, Ordering::Acquire)
            .map_err(|_| ServiceError::RefreshInProgress)?;
        Ok(RefreshTicket(&self.refreshing))
    }

    /// Applies the backlog and swaps in the new generation. The model is
    /// rebuilt outside the writer lock, so reads and ingestion continue
    /// against the previous generation meanwhile.
    pub fn refresh(&self) -> Result<RefreshReport, ServiceError> {
        let _ticket = self.begin_refresh()?;
        let l = self.loaded()?;
        let job = lock(&l.writer).begin_refresh()?;
        let done = job.run();
        let mut writer = lock(&l.writer);
        let report = writer.finish_refresh(done)?;
        *l.published.write().unwrap_or_else(|e| e.into_inner()) = writer.published();
        drop(writer);
        lock(&self.cache).clear();
        Ok(report)
    }

    pub fn ingest(&self, events: Vec<EventEnvelope>) -> Result<discovery::engine::IngestAck, ServiceError> {
        let l = self.loaded()?;
        let ack = lock(&l.writer).ingest(events)?;
        Ok(ack)
    }

    pub fn stream(&self, req: &StreamRequest) -> Result<discovery::engine::StreamPage, ServiceError> {
        req.validate()?;
        let l = self.loaded()?;
        let published = self.published()?;
        let profile = req
            .user_id
            .as_deref()
            .and_then(|u| lock(&l.writer).profile(u).cloned());
        let key = (
            req.user_id.clone(),
            req.session().to_string(),
            published.generation(),
            profile.as_ref().map_or(0, |p| p.total_clicks),
            profile.as_ref().and_then(|p| p.events.back()).map_or(i64::MIN, |e| e.1),
        );
        let cached = lock(&self.cache).get(&key).cloned();
        let window = match cached {
            Some(w) if w.items.len() >= ((req.page + 1) * req.size).min(published.catalog().len()) => w,
            _ => {
                let w = Arc::new(published.window(req, profile.as_ref())?);
                let mut cache = lock(&self.cache);
                if cache.len() >= PAGE_CACHE_CAPACITY {
                    cache.clear();
                }
                cache.insert(key, Arc::clone(&w));
                w
            }
        };
        Ok(window.page(req))
    }

    pub fn user_weights(&self, user_id: &str) -> Result<discovery::engine::UserWeights, ServiceError> {
        let l = self.loaded()?;
        let published = self.published()?;
        let profile = lock(&l.writer).profile(user_id).cloned();
        Ok(published.user_weights(user_id, profile.as_ref())?)
    }

    pub fn health(&self) -> (StatusCode, serde_json::Value) {
        match self.loaded() {
            Ok(l) => {
                let published = self.published().expect("loaded");
                let writer = lock(&l.writer);
                (
                    StatusCode::OK,
                    json!({
                        "status": "ok",
                        "generation": published.generation(),
                        "catalog_generation": published.catalog().generation(),
                        "items": published.catalog().len(),
                        "categories": published.catalog().d(),
                        "pending_events": writer.pending_events(),
                        "logged_events": writer.log_events(),
                        "refreshing": self.refreshing.load(Ordering::Acquire),
                    }),
                )
            }
            Err(e) => {
                let (status, code) = e.parts();
                (status, json!({"status": code, "message": e.to_string()}))
            }
        }
    }
}

async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, ServiceError> + Send + 'static,
) -> Result<T, ServiceError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ServiceError::Internal(e.to_string()))?
}

fn json_ok<T: Serialize>(value: T) -> Response {
    (StatusCode::OK, Json(value)).into_response()
}

fn parse_usize(params: &HashMap<String, String>, name: &str, default: usize) -> Result<usize, ServiceError> {
    match params.get(name) {
        None => Ok(default),
        Some(v) => v
            .parse()
            .map_err(|_| ServiceError::BadRequest(format!("{name} must be a non-negative integer, got {v:?}"))),
    }
}

const STREAM_PARAMS: [&str; 4] = ["user_id", "session", "page", "size"];

async fn stream(
    State(state): State<Arc<AppState>>,
    Query(params): Query<HashMap<String, String>>,
) -> Result<Response, ServiceError> {
    if let Some(unknown) = params.keys().find(|k| !STREAM_PARAMS.contains(&k.as_str())) {
        return Err(ServiceError::BadRequest(format!("unknown query parameter {unknown:?}")));
    }
    let default_size = state.published()?.ranking().page_size;
    let req = StreamRequest {
        user_id: params.get("user_id").cloned(),
        session: params.get("session").cloned(),
        page: parse_usize(&params, "page", 0)?,
        size: parse_usize(&params, "size", default_size)?,
    };
    let page = blocking(move || state.stream(&req)).await?;
    Ok(json_ok(page))
}

async fn events(State(state): State<Arc<AppState>>, body: Bytes) -> Result<Response, ServiceError> {
    state.loaded()?;
    let envelopes: Vec<EventEnvelope> =
        serde_json::from_slice(&body).map_err(|e| ServiceError::BadRequest(format!("invalid event batch: {e}")))?;
    let ack = blocking(move || state.ingest(envelopes)).await?;
    Ok(json_ok(json!({
        "accepted": ack.accepted,
        "duplicates": ack.duplicates,
        "unknown_items": ack.unknown_items,
        "warning": ack.warning(),
    })))
}

async fn refresh(State(state): State<Arc<AppState>>) -> Result<Response, ServiceError> {
    let report = blocking(move || state.refresh()).await?;
    Ok(json_ok(report))
}

async fn admin_weights(State(state): State<Arc<AppState>>) -> Result<Response, ServiceError> {
    Ok(json_ok(state.published()?.weights_snapshot()))
}

async fn user_weights(
    State(state): State<Arc<AppState>>,
    Path(user_id): Path<String>,
) -> Result<Response, ServiceError> {
    Ok(json_ok(state.user_weights(&user_id)?))
}

async fn health(State(state): State<Arc<AppState>>) -> Response {
    let (status, body) = state.health();
    (status, Json(body)).into_response()
}

async fn not_found() -> Response {
    (
        StatusCode::NOT_FOUND,
        Json(json!({"error": "not_found", "message": "no such endpoint"})),
    )
        .into_response()
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/v1/stream", get(stream))
        .route("/v1/events", post(events))
        .route("/v1/admin/refresh", post(refresh))
        .route("/v1/admin/weights", get(admin_weights))
        .route("/v1/users/{user_id}/weights", get(user_weights))
        .route("/v1/health", get(health))
        .fallback(not_found)
        .layer(CorsLayer::permissive())
        .with_state(state)
}

/// Loads the data directory in the background and serves until ctrl-c.
/// Requests answer 503 until loading finishes.
pub async fn serve(config: ServiceConfig) -> Result<(), ServiceError> {
    let state = AppState::new();
    let loader = Arc::clone(&state);
    let dir = config.data_dir.clone();
    let ranking = config.ranking.clone();
    tokio::task::spawn_blocking(move || match Engine::open(&dir, ranking) {
        Ok(engine) => {
            log::info!("loaded {}", dir.display());
            loader.install(engine);
        }
        Err(e) => {
            log::error!("failed to load {}: {e}", dir.display());
            loader.fail(e.to_string());
        }
    });
    let addr = SocketAddr::from(([0, 0, 0, 0], config.port));
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|e| ServiceError::Internal(format!("bind {addr}: {e}")))?;
    log::info!("listening on {addr}");
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| ServiceError::Internal(e.to_string()))
}
