//! HTTP service for interactive lung annotation sessions.
//!
//! | method | path | |
//! |---|---|---|
//! | POST | `/api/sessions` | JSON `{"path"}`, multipart upload, or raw NIfTI bytes |
//! | GET, DELETE | `/api/sessions/{id}` | descriptor / close |
//! | GET | `/api/sessions/{id}/slice?plane=&index=&wc=&ww=&overlay=` | PNG |
//! | POST | `/api/sessions/{id}/segment` | `{"mode":"auto"\|"seeded","seeds"?,"params"?}` |
//! | POST | `/api/sessions/{id}/strokes` | stroke JSON |
//! | POST | `/api/sessions/{id}/undo` | |
//! | GET | `/api/sessions/{id}/mask` | gzipped NIfTI mask |
//! | GET | `/api/sessions/{id}/metrics` | volumes in mL |
//!
//! Errors are JSON `{"error": {"code", "message"}}`.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::{Duration, Instant};

use axum::extract::DefaultBodyLimit;
use axum::http::HeaderValue;
use axum::routing::{get, post};
use axum::Router;
use tokio::net::TcpListener;
use tower_http::cors::{Any, CorsLayer};

mod error;
mod routes;
mod session;

pub use error::ApiError;
pub use session::{Session, SessionDescriptor, SessionEntry, SessionStore, SideVolumes};

#[derive(Clone, Debug)]
pub struct ServiceConfig {
    pub session_ttl: Duration,
    pub spill_dir: Option<PathBuf>,
    pub segment_timeout: Duration,
    pub max_upload_bytes: usize,
    /// Allowed CORS origin; any origin when `None`.
    pub cors_origin: Option<String>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            session_ttl: Duration::from_secs(30 * 60),
            spill_dir: None,
            segment_timeout: Duration::from_secs(120),
            max_upload_bytes: 2 << 30,
            cors_origin: None,
        }
    }
}

#[derive(Clone)]
pub struct AppState {
    pub store: Arc<SessionStore>,
    pub config: Arc<ServiceConfig>,
}

impl AppState {
    pub fn new(config: ServiceConfig) -> Self {
        AppState {
            store: Arc::new(SessionStore::new(config.session_ttl, config.spill_dir.clone())),
            config: Arc::new(config),
        }
    }
}

pub fn router(state: AppState) -> Router {
    let cors = CorsLayer::new().allow_methods(Any).allow_headers(Any);
    let cors = match state
        .config
        .cors_origin
        .as_deref()
        .and_then(|o| HeaderValue::from_str(o).ok())
    {
        Some(origin) => cors.allow_origin(origin),
        None => cors.allow_origin(Any),
    };
    Router::new()
        .route("/api/sessions", post(routes::create_session))
        .route(
            "/api/sessions/{id}",
            get(routes::get_session).delete(routes::delete_session),
        )
        .route("/api/sessions/{id}/slice", get(routes::slice))
        .route("/api/sessions/{id}/segment", post(routes::segment))
        .route("/api/sessions/{id}/strokes", post(routes::stroke))
        .route("/api/sessions/{id}/undo", post(routes::undo))
        .route("/api/sessions/{id}/mask", get(routes::mask))
        .route("/api/sessions/{id}/metrics", get(routes::metrics))
        .layer(DefaultBodyLimit::max(state.config.max_upload_bytes))
        .layer(cors)
        .with_state(state)
}

/// Periodically evicts idle sessions.
pub fn spawn_eviction(state: &AppState) -> tokio::task::JoinHandle<()> {
    let store = state.store.clone();
    let period = (state.config.session_ttl / 4).clamp(Duration::from_secs(1), Duration::from_secs(60));
    tokio::spawn(async move {
        let mut tick = tokio::time::interval(period);
        loop {
            tick.tick().await;
            let n = store.evict_idle(Instant::now());
            if n > 0 {
                log::info!("evicted {n} idle session(s)");
            }
        }
    })
}

pub async fn serve(addr: SocketAddr, config: ServiceConfig) -> std::io::Result<()> {
    let state = AppState::new(config);
    let listener = TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    let evictor = spawn_eviction(&state);
    let result = axum::serve(listener, router(state)).await;
    evictor.abort();
    result
}
