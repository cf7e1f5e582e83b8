//! Read-only HTTP API over a loaded spot index.
//!
//! The index slot starts empty so the socket can accept connections while a
//! large index is still loading; every `/api` route answers 503 until then.

use std::future::IntoFuture;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, OnceLock};

use axum::extract::{Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use kws_core::{search, suggest, IndexStats, Method, SpotIndex};
use serde::{Deserialize, Serialize};
use tower_http::cors::CorsLayer;

pub const DEFAULT_PORT: u16 = 7878;
pub const DEFAULT_TAU: f64 = 0.5;
pub const DEFAULT_LIMIT: usize = 100;
pub const DEFAULT_SUGGEST_LIMIT: usize = 10;

#[derive(Clone, Default)]
pub struct AppState {
    index: Arc<OnceLock<SpotIndex>>,
}

impl AppState {
    pub fn loaded(index: SpotIndex) -> Self {
        let state = Self::default();
        state.install(index);
        state
    }

    /// Publishes the index. Later calls are ignored.
    pub fn install(&self, index: SpotIndex) {
        let _ = self.index.set(index);
    }

    pub fn index(&self) -> Option<&SpotIndex> {
        self.index.get()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApiSpan {
    pub begin: u32,
    pub end: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApiHit {
    pub rank: usize,
    pub region_id: String,
    pub score: f64,
    pub span: ApiSpan,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApiSearchResponse {
    pub query: String,
    pub tau: f64,
    pub out_of_lexicon: bool,
    pub detected_count: usize,
    pub results: Vec<ApiHit>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApiError {
    pub error: String,
}

enum ApiFailure {
    BadRequest(String),
    NotReady,
}

impl IntoResponse for ApiFailure {
    fn into_response(self) -> Response {
        let (status, error) = match self {
            ApiFailure::BadRequest(msg) => (StatusCode::BAD_REQUEST, msg),
            ApiFailure::NotReady => (
                StatusCode::SERVICE_UNAVAILABLE,
                "index is still loading".to_owned(),
            ),
        };
        (status, Json(ApiError { error })).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiFailure>;

// Raw strings so malformed values produce our own 400 body.
#[derive(Debug, Default, Deserialize)]
struct SearchParams {
    q: Option<String>,
    tau: Option<String>,
    limit: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
struct SuggestParams {
    prefix: Option<String>,
    limit: Option<String>,
}

fn ready(state: &AppState) -> Result<&SpotIndex, ApiFailure> {
    state.index().ok_or(ApiFailure::NotReady)
}

fn parse_limit(raw: Option<&str>, default: usize) -> Result<usize, ApiFailure> {
    match raw {
        None => Ok(default),
        Some(s) => s.parse().map_err(|_| {
            ApiFailure::BadRequest(format!("limit must be a non-negative integer, got {s:?}"))
        }),
    }
}

fn parse_tau(raw: Option<&str>, method: Method) -> Result<f64, ApiFailure> {
    let Some(s) = raw else {
        return Ok(DEFAULT_TAU);
    };
    let tau: f64 = s
        .parse()
        .map_err(|_| ApiFailure::BadRequest(format!("tau must be a number, got {s:?}")))?;
    let upper = if method.is_proper() {
        1.0
    } else {
        f64::INFINITY
    };
    if !(0.0..=upper).contains(&tau) {
        return Err(ApiFailure::BadRequest(format!(
            "tau must lie in [0, {upper}] for a {method} index, got {tau}"
        )));
    }
    Ok(tau)
}

async fn search_handler(
    State(state): State<AppState>,
    Query(params): Query<SearchParams>,
) -> ApiResult<ApiSearchResponse> {
    let ix = ready(&state)?;
    let q = params
        .q
        .filter(|q| !q.is_empty())
        .ok_or_else(|| ApiFailure::BadRequest("missing query parameter q".into()))?;
    let tau = parse_tau(params.tau.as_deref(), ix.method())?;
    let limit = parse_limit(params.limit.as_deref(), DEFAULT_LIMIT)?;
    let r = search(ix, &q, tau, limit);
    Ok(Json(ApiSearchResponse {
        query: r.query,
        tau: r.tau,
        out_of_lexicon: r.out_of_lexicon,
        detected_count: r.detected_count,
        results: r
            .hits
            .into_iter()
            .map(|h| ApiHit {
                rank: h.rank,
                region_id: h.region_id,
                score: h.score,
                span: ApiSpan {
                    begin: h.span.begin,
                    end: h.span.end,
                },
            })
            .collect(),
    }))
}

async fn suggest_handler(
    State(state): State<AppState>,
    Query(params): Query<SuggestParams>,
) -> ApiResult<Vec<String>> {
    let ix = ready(&state)?;
    let limit = parse_limit(params.limit.as_deref(), DEFAULT_SUGGEST_LIMIT)?;
    Ok(Json(suggest(
        ix,
        params.prefix.as_deref().unwrap_or(""),
        limit,
    )))
}

async fn stats_handler(State(state): State<AppState>) -> ApiResult<IndexStats> {
    Ok(Json(ready(&state)?.stats()))
}

async fn healthz() -> &'static str {
    "ok"
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/search", get(search_handler))
        .route("/api/suggest", get(suggest_handler))
        .route("/api/stats", get(stats_handler))
        .route("/healthz", get(healthz))
        .layer(CorsLayer::permissive())
        .with_state(state)
}

/// Binds `addr`, loads the index in the background and serves until the
/// process is stopped. A load failure stops the server and is returned.
pub async fn serve(index_path: PathBuf, addr: SocketAddr) -> std::io::Result<()> {
    let state = AppState::default();
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!("listening on {}", listener.local_addr()?);

    let server = tokio::spawn(axum::serve(listener, router(state.clone())).into_future());
    let loaded = tokio::task::spawn_blocking(move || kws_core::load_index(&index_path))
        .await
        .map_err(std::io::Error::other)?;
    match loaded {
        Ok(ix) => {
            tracing::info!(regions = ix.region_count(), "index loaded");
            state.install(ix);
        }
        Err(e) => {
            server.abort();
            return Err(std::io::Error::other(e));
        }
    }
    server.await.map_err(std::io::Error::other)?
}
