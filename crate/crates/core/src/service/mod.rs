//! HTTP service: scoring with a TTL cache, feedback capture, and stats
//! over append-only stores. Every route lives under `/v1`.

pub mod api;
mod loadgen;
mod store;

use std::collections::HashMap;
use std::future::Future;
use std::net::SocketAddr;
use std::sync::Arc;
use std::time::{Duration, Instant};

use axum::extract::{Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;

use crate::analytics::{
    feedback_summary, latency_report, score_distribution, AnalyticsError, FeedbackEntry, LatencyRecord,
    ScoreRecord, DEFAULT_QUANTILES, DEFAULT_RESAMPLES,
};
use crate::clock::Clock;
use crate::features::{FeatureExtractor, FeatureSchema, ReputationClient};
use crate::scoring::{score_tweet, CredibilityScore, ModelArtifact, ScoreCache, ScoringError, DEFAULT_TTL_SECS};
use crate::tweet::{SourceError, TweetSource};

pub use api::*;
pub use loadgen::{run_load, LoadReport};
pub use store::{replay, JsonlStore, Stores, FEEDBACK_FILE, LATENCY_FILE, SCORES_FILE};

pub const SCORES_ENDPOINT: &str = "/v1/scores";

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub batch_limit: usize,
    pub ttl_secs: i64,
    pub seed: u64,
    pub bootstrap_resamples: usize,
    pub background_sample_size: usize,
    pub reputation_timeout: Duration,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            batch_limit: 100,
            ttl_secs: DEFAULT_TTL_SECS,
            seed: 42,
            bootstrap_resamples: DEFAULT_RESAMPLES,
            background_sample_size: 1000,
            reputation_timeout: Duration::from_secs(2),
        }
    }
}

pub struct AppState {
    pub artifact: Arc<ModelArtifact>,
    pub extractor: FeatureExtractor,
    pub source: Arc<dyn TweetSource>,
    pub reputation: ReputationClient,
    pub cache: ScoreCache,
    pub stores: Stores,
    pub clock: Arc<dyn Clock>,
    pub config: ServiceConfig,
    started: Instant,
}

impl AppState {
    pub fn new(
        artifact: ModelArtifact,
        source: Arc<dyn TweetSource>,
        reputation: ReputationClient,
        stores: Stores,
        clock: Arc<dyn Clock>,
        config: ServiceConfig,
    ) -> Self {
        Self {
            artifact: Arc::new(artifact),
            extractor: FeatureExtractor::default(),
            source,
            reputation,
            cache: ScoreCache::new(config.ttl_secs),
            stores,
            clock,
            config,
            started: Instant::now(),
        }
    }
}

/// Service-level error, rendered as `{code, message}`.
#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: ErrorBody,
}

impl ApiError {
    fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        Self {
            status,
            body: ErrorBody {
                code: code.into(),
                message: message.into(),
            },
        }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad_request", message)
    }

    fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }
}

impl From<AnalyticsError> for ApiError {
    fn from(e: AnalyticsError) -> Self {
        let code = match e {
            AnalyticsError::EmptyFeedback => "empty_feedback",
            AnalyticsError::EmptyData => "empty_data",
            AnalyticsError::EmptySubset => "empty_subset",
            AnalyticsError::InvalidQuantile(_) => return ApiError::bad_request(e.to_string()),
        };
        ApiError::new(StatusCode::NOT_FOUND, code, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route(SCORES_ENDPOINT, post(post_scores))
        .route("/v1/feedback", post(post_feedback))
        .route("/v1/stats/feedback", get(stats_feedback))
        .route("/v1/stats/latency", get(stats_latency))
        .route("/v1/stats/distribution", get(stats_distribution))
        .route("/v1/stats/cache", get(stats_cache))
        .route("/v1/tweets", get(list_tweets))
        .route("/v1/health", get(health))
        .with_state(state)
}

/// Serves until `shutdown` resolves, then flushes every store.
pub async fn serve(
    listener: tokio::net::TcpListener,
    state: Arc<AppState>,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    let app = router(state.clone());
    axum::serve(listener, app).with_graceful_shutdown(shutdown).await?;
    state.stores.flush()
}

/// Binds `addr` and serves in a background task. Returns the bound address
/// and a handle; dropping the sender shuts the server down.
pub async fn spawn(
    addr: SocketAddr,
    state: Arc<AppState>,
) -> std::io::Result<(SocketAddr, tokio::sync::oneshot::Sender<()>, tokio::task::JoinHandle<std::io::Result<()>>)> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    let local = listener.local_addr()?;
    let (tx, rx) = tokio::sync::oneshot::channel::<()>();
    let handle = tokio::spawn(serve(listener, state, async {
        let _ = rx.await;
    }));
    Ok((local, tx, handle))
}

#[derive(Debug)]
enum ScoreFailure {
    Source(SourceError),
    Scoring(ScoringError),
}

impl ScoreFailure {
    fn code(&self) -> &'static str {
        match self {
            ScoreFailure::Source(e) => e.code(),
            ScoreFailure::Scoring(_) => "scoring_failed",
        }
    }

    fn message(&self) -> String {
        match self {
            ScoreFailure::Source(e) => e.to_string(),
            ScoreFailure::Scoring(e) => e.to_string(),
        }
    }
}

async fn score_one(state: &AppState, id: &str, now: chrono::DateTime<chrono::Utc>) -> ScoreItem {
    let compute = async {
        let tweet = state.source.fetch(id).await.map_err(ScoreFailure::Source)?;
        let reputation = state.reputation.snapshot_for(&tweet.urls).await;
        let score = score_tweet(&state.artifact, &state.extractor, &tweet, &reputation, now)
            .map_err(ScoreFailure::Scoring)?;
        Ok::<_, ScoreFailure>((score, tweet.text))
    };
    // The cache stores scores only; the text rides along for the score store.
    let mut text = None;
    let result = state
        .cache
        .get_or_compute_async(id, now, async {
            let (score, t) = compute.await?;
            text = Some(t);
            Ok::<CredibilityScore, ScoreFailure>(score)
        })
        .await;
    match result {
        Ok((score, cache_hit)) => {
            if let Some(text) = text {
                let record = ScoreRecord {
                    tweet_id: score.tweet_id.clone(),
                    text,
                    raw: score.raw,
                    display: score.display,
                    computed_at: score.computed_at,
                    model_version: score.model_version.clone(),
                };
                if let Err(e) = state.stores.scores.append(record) {
                    tracing::error!("score store append failed: {e}");
                }
            }
            ScoreItem::Ok {
                tweet_id: score.tweet_id,
                display: score.display,
                raw: score.raw,
                computed_at: score.computed_at,
                cache_hit,
                model_version: score.model_version,
            }
        }
        Err(e) => ScoreItem::Error {
            tweet_id: id.to_string(),
            code: e.code().to_string(),
            message: e.message(),
        },
    }
}

async fn post_scores(State(state): State<Arc<AppState>>, body: Option<Json<ScoreRequest>>) -> Response {
    let started = Instant::now();
    let now = state.clock.now();
    let ids = body.map(|Json(r)| r.ids);
    let single = ids.as_ref().and_then(|ids| (ids.len() == 1).then(|| ids[0].clone()));
    let response = match ids {
        None => ApiError::bad_request("body must be {\"ids\": [...]}").into_response(),
        Some(ids) if ids.is_empty() => ApiError::bad_request("ids must not be empty").into_response(),
        Some(ids) if ids.len() > state.config.batch_limit => ApiError::bad_request(format!(
            "at most {} ids per request, got {}",
            state.config.batch_limit,
            ids.len()
        ))
        .into_response(),
        Some(ids) => {
            let results = futures::future::join_all(ids.iter().map(|id| score_one(&state, id, now))).await;
            Json(ScoreResponse { results }).into_response()
        }
    };
    let record = LatencyRecord {
        endpoint: SCORES_ENDPOINT.into(),
        tweet_id: single,
        elapsed_ms: started.elapsed().as_secs_f64() * 1000.0,
        timestamp: now,
    };
    if let Err(e) = state.stores.latency.append(record) {
        tracing::error!("latency store append failed: {e}");
    }
    response
}

async fn post_feedback(
    State(state): State<Arc<AppState>>,
    body: Option<Json<FeedbackRequest>>,
) -> Result<(StatusCode, Json<FeedbackAck>), ApiError> {
    let Some(Json(req)) = body else {
        return Err(ApiError::bad_request("malformed feedback body"));
    };
    let entry = FeedbackEntry {
        tweet_id: req.tweet_id,
        client_token: req.client_token,
        verdict: req.verdict,
        suggested_score: req.suggested_score,
        system_score_at_time: req.system_score_at_time,
        received_at: req.received_at.unwrap_or_else(|| state.clock.now()),
    };
    entry
        .validate()
        .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "validation_error", e.to_string()))?;
    let key = entry.key();
    let received_at = entry.received_at;
    let written = state
        .stores
        .feedback
        .append_unless(entry, |e| e.key() == key)
        .map_err(|e| ApiError::internal(e.to_string()))?;
    let (status, code) = if written {
        (FeedbackStatus::Recorded, StatusCode::CREATED)
    } else {
        (FeedbackStatus::Duplicate, StatusCode::OK)
    };
    Ok((code, Json(FeedbackAck { status, received_at })))
}

#[derive(Debug, Deserialize)]
struct FeedbackQuery {
    resamples: Option<usize>,
    seed: Option<u64>,
}

async fn stats_feedback(
    State(state): State<Arc<AppState>>,
    Query(q): Query<FeedbackQuery>,
) -> Result<Response, ApiError> {
    let entries = state.stores.feedback.snapshot();
    let resamples = q.resamples.unwrap_or(state.config.bootstrap_resamples).min(100_000);
    let seed = q.seed.unwrap_or(state.config.seed);
    let summary = tokio::task::spawn_blocking(move || feedback_summary(&entries, resamples, seed))
        .await
        .map_err(|e| ApiError::internal(e.to_string()))??;
    Ok(Json(summary).into_response())
}

fn parse_list<T: std::str::FromStr>(raw: &str) -> Result<Vec<T>, ApiError> {
    raw.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|_| ApiError::bad_request(format!("cannot parse {s:?}"))))
        .collect()
}

async fn stats_latency(
    State(state): State<Arc<AppState>>,
    Query(q): Query<HashMap<String, String>>,
) -> Result<Response, ApiError> {
    let quantiles = match q.get("quantiles") {
        Some(raw) => parse_list::<f64>(raw)?,
        None => DEFAULT_QUANTILES.to_vec(),
    };
    let records = state.stores.latency.snapshot();
    Ok(Json(latency_report(&records, &quantiles)?).into_response())
}

#[derive(Debug, Deserialize)]
struct DistributionQuery {
    keywords: Option<String>,
    sample: Option<usize>,
    seed: Option<u64>,
}

async fn stats_distribution(
    State(state): State<Arc<AppState>>,
    Query(q): Query<DistributionQuery>,
) -> Result<Response, ApiError> {
    let keywords: Vec<String> = parse_list(q.keywords.as_deref().unwrap_or(""))?;
    if keywords.is_empty() {
        return Err(ApiError::bad_request("keywords=a,b,... is required"));
    }
    let records = state.stores.scores.snapshot();
    let report = score_distribution(
        &records,
        &keywords,
        q.sample.unwrap_or(state.config.background_sample_size),
        q.seed.unwrap_or(state.config.seed),
    )?;
    Ok(Json(report).into_response())
}

async fn stats_cache(State(state): State<Arc<AppState>>) -> Response {
    Json(state.cache.stats()).into_response()
}

#[derive(Debug, Deserialize)]
struct PageQuery {
    offset: Option<usize>,
    limit: Option<usize>,
}

async fn list_tweets(State(state): State<Arc<AppState>>, Query(q): Query<PageQuery>) -> Result<Response, ApiError> {
    let offset = q.offset.unwrap_or(0);
    let limit = q.limit.unwrap_or(20).min(state.config.batch_limit);
    let tweets = state.source.browse(offset, limit).ok_or_else(|| {
        ApiError::new(StatusCode::NOT_IMPLEMENTED, "not_supported", "this tweet source cannot be browsed")
    })?;
    Ok(Json(TweetPage { offset, limit, tweets }).into_response())
}

async fn health(State(state): State<Arc<AppState>>) -> Json<Health> {
    Json(Health {
        status: "ok".into(),
        model_version: state.artifact.model_version.clone(),
        schema_version: FeatureSchema::version().to_string(),
        uptime_secs: state.started.elapsed().as_secs_f64(),
    })
}
