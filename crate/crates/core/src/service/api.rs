//! Request and response bodies for the `/v1` endpoints.

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::analytics::Verdict;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoreRequest {
    pub ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ScoreItem {
    Ok {
        tweet_id: String,
        display: u8,
        raw: f64,
        computed_at: DateTime<Utc>,
        cache_hit: bool,
        model_version: String,
    },
    Error {
        tweet_id: String,
        code: String,
        message: String,
    },
}

impl ScoreItem {
    pub fn tweet_id(&self) -> &str {
        match self {
            ScoreItem::Ok { tweet_id, .. } | ScoreItem::Error { tweet_id, .. } => tweet_id,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoreResponse {
    pub results: Vec<ScoreItem>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeedbackRequest {
    pub tweet_id: String,
    pub client_token: String,
    pub verdict: Verdict,
    #[serde(default)]
    pub suggested_score: Option<u8>,
    pub system_score_at_time: u8,
    /// Set by the client to make retries idempotent; the server clock is
    /// used when absent.
    #[serde(default)]
    pub received_at: Option<DateTime<Utc>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeedbackStatus {
    Recorded,
    Duplicate,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeedbackAck {
    pub status: FeedbackStatus,
    pub received_at: DateTime<Utc>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub model_version: String,
    pub schema_version: String,
    pub uptime_secs: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TweetPage {
    pub offset: usize,
    pub limit: usize,
    pub tweets: Vec<crate::tweet::TweetRecord>,
}
