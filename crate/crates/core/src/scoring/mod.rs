//! Raw model output → 1–7 display score, the per-message scoring pipeline,
//! the TTL cache, and model persistence.

mod artifact;
mod bins;
mod cache;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{FeatureError, FeatureExtractor, ReputationLookup};
use crate::ranking::RankError;
use crate::tweet::TweetRecord;

pub use artifact::{load_model, load_model_expecting, save_model, train_artifact, ModelArtifact, FORMAT_VERSION};
pub use bins::{fit_bins, quantile_sorted, to_display, ScoreBins, DISPLAY_MAX, DISPLAY_MIN};
pub use cache::{CacheStats, ScoreCache, DEFAULT_TTL_SECS};

#[derive(Debug, Error)]
pub enum ScoringError {
    #[error("insufficient data: need {needed}, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("thresholds must be finite and non-decreasing")]
    InvalidBins,
    #[error("schema mismatch: expected {expected}, got {got}")]
    SchemaMismatch { expected: String, got: String },
    #[error("artifact schema {artifact} does not match the current feature schema {current}")]
    SchemaHashMismatch { artifact: String, current: String },
    #[error("unsupported model format version {0:?}")]
    UnsupportedVersion(Option<u64>),
    #[error("malformed model file: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Rank(RankError),
    #[error(transparent)]
    Feature(FeatureError),
}

impl From<FeatureError> for ScoringError {
    fn from(e: FeatureError) -> Self {
        match e {
            FeatureError::SchemaMismatch { expected, got } => ScoringError::SchemaMismatch { expected, got },
            FeatureError::InsufficientData { needed, got } => ScoringError::InsufficientData { needed, got },
            other => ScoringError::Feature(other),
        }
    }
}

impl From<RankError> for ScoringError {
    fn from(e: RankError) -> Self {
        match e {
            RankError::SchemaMismatch { model, item } => ScoringError::SchemaMismatch {
                expected: model,
                got: item,
            },
            other => ScoringError::Rank(other),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CredibilityScore {
    pub tweet_id: String,
    pub raw: f64,
    pub display: u8,
    pub computed_at: DateTime<Utc>,
    pub model_version: String,
}

/// Extract → scale → `w · x` → display bucket. Pure in its inputs.
pub fn score_tweet(
    artifact: &ModelArtifact,
    extractor: &FeatureExtractor,
    tweet: &TweetRecord,
    reputation: &dyn ReputationLookup,
    now: DateTime<Utc>,
) -> Result<CredibilityScore, ScoringError> {
    let features = extractor.extract(tweet, reputation, now);
    let scaled = artifact.scaler.apply(&features)?;
    let raw = artifact.model.score(&scaled)?;
    Ok(CredibilityScore {
        tweet_id: tweet.id.clone(),
        raw,
        display: artifact.bins.to_display(raw),
        computed_at: now,
        model_version: artifact.model_version.clone(),
    })
}
