//! Offline summaries over the service's stores: user feedback, request
//! latency, and score distributions.

mod distribution;
mod feedback;
mod latency;

use thiserror::Error;

pub use distribution::{first_order_dominates, score_distribution, DistributionReport, ScoreRecord};
pub use feedback::{
    feedback_summary, Estimate, FeedbackEntry, FeedbackSummary, MagnitudeBin, ValidationError, Verdict,
    DEFAULT_RESAMPLES,
};
pub use latency::{latency_report, CdfPoint, LatencyRecord, LatencyReport, QuantilePoint, DEFAULT_QUANTILES};

#[derive(Debug, Error, PartialEq)]
pub enum AnalyticsError {
    #[error("no feedback entries")]
    EmptyFeedback,
    #[error("no latency records")]
    EmptyData,
    #[error("no scored message matches the keywords")]
    EmptySubset,
    #[error("quantile must lie in [0, 1], got {0}")]
    InvalidQuantile(f64),
}
