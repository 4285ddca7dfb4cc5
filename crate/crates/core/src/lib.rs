//! Credibility ranking for short social-media messages.
//!
//! The pipeline runs message record → [`features`] → scaled vector →
//! linear [`ranking`] model → [`scoring`] (1–7 display score, TTL cache).
//! [`labeling`] turns crowd annotations into training grades, [`analytics`]
//! summarizes feedback, latency and score distributions, and [`service`]
//! exposes it all over HTTP.

pub mod analytics;
pub mod clock;
pub mod features;
pub mod labeling;
pub mod ranking;
pub mod scoring;
pub mod service;
pub mod tweet;

pub use clock::{Clock, FixedClock, ManualClock, SystemClock};
pub use features::{FeatureExtractor, FeatureSchema, FeatureVector, FEATURE_COUNT};
pub use tweet::{TweetRecord, TweetSource};
