//! Message → 45-slot feature vector, plus min-max scaling.

mod lexicon;
mod reputation;
mod scaler;
mod schema;

use std::collections::HashSet;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tweet::TweetRecord;

pub use lexicon::{Lexicon, Lexicons};
pub use reputation::{
    is_video_url, HttpReputationProvider, NoReputation, ProviderError, ReputationClient,
    ReputationLookup, ReputationProvider, ReputationSnapshot, UrlReputation,
};
pub use scaler::{apply_scaler, fit_scaler, ScalerParams};
pub use schema::{Feature, FeatureDef, FeatureGroup, FeatureSchema, FEATURE_COUNT};

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("lexicon `{0}` is empty")]
    EmptyLexicon(String),
    #[error("need at least {needed} rows, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("schema mismatch: expected {expected}, got {got}")]
    SchemaMismatch { expected: String, got: String },
    #[error("feature vector must have {FEATURE_COUNT} finite values")]
    InvalidVector,
    #[error("reputation record on line {0}: {1}")]
    BadReputationRecord(usize, String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    values: Vec<f64>,
    schema_version: String,
}

impl FeatureVector {
    /// Builds a vector under the current schema.
    pub fn new(values: Vec<f64>) -> Result<Self, FeatureError> {
        Self::with_version(values, FeatureSchema::version())
    }

    pub fn with_version(values: Vec<f64>, version: &str) -> Result<Self, FeatureError> {
        if values.len() != FEATURE_COUNT || values.iter().any(|v| !v.is_finite()) {
            return Err(FeatureError::InvalidVector);
        }
        Ok(Self {
            values,
            schema_version: version.to_string(),
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, f: Feature) -> f64 {
        self.values[f.index()]
    }

    pub fn schema_version(&self) -> &str {
        &self.schema_version
    }

    /// Errors unless this vector was produced under `expected`.
    pub fn check_schema(&self, expected: &str) -> Result<(), FeatureError> {
        if self.schema_version != expected {
            return Err(FeatureError::SchemaMismatch {
                expected: expected.to_string(),
                got: self.schema_version.clone(),
            });
        }
        Ok(())
    }

    pub fn dot(&self, weights: &[f64]) -> f64 {
        self.values.iter().zip(weights).map(|(x, w)| x * w).sum()
    }
}

#[derive(Debug, Clone)]
pub struct FeatureConfig {
    pub lexicons: Lexicons,
    pub happy_emoticons: Vec<String>,
    pub sad_emoticons: Vec<String>,
    pub mobile_markers: Vec<String>,
    pub web_markers: Vec<String>,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        let owned = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect();
        Self {
            lexicons: Lexicons::bundled(),
            happy_emoticons: owned(&[":)", ":-)", ":D", "=)"]),
            sad_emoticons: owned(&[":(", ":-(", ";("]),
            mobile_markers: owned(&["iphone", "android", "mobile", "ipad", "blackberry"]),
            web_markers: owned(&["web", "twitter web"]),
        }
    }
}

fn is_url_token(token: &str) -> bool {
    let t = token.to_ascii_lowercase();
    t.starts_with("http://") || t.starts_with("https://") || t.starts_with("www.")
}

/// Lowercased words for lexicon matching. URLs and @mentions are dropped,
/// hashtags contribute their word.
fn lexical_words(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for token in text.split_whitespace() {
        if is_url_token(token) || token.starts_with('@') {
            continue;
        }
        for w in token.split(|c: char| !(c.is_alphanumeric() || c == '\'')) {
            let w = w.trim_matches('\'');
            if !w.is_empty() {
                out.push(w.to_lowercase());
            }
        }
    }
    out
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

fn flag(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

fn seconds_between(later: DateTime<Utc>, earlier: DateTime<Utc>) -> f64 {
    ((later - earlier).num_milliseconds() as f64 / 1000.0).max(0.0)
}

#[derive(Debug, Clone, Default)]
pub struct FeatureExtractor {
    config: FeatureConfig,
}

impl FeatureExtractor {
    pub fn new(config: FeatureConfig) -> Self {
        Self { config }
    }

    pub fn config(&self) -> &FeatureConfig {
        &self.config
    }

    /// Deterministic in `(tweet, reputation, now)`. Missing data yields zero
    /// and zero denominators yield a zero ratio.
    pub fn extract(
        &self,
        tweet: &TweetRecord,
        reputation: &dyn ReputationLookup,
        now: DateTime<Utc>,
    ) -> FeatureVector {
        use Feature as F;
        let cfg = &self.config;
        let mut v = vec![0.0; FEATURE_COUNT];
        let mut set = |f: Feature, x: f64| v[f.index()] = x;

        let text = tweet.text.as_str();
        let source = tweet.source_label.to_lowercase();
        set(F::age_seconds, seconds_between(now, tweet.created_at));
        set(F::source_is_web, flag(cfg.web_markers.iter().any(|m| source.contains(m.as_str()))));
        set(
            F::source_is_mobile,
            flag(cfg.mobile_markers.iter().any(|m| source.contains(m.as_str()))),
        );
        set(F::has_geo, flag(tweet.has_geo));

        let char_count = text.chars().count();
        let unique: HashSet<char> = text.chars().collect();
        let letters = text.chars().filter(|c| c.is_alphabetic()).count();
        let upper = text.chars().filter(|c| c.is_uppercase()).count();
        let digits = text.chars().filter(|c| c.is_numeric()).count();
        let words = lexical_words(text);
        let colon_outside_urls = text
            .split_whitespace()
            .filter(|t| !is_url_token(t))
            .any(|t| t.contains(':'));

        set(F::char_count, char_count as f64);
        set(F::word_count, text.split_whitespace().count() as f64);
        set(F::url_count, tweet.urls.len() as f64);
        set(F::hashtag_count, tweet.hashtag_count as f64);
        set(F::unique_char_count, unique.len() as f64);
        set(F::has_stock_symbol, flag(tweet.stock_symbol_count > 0));
        set(F::has_happy_emoticon, flag(cfg.happy_emoticons.iter().any(|e| text.contains(e.as_str()))));
        set(F::has_sad_emoticon, flag(cfg.sad_emoticons.iter().any(|e| text.contains(e.as_str()))));
        set(F::contains_via, flag(words.iter().any(|w| w == "via")));
        set(F::contains_colon, flag(colon_outside_urls));
        set(F::exclamation_count, text.matches('!').count() as f64);
        set(F::question_mark_count, text.matches('?').count() as f64);
        set(F::uppercase_ratio, ratio(upper as f64, letters as f64));
        set(F::digit_ratio, ratio(digits as f64, char_count as f64));

        let lex = &cfg.lexicons;
        let count = |l: &Lexicon| l.count_in(words.iter().map(String::as_str)) as f64;
        set(F::swear_count, count(&lex.swear));
        set(F::negative_emotion_count, count(&lex.negative_emotion));
        set(F::positive_emotion_count, count(&lex.positive_emotion));
        set(F::pronoun_count, count(&lex.pronoun));
        set(F::self_word_count, count(&lex.self_words));
        set(F::negation_count, count(&lex.negation));
        set(F::intensifier_count, count(&lex.intensifier));

        let a = &tweet.author;
        let followers = a.followers_count as f64;
        let friends = a.friends_count as f64;
        let statuses = a.statuses_count as f64;
        let age_at_posting_days = seconds_between(tweet.created_at, a.created_at) / 86_400.0;
        set(F::followers_count, followers);
        set(F::friends_count, friends);
        set(F::statuses_count, statuses);
        set(F::listed_count, a.listed_count as f64);
        set(F::is_verified, flag(a.verified));
        set(F::account_age_days, seconds_between(now, a.created_at) / 86_400.0);
        set(F::has_location, flag(a.location.is_some()));
        set(F::has_description, flag(a.description.is_some()));
        set(F::has_profile_url, flag(a.profile_url.is_some()));
        set(F::follower_friend_ratio, ratio(followers, friends));
        set(F::statuses_per_day, ratio(statuses, age_at_posting_days));
        set(F::statuses_follower_ratio, ratio(statuses, followers));

        set(F::retweet_count, tweet.retweet_count as f64);
        set(F::mention_count, tweet.mention_count as f64);
        set(F::is_reply, flag(tweet.is_reply));
        set(F::is_retweet, flag(tweet.is_retweet));

        let reps: Vec<UrlReputation> = tweet.urls.iter().map(|u| reputation.reputation(u)).collect();
        let wot: Vec<f64> = reps.iter().filter_map(|r| r.wot_score).collect();
        let yt: Vec<f64> = reps.iter().filter_map(|r| r.youtube_like_dislike_ratio).collect();
        let mean = |xs: &[f64]| ratio(xs.iter().sum(), xs.len() as f64);
        set(F::mean_wot_score, mean(&wot));
        set(F::min_wot_score, wot.iter().copied().reduce(f64::min).unwrap_or(0.0));
        set(F::youtube_like_dislike_ratio, mean(&yt));
        set(F::has_reputation_data, flag(reps.iter().any(UrlReputation::has_data)));

        FeatureVector::new(v).expect("extracted features are finite")
    }
}

/// Extraction with the bundled configuration.
pub fn extract_features(
    tweet: &TweetRecord,
    reputation: &dyn ReputationLookup,
    now: DateTime<Utc>,
) -> FeatureVector {
    FeatureExtractor::default().extract(tweet, reputation, now)
}
