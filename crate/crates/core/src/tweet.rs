//! Message and author records, the fixture wire format, and message sources.
//!
//! A fixture file holds one JSON object per line. Field names match
//! [`TweetRecord`] and [`AuthorRecord`]; see `docs/fixture-schema.md`.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use async_trait::async_trait;
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Timestamps up to this far past the parse clock are tolerated.
pub const FUTURE_TOLERANCE_SECS: i64 = 60;

#[derive(Debug, Error)]
pub enum TweetError {
    #[error("malformed record: {0}")]
    MalformedRecord(String),
    #[error("missing required field `{0}`")]
    MissingRequiredField(&'static str),
    #[error("created_at {created_at} is in the future (clock {now})")]
    FutureTimestamp {
        created_at: DateTime<Utc>,
        now: DateTime<Utc>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuthorRecord {
    pub followers_count: u64,
    pub friends_count: u64,
    pub statuses_count: u64,
    pub listed_count: u64,
    pub verified: bool,
    pub created_at: DateTime<Utc>,
    pub location: Option<String>,
    pub description: Option<String>,
    pub profile_url: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TweetRecord {
    pub id: String,
    pub text: String,
    pub created_at: DateTime<Utc>,
    pub source_label: String,
    pub has_geo: bool,
    pub urls: Vec<String>,
    pub hashtag_count: u64,
    pub mention_count: u64,
    pub stock_symbol_count: u64,
    pub retweet_count: u64,
    pub is_retweet: bool,
    pub is_reply: bool,
    pub author: AuthorRecord,
}

/// Non-fatal oddities noticed while parsing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseWarning {
    AuthorCreatedAfterTweet,
}

impl fmt::Display for ParseWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseWarning::AuthorCreatedAfterTweet => {
                f.write_str("author account created after the message")
            }
        }
    }
}

// Wire shape: everything optional so absence can be told apart from
// syntax errors and defaulted per field.
#[derive(Deserialize)]
struct RawAuthor {
    #[serde(default)]
    followers_count: u64,
    #[serde(default)]
    friends_count: u64,
    #[serde(default)]
    statuses_count: u64,
    #[serde(default)]
    listed_count: u64,
    #[serde(default)]
    verified: bool,
    created_at: Option<DateTime<Utc>>,
    location: Option<String>,
    description: Option<String>,
    profile_url: Option<String>,
}

#[derive(Deserialize)]
struct RawTweet {
    id: Option<String>,
    text: Option<String>,
    created_at: Option<DateTime<Utc>>,
    #[serde(default)]
    source_label: String,
    #[serde(default)]
    has_geo: bool,
    #[serde(default)]
    urls: Vec<String>,
    hashtag_count: Option<u64>,
    mention_count: Option<u64>,
    stock_symbol_count: Option<u64>,
    #[serde(default)]
    retweet_count: u64,
    #[serde(default)]
    is_retweet: bool,
    #[serde(default)]
    is_reply: bool,
    author: Option<RawAuthor>,
}

fn non_empty(s: Option<String>) -> Option<String> {
    s.filter(|s| !s.trim().is_empty())
}

/// Parses one fixture record. `now` is the parse clock used to reject
/// timestamps from the future.
pub fn parse_tweet(raw: &str, now: DateTime<Utc>) -> Result<TweetRecord, TweetError> {
    let raw: RawTweet =
        serde_json::from_str(raw).map_err(|e| TweetError::MalformedRecord(e.to_string()))?;

    let id = raw
        .id
        .filter(|id| !id.is_empty())
        .ok_or(TweetError::MissingRequiredField("id"))?;
    let text = raw.text.ok_or(TweetError::MissingRequiredField("text"))?;
    let created_at = raw
        .created_at
        .ok_or(TweetError::MissingRequiredField("created_at"))?;
    let author = raw.author.ok_or(TweetError::MissingRequiredField("author"))?;

    if (created_at - now).num_seconds() > FUTURE_TOLERANCE_SECS {
        return Err(TweetError::FutureTimestamp { created_at, now });
    }

    let entities = TextEntities::scan(&text);
    Ok(TweetRecord {
        id,
        created_at,
        source_label: raw.source_label,
        has_geo: raw.has_geo,
        urls: raw.urls,
        hashtag_count: raw.hashtag_count.unwrap_or(entities.hashtags),
        mention_count: raw.mention_count.unwrap_or(entities.mentions),
        stock_symbol_count: raw.stock_symbol_count.unwrap_or(entities.symbols),
        retweet_count: raw.retweet_count,
        is_retweet: raw.is_retweet,
        is_reply: raw.is_reply,
        author: AuthorRecord {
            followers_count: author.followers_count,
            friends_count: author.friends_count,
            statuses_count: author.statuses_count,
            listed_count: author.listed_count,
            verified: author.verified,
            // An author without a creation date is treated as brand new.
            created_at: author.created_at.unwrap_or(created_at),
            location: non_empty(author.location),
            description: non_empty(author.description),
            profile_url: non_empty(author.profile_url),
        },
        text,
    })
}

/// Serializes a record as a single fixture line (no trailing newline).
pub fn serialize_tweet(tweet: &TweetRecord) -> String {
    serde_json::to_string(tweet).expect("tweet records always serialize")
}

impl TweetRecord {
    pub fn warnings(&self) -> Vec<ParseWarning> {
        let mut out = Vec::new();
        if self.author.created_at > self.created_at {
            out.push(ParseWarning::AuthorCreatedAfterTweet);
        }
        out
    }
}

/// Entity counts recovered from raw text when the record carries none.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct TextEntities {
    pub hashtags: u64,
    pub mentions: u64,
    pub symbols: u64,
}

impl TextEntities {
    pub fn scan(text: &str) -> Self {
        let mut out = TextEntities::default();
        for token in text.split_whitespace() {
            let mut chars = token.chars();
            let (Some(lead), Some(next)) = (chars.next(), chars.next()) else {
                continue;
            };
            match lead {
                '#' if next.is_alphanumeric() || next == '_' => out.hashtags += 1,
                '@' if next.is_alphanumeric() || next == '_' => out.mentions += 1,
                '$' => {
                    let letters = token[1..]
                        .chars()
                        .take_while(|c| c.is_ascii_alphabetic())
                        .count();
                    if (1..=6).contains(&letters) {
                        out.symbols += 1;
                    }
                }
                _ => {}
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkippedLine {
    /// 1-based line number.
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Default)]
pub struct FixtureLoad {
    pub records: Vec<TweetRecord>,
    pub skipped: Vec<SkippedLine>,
}

/// Reads a newline-delimited fixture file. Bad lines are skipped and
/// reported; blank lines are ignored.
pub fn load_fixture(path: impl AsRef<Path>, now: DateTime<Utc>) -> Result<FixtureLoad, TweetError> {
    let body = std::fs::read_to_string(path)?;
    Ok(parse_fixture(&body, now))
}

pub fn parse_fixture(body: &str, now: DateTime<Utc>) -> FixtureLoad {
    let mut load = FixtureLoad::default();
    for (idx, line) in body.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match parse_tweet(line, now) {
            Ok(record) => {
                for w in record.warnings() {
                    tracing::warn!(line = idx + 1, id = %record.id, "{w}");
                }
                load.records.push(record);
            }
            Err(e) => load.skipped.push(SkippedLine {
                line: idx + 1,
                reason: e.to_string(),
            }),
        }
    }
    load
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum SourceError {
    #[error("message {0} not found")]
    NotFound(String),
    #[error("source unavailable: {0}")]
    Unavailable(String),
}

impl SourceError {
    /// Per-id error code used by the HTTP service.
    pub fn code(&self) -> &'static str {
        match self {
            SourceError::NotFound(_) => "not_found",
            SourceError::Unavailable(_) => "source_unavailable",
        }
    }
}

/// Where the service gets messages from.
#[async_trait]
pub trait TweetSource: Send + Sync {
    async fn fetch(&self, id: &str) -> Result<TweetRecord, SourceError>;

    /// Paged listing, when the source supports it.
    fn browse(&self, _offset: usize, _limit: usize) -> Option<Vec<TweetRecord>> {
        None
    }
}

pub async fn fetch_tweet(source: &dyn TweetSource, id: &str) -> Result<TweetRecord, SourceError> {
    source.fetch(id).await
}

/// In-memory source backed by fixture records.
#[derive(Debug, Clone, Default)]
pub struct FixtureSource {
    records: Arc<Vec<TweetRecord>>,
    index: Arc<HashMap<String, usize>>,
}

impl FixtureSource {
    pub fn new(records: Vec<TweetRecord>) -> Self {
        let index = records
            .iter()
            .enumerate()
            .map(|(i, r)| (r.id.clone(), i))
            .collect();
        Self {
            records: Arc::new(records),
            index: Arc::new(index),
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&TweetRecord> {
        self.index.get(id).map(|&i| &self.records[i])
    }
}

#[async_trait]
impl TweetSource for FixtureSource {
    async fn fetch(&self, id: &str) -> Result<TweetRecord, SourceError> {
        self.get(id)
            .cloned()
            .ok_or_else(|| SourceError::NotFound(id.to_string()))
    }

    fn browse(&self, offset: usize, limit: usize) -> Option<Vec<TweetRecord>> {
        Some(self.records.iter().skip(offset).take(limit).cloned().collect())
    }
}

/// Wraps another source and delays every fetch, standing in for a slow
/// upstream API.
pub struct DelayedSource<S> {
    inner: S,
    delay: Duration,
}

impl<S> DelayedSource<S> {
    pub fn new(inner: S, delay: Duration) -> Self {
        Self { inner, delay }
    }
}

#[async_trait]
impl<S: TweetSource> TweetSource for DelayedSource<S> {
    async fn fetch(&self, id: &str) -> Result<TweetRecord, SourceError> {
        tokio::time::sleep(self.delay).await;
        self.inner.fetch(id).await
    }

    fn browse(&self, offset: usize, limit: usize) -> Option<Vec<TweetRecord>> {
        self.inner.browse(offset, limit)
    }
}

/// Remote source: `GET {base}/tweets/{id}` returning one fixture record.
pub struct HttpSource {
    client: reqwest::Client,
    base: String,
    timeout: Duration,
}

impl HttpSource {
    pub fn new(base: impl Into<String>, timeout: Duration) -> Self {
        let client = reqwest::Client::builder()
            .timeout(timeout)
            .build()
            .expect("http client");
        Self {
            client,
            base: base.into().trim_end_matches('/').to_string(),
            timeout,
        }
    }
}

#[async_trait]
impl TweetSource for HttpSource {
    async fn fetch(&self, id: &str) -> Result<TweetRecord, SourceError> {
        let url = format!("{}/tweets/{}", self.base, id);
        let request = async {
            let resp = self
                .client
                .get(&url)
                .send()
                .await
                .map_err(|e| SourceError::Unavailable(e.to_string()))?;
            if resp.status() == reqwest::StatusCode::NOT_FOUND {
                return Err(SourceError::NotFound(id.to_string()));
            }
            if !resp.status().is_success() {
                return Err(SourceError::Unavailable(format!("upstream status {}", resp.status())));
            }
            let body = resp
                .text()
                .await
                .map_err(|e| SourceError::Unavailable(e.to_string()))?;
            parse_tweet(&body, Utc::now()).map_err(|e| SourceError::Unavailable(e.to_string()))
        };
        tokio::time::timeout(self.timeout, request)
            .await
            .map_err(|_| SourceError::Unavailable(format!("timed out after {:?}", self.timeout)))?
    }
}
