//! URL reputation: WOT scores and video like/dislike ratios.
//!
//! Extraction reads reputation through the synchronous [`ReputationLookup`]
//! trait. The service fills a [`ReputationSnapshot`] ahead of extraction via
//! [`ReputationClient`], which talks to an async [`ReputationProvider`] and
//! caches successful answers for the life of the process.

use std::collections::HashMap;
use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use async_trait::async_trait;
use parking_lot::RwLock;
use serde::{Deserialize, Serialize};

use super::FeatureError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UrlReputation {
    pub url: String,
    /// WOT score in [0, 100].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wot_score: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub youtube_like_dislike_ratio: Option<f64>,
}

impl UrlReputation {
    pub fn absent(url: impl Into<String>) -> Self {
        Self {
            url: url.into(),
            wot_score: None,
            youtube_like_dislike_ratio: None,
        }
    }

    pub fn has_data(&self) -> bool {
        self.wot_score.is_some() || self.youtube_like_dislike_ratio.is_some()
    }

    /// Drops values outside their documented domains and video ratios on
    /// non-video URLs.
    fn sanitized(mut self) -> Self {
        self.wot_score = self
            .wot_score
            .filter(|s| s.is_finite() && (0.0..=100.0).contains(s));
        self.youtube_like_dislike_ratio = self
            .youtube_like_dislike_ratio
            .filter(|r| r.is_finite() && *r >= 0.0 && is_video_url(&self.url));
        self
    }
}

pub fn is_video_url(url: &str) -> bool {
    reqwest::Url::parse(url)
        .ok()
        .and_then(|u| u.host_str().map(str::to_ascii_lowercase))
        .is_some_and(|h| h == "youtu.be" || h == "youtube.com" || h.ends_with(".youtube.com"))
}

pub trait ReputationLookup {
    fn reputation(&self, url: &str) -> UrlReputation;
}

/// Lookup with no data at all.
#[derive(Debug, Default, Clone, Copy)]
pub struct NoReputation;

impl ReputationLookup for NoReputation {
    fn reputation(&self, url: &str) -> UrlReputation {
        UrlReputation::absent(url)
    }
}

/// Frozen url → reputation map.
#[derive(Debug, Default, Clone, PartialEq)]
pub struct ReputationSnapshot(pub HashMap<String, UrlReputation>);

impl ReputationLookup for ReputationSnapshot {
    fn reputation(&self, url: &str) -> UrlReputation {
        self.0
            .get(url)
            .cloned()
            .unwrap_or_else(|| UrlReputation::absent(url))
    }
}

impl ReputationSnapshot {
    /// Reads recorded provider answers, one JSON object per line.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, FeatureError> {
        let body = std::fs::read_to_string(path)?;
        Self::parse(&body)
    }

    pub fn parse(body: &str) -> Result<Self, FeatureError> {
        let mut map = HashMap::new();
        for (i, line) in body.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let rep: UrlReputation = serde_json::from_str(line)
                .map_err(|e| FeatureError::BadReputationRecord(i + 1, e.to_string()))?;
            map.insert(rep.url.clone(), rep.sanitized());
        }
        Ok(Self(map))
    }
}

#[derive(Debug, thiserror::Error)]
#[error("reputation provider: {0}")]
pub struct ProviderError(pub String);

#[async_trait]
pub trait ReputationProvider: Send + Sync {
    async fn fetch(&self, url: &str) -> Result<UrlReputation, ProviderError>;
}

#[async_trait]
impl ReputationProvider for ReputationSnapshot {
    async fn fetch(&self, url: &str) -> Result<UrlReputation, ProviderError> {
        Ok(self.reputation(url))
    }
}

/// HTTP provider: `GET {base}?url=<url>` answering
/// `{"wot_score": .., "youtube_like_dislike_ratio": ..}`.
pub struct HttpReputationProvider {
    client: reqwest::Client,
    base: String,
}

impl HttpReputationProvider {
    pub fn new(base: impl Into<String>, timeout: Duration) -> Self {
        Self {
            client: reqwest::Client::builder()
                .timeout(timeout)
                .build()
                .expect("http client"),
            base: base.into(),
        }
    }
}

#[derive(Deserialize)]
struct ProviderBody {
    wot_score: Option<f64>,
    youtube_like_dislike_ratio: Option<f64>,
}

#[async_trait]
impl ReputationProvider for HttpReputationProvider {
    async fn fetch(&self, url: &str) -> Result<UrlReputation, ProviderError> {
        let resp = self
            .client
            .get(&self.base)
            .query(&[("url", url)])
            .send()
            .await
            .map_err(|e| ProviderError(e.to_string()))?
            .error_for_status()
            .map_err(|e| ProviderError(e.to_string()))?;
        let body: ProviderBody = resp.json().await.map_err(|e| ProviderError(e.to_string()))?;
        Ok(UrlReputation {
            url: url.to_string(),
            wot_score: body.wot_score,
            youtube_like_dislike_ratio: body.youtube_like_dislike_ratio,
        })
    }
}

/// Caching, failure-absorbing front for a provider. Lookups never fail:
/// errors and timeouts come back as an all-absent record and are not cached.
pub struct ReputationClient {
    provider: Arc<dyn ReputationProvider>,
    timeout: Duration,
    cache: RwLock<HashMap<String, UrlReputation>>,
}

impl ReputationClient {
    pub fn new(provider: Arc<dyn ReputationProvider>, timeout: Duration) -> Self {
        Self {
            provider,
            timeout,
            cache: RwLock::new(HashMap::new()),
        }
    }

    pub fn offline() -> Self {
        Self::new(Arc::new(ReputationSnapshot::default()), Duration::from_secs(1))
    }

    pub fn cached_len(&self) -> usize {
        self.cache.read().len()
    }

    pub async fn lookup(&self, url: &str) -> UrlReputation {
        if reqwest::Url::parse(url).is_err() {
            return UrlReputation::absent(url);
        }
        if let Some(hit) = self.cache.read().get(url) {
            return hit.clone();
        }
        match tokio::time::timeout(self.timeout, self.provider.fetch(url)).await {
            Ok(Ok(rep)) => {
                let rep = UrlReputation {
                    url: url.to_string(),
                    ..rep
                }
                .sanitized();
                self.cache.write().insert(url.to_string(), rep.clone());
                rep
            }
            Ok(Err(e)) => {
                tracing::debug!(url, "reputation lookup failed: {e}");
                UrlReputation::absent(url)
            }
            Err(_) => {
                tracing::debug!(url, "reputation lookup timed out");
                UrlReputation::absent(url)
            }
        }
    }

    pub async fn snapshot_for(&self, urls: &[String]) -> ReputationSnapshot {
        let answers = futures::future::join_all(urls.iter().map(|u| self.lookup(u))).await;
        ReputationSnapshot(answers.into_iter().map(|r| (r.url.clone(), r)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};

    struct Scripted {
        calls: AtomicUsize,
        delay: Duration,
        fail: bool,
    }

    #[async_trait]
    impl ReputationProvider for Scripted {
        async fn fetch(&self, url: &str) -> Result<UrlReputation, ProviderError> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            tokio::time::sleep(self.delay).await;
            if self.fail {
                return Err(ProviderError("boom".into()));
            }
            Ok(UrlReputation {
                url: url.into(),
                wot_score: Some(85.0),
                youtube_like_dislike_ratio: Some(3.0),
            })
        }
    }

    fn client(delay_ms: u64, fail: bool) -> (Arc<Scripted>, ReputationClient) {
        let p = Arc::new(Scripted {
            calls: AtomicUsize::new(0),
            delay: Duration::from_millis(delay_ms),
            fail,
        });
        let c = ReputationClient::new(p.clone(), Duration::from_millis(50));
        (p, c)
    }

    #[tokio::test]
    async fn passes_through_and_caches() {
        let (p, c) = client(0, false);
        let r = c.lookup("http://example.org/a").await;
        assert_eq!(r.wot_score, Some(85.0));
        // not a video url
        assert_eq!(r.youtube_like_dislike_ratio, None);
        c.lookup("http://example.org/a").await;
        assert_eq!(p.calls.load(Ordering::SeqCst), 1);

        let v = c.lookup("https://www.youtube.com/watch?v=x").await;
        assert_eq!(v.youtube_like_dislike_ratio, Some(3.0));
    }

    #[tokio::test]
    async fn timeout_degrades_to_absent_and_is_not_cached() {
        let (p, c) = client(200, false);
        let r = c.lookup("http://example.org/a").await;
        assert_eq!(r, UrlReputation::absent("http://example.org/a"));
        assert_eq!(c.cached_len(), 0);
        c.lookup("http://example.org/a").await;
        assert_eq!(p.calls.load(Ordering::SeqCst), 2);
    }

    #[tokio::test]
    async fn provider_error_and_bad_url_degrade() {
        let (_, c) = client(0, true);
        assert!(!c.lookup("http://example.org/a").await.has_data());
        assert!(!c.lookup("not a url").await.has_data());
    }

    #[test]
    fn snapshot_file_sanitizes_values() {
        let snap = ReputationSnapshot::parse(
            "{\"url\":\"http://a.b/c\",\"wot_score\":140}\n{\"url\":\"http://youtu.be/z\",\"youtube_like_dislike_ratio\":2.5}\n",
        )
        .unwrap();
        assert_eq!(snap.reputation("http://a.b/c").wot_score, None);
        assert_eq!(snap.reputation("http://youtu.be/z").youtube_like_dislike_ratio, Some(2.5));
        assert!(!snap.reputation("http://unknown").has_data());
    }
}
