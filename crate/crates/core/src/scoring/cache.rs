//! Score cache with a fixed time-to-live.

use std::collections::HashMap;
use std::future::Future;
use std::sync::atomic::{AtomicU64, Ordering};

use chrono::{DateTime, Duration, Utc};
use parking_lot::RwLock;
use serde::{Deserialize, Serialize};

use super::CredibilityScore;

pub const DEFAULT_TTL_SECS: i64 = 900;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheStats {
    pub hits: u64,
    pub misses: u64,
    pub evictions: u64,
    pub entries: usize,
    pub ttl_secs: i64,
}

/// tweet id → score. An entry is served only while
/// `now < computed_at + ttl`; it is recomputed at or after expiry.
pub struct ScoreCache {
    ttl: Duration,
    entries: RwLock<HashMap<String, CredibilityScore>>,
    hits: AtomicU64,
    misses: AtomicU64,
    evictions: AtomicU64,
}

impl ScoreCache {
    pub fn new(ttl_secs: i64) -> Self {
        assert!(ttl_secs > 0, "ttl must be positive");
        Self {
            ttl: Duration::seconds(ttl_secs),
            entries: RwLock::new(HashMap::new()),
            hits: AtomicU64::new(0),
            misses: AtomicU64::new(0),
            evictions: AtomicU64::new(0),
        }
    }

    pub fn ttl(&self) -> Duration {
        self.ttl
    }

    fn fresh(&self, score: &CredibilityScore, now: DateTime<Utc>) -> bool {
        now < score.computed_at + self.ttl
    }

    /// Fresh entry for `id`, if any. Does not touch the hit/miss counters.
    pub fn peek(&self, id: &str, now: DateTime<Utc>) -> Option<CredibilityScore> {
        self.entries
            .read()
            .get(id)
            .filter(|s| self.fresh(s, now))
            .cloned()
    }

    fn lookup(&self, id: &str, now: DateTime<Utc>) -> Option<CredibilityScore> {
        if let Some(hit) = self.peek(id, now) {
            self.hits.fetch_add(1, Ordering::Relaxed);
            return Some(hit);
        }
        self.misses.fetch_add(1, Ordering::Relaxed);
        let mut map = self.entries.write();
        if map.get(id).is_some_and(|s| !self.fresh(s, now)) {
            map.remove(id);
            self.evictions.fetch_add(1, Ordering::Relaxed);
        }
        None
    }

    pub fn insert(&self, score: CredibilityScore) {
        self.entries.write().insert(score.tweet_id.clone(), score);
    }

    /// Cached score and `true`, or the result of `compute` and `false`.
    /// Errors from `compute` are returned and not cached.
    pub fn get_or_compute<E>(
        &self,
        id: &str,
        now: DateTime<Utc>,
        compute: impl FnOnce() -> Result<CredibilityScore, E>,
    ) -> Result<(CredibilityScore, bool), E> {
        if let Some(hit) = self.lookup(id, now) {
            return Ok((hit, true));
        }
        let score = compute()?;
        self.insert(score.clone());
        Ok((score, false))
    }

    /// Async form of [`get_or_compute`](Self::get_or_compute). No lock is
    /// held while `compute` runs, so concurrent misses on one id may both
    /// compute; the last write wins.
    pub async fn get_or_compute_async<E, F>(
        &self,
        id: &str,
        now: DateTime<Utc>,
        compute: F,
    ) -> Result<(CredibilityScore, bool), E>
    where
        F: Future<Output = Result<CredibilityScore, E>>,
    {
        if let Some(hit) = self.lookup(id, now) {
            return Ok((hit, true));
        }
        let score = compute.await?;
        self.insert(score.clone());
        Ok((score, false))
    }

    /// Drops every expired entry.
    pub fn purge_expired(&self, now: DateTime<Utc>) -> usize {
        let mut map = self.entries.write();
        let before = map.len();
        map.retain(|_, s| now < s.computed_at + self.ttl);
        let removed = before - map.len();
        self.evictions.fetch_add(removed as u64, Ordering::Relaxed);
        removed
    }

    pub fn stats(&self) -> CacheStats {
        CacheStats {
            hits: self.hits.load(Ordering::Relaxed),
            misses: self.misses.load(Ordering::Relaxed),
            evictions: self.evictions.load(Ordering::Relaxed),
            entries: self.entries.read().len(),
            ttl_secs: self.ttl.num_seconds(),
        }
    }
}

impl Default for ScoreCache {
    fn default() -> Self {
        Self::new(DEFAULT_TTL_SECS)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;
    use proptest::prelude::*;
    use std::cell::Cell;

    fn t0() -> DateTime<Utc> {
        Utc.with_ymd_and_hms(2014, 4, 10, 9, 0, 0).unwrap()
    }

    fn score(id: &str, raw: f64, at: DateTime<Utc>) -> CredibilityScore {
        CredibilityScore {
            tweet_id: id.into(),
            raw,
            display: 4,
            computed_at: at,
            model_version: "m".into(),
        }
    }

    #[test]
    fn hit_within_ttl_and_recompute_after() {
        let cache = ScoreCache::default();
        let calls = Cell::new(0);
        let compute = |at: DateTime<Utc>| {
            calls.set(calls.get() + 1);
            Ok::<_, ()>(score("a", calls.get() as f64, at))
        };
        let (first, hit) = cache.get_or_compute("a", t0(), || compute(t0())).unwrap();
        assert!(!hit);
        let later = t0() + Duration::seconds(10);
        let (second, hit) = cache.get_or_compute("a", later, || compute(later)).unwrap();
        assert!(hit);
        assert_eq!(first, second);

        let at_899 = t0() + Duration::seconds(899);
        assert!(cache.get_or_compute("a", at_899, || compute(at_899)).unwrap().1);
        let at_900 = t0() + Duration::seconds(900);
        let (third, hit) = cache.get_or_compute("a", at_900, || compute(at_900)).unwrap();
        assert!(!hit);
        assert_eq!(third.raw, 2.0);
        assert_eq!(calls.get(), 2);
        let stats = cache.stats();
        assert_eq!((stats.hits, stats.misses, stats.evictions), (2, 2, 1));
    }

    #[test]
    fn errors_are_not_cached() {
        let cache = ScoreCache::default();
        let err: Result<_, &str> = cache.get_or_compute("a", t0(), || Err("upstream down"));
        assert_eq!(err.unwrap_err(), "upstream down");
        let (s, hit) = cache
            .get_or_compute("a", t0(), || Ok::<_, &str>(score("a", 1.0, t0())))
            .unwrap();
        assert!(!hit);
        assert_eq!(s.raw, 1.0);
    }

    #[test]
    fn purge_drops_expired() {
        let cache = ScoreCache::new(60);
        cache.insert(score("a", 0.0, t0()));
        cache.insert(score("b", 0.0, t0() + Duration::seconds(30)));
        assert_eq!(cache.purge_expired(t0() + Duration::seconds(61)), 1);
        assert_eq!(cache.stats().entries, 1);
    }

    proptest! {
        #[test]
        fn never_serves_stale(steps in prop::collection::vec((0usize..4, 0i64..400), 1..200)) {
            let cache = ScoreCache::default();
            let mut now = t0();
            for (id, dt) in steps {
                now += Duration::seconds(dt);
                let id = format!("t{id}");
                let (s, hit) = cache.get_or_compute(&id, now, || Ok::<_, ()>(score(&id, 0.0, now))).unwrap();
                prop_assert!(now - s.computed_at < Duration::seconds(DEFAULT_TTL_SECS));
                if !hit {
                    prop_assert_eq!(s.computed_at, now);
                }
            }
        }
    }
}
