//! Closed-loop load generator measuring client-side latency.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use chrono::Utc;

use super::api::{ScoreItem, ScoreRequest, ScoreResponse};
use super::SCORES_ENDPOINT;
use crate::analytics::LatencyRecord;

#[derive(Debug, Clone)]
pub struct LoadReport {
    /// One record per request, elapsed as seen by the client.
    pub records: Vec<LatencyRecord>,
    pub failed_requests: usize,
    pub cache_hits: usize,
    pub wall: Duration,
}

/// Sends `requests` single-id score requests from `concurrency` workers,
/// cycling through `ids`.
pub async fn run_load(base_url: &str, ids: &[String], requests: usize, concurrency: usize) -> LoadReport {
    assert!(!ids.is_empty() && concurrency > 0, "need ids and at least one worker");
    let client = reqwest::Client::builder()
        .pool_max_idle_per_host(concurrency)
        .build()
        .expect("http client");
    let url = format!("{}{}", base_url.trim_end_matches('/'), SCORES_ENDPOINT);
    let next = Arc::new(AtomicUsize::new(0));
    let ids = Arc::new(ids.to_vec());
    let started = Instant::now();

    let workers = (0..concurrency).map(|_| {
        let (client, url, next, ids) = (client.clone(), url.clone(), next.clone(), ids.clone());
        tokio::spawn(async move {
            let mut records = Vec::new();
            let (mut failed, mut hits) = (0, 0);
            loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= requests {
                    break;
                }
                let id = ids[i % ids.len()].clone();
                let t = Instant::now();
                let resp = client
                    .post(&url)
                    .json(&ScoreRequest { ids: vec![id.clone()] })
                    .send()
                    .await;
                let body = match resp {
                    Ok(r) if r.status().is_success() => r.json::<ScoreResponse>().await.ok(),
                    _ => None,
                };
                let elapsed_ms = t.elapsed().as_secs_f64() * 1000.0;
                match body.as_ref().and_then(|b| b.results.first()) {
                    Some(ScoreItem::Ok { cache_hit, .. }) => hits += usize::from(*cache_hit),
                    _ => failed += 1,
                }
                records.push(LatencyRecord {
                    endpoint: SCORES_ENDPOINT.into(),
                    tweet_id: Some(id),
                    elapsed_ms,
                    timestamp: Utc::now(),
                });
            }
            (records, failed, hits)
        })
    });
    let mut report = LoadReport {
        records: Vec::with_capacity(requests),
        failed_requests: 0,
        cache_hits: 0,
        wall: Duration::ZERO,
    };
    for w in futures::future::join_all(workers).await {
        let (records, failed, hits) = w.expect("load worker panicked");
        report.records.extend(records);
        report.failed_requests += failed;
        report.cache_hits += hits;
    }
    report.wall = started.elapsed();
    report
}
