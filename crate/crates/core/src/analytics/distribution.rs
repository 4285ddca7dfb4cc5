use std::collections::HashMap;

use chrono::{DateTime, Utc};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::AnalyticsError;

/// One line of the score store.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub tweet_id: String,
    pub text: String,
    pub raw: f64,
    pub display: u8,
    pub computed_at: DateTime<Utc>,
    pub model_version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionReport {
    pub keywords: Vec<String>,
    pub period_start: DateTime<Utc>,
    pub period_end: DateTime<Utc>,
    pub subset_n: usize,
    pub background_n: usize,
    /// Share of messages at display 1..=7, index 0 = display 1.
    pub subset: [f64; 7],
    pub background: [f64; 7],
    pub seed: u64,
}

fn histogram<'a>(records: impl Iterator<Item = &'a ScoreRecord>) -> ([f64; 7], usize) {
    let mut h = [0.0; 7];
    let mut n = 0;
    for r in records {
        if (1..=7).contains(&r.display) {
            h[usize::from(r.display) - 1] += 1.0;
            n += 1;
        }
    }
    if n > 0 {
        h.iter_mut().for_each(|x| *x /= n as f64);
    }
    (h, n)
}

/// Display-score histograms of the messages matching any keyword
/// (case-insensitive substring) and of a seeded uniform sample of every
/// message scored in the same period. A message scored more than once
/// counts once, with its latest score.
pub fn score_distribution(
    records: &[ScoreRecord],
    keywords: &[String],
    background_sample_size: usize,
    seed: u64,
) -> Result<DistributionReport, AnalyticsError> {
    let mut latest: HashMap<&str, &ScoreRecord> = HashMap::new();
    for r in records {
        match latest.get(r.tweet_id.as_str()) {
            Some(prev) if prev.computed_at > r.computed_at => {}
            _ => {
                latest.insert(&r.tweet_id, r);
            }
        }
    }
    let mut unique: Vec<&ScoreRecord> = latest.into_values().collect();
    unique.sort_by(|a, b| a.computed_at.cmp(&b.computed_at).then_with(|| a.tweet_id.cmp(&b.tweet_id)));

    let needles: Vec<String> = keywords
        .iter()
        .map(|k| k.trim().to_lowercase())
        .filter(|k| !k.is_empty())
        .collect();
    let subset: Vec<&ScoreRecord> = unique
        .iter()
        .copied()
        .filter(|r| {
            let text = r.text.to_lowercase();
            needles.iter().any(|k| text.contains(k.as_str()))
        })
        .collect();
    let (Some(first), Some(last)) = (subset.first(), subset.last()) else {
        return Err(AnalyticsError::EmptySubset);
    };
    let (start, end) = (first.computed_at, last.computed_at);
    let pool: Vec<&ScoreRecord> = unique
        .iter()
        .copied()
        .filter(|r| r.computed_at >= start && r.computed_at <= end)
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let take = background_sample_size.min(pool.len());
    let mut picked = sample(&mut rng, pool.len(), take).into_vec();
    picked.sort_unstable();

    let (subset_hist, subset_n) = histogram(subset.iter().copied());
    let (background_hist, background_n) = histogram(picked.iter().map(|&i| pool[i]));
    Ok(DistributionReport {
        keywords: needles,
        period_start: start,
        period_end: end,
        subset_n,
        background_n,
        subset: subset_hist,
        background: background_hist,
        seed,
    })
}

/// `a` first-order stochastically dominates `b`: at every display value,
/// `a` has no more mass at or below it than `b` does.
pub fn first_order_dominates(a: &[f64; 7], b: &[f64; 7]) -> bool {
    let (mut ca, mut cb) = (0.0, 0.0);
    for k in 0..7 {
        ca += a[k];
        cb += b[k];
        if ca > cb + 1e-12 {
            return false;
        }
    }
    true
}
