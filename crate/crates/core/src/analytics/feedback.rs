use chrono::{DateTime, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::AnalyticsError;
use crate::scoring::{quantile_sorted, DISPLAY_MAX, DISPLAY_MIN};

pub const DEFAULT_RESAMPLES: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Agree,
    Disagree,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackEntry {
    pub tweet_id: String,
    pub client_token: String,
    pub verdict: Verdict,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub suggested_score: Option<u8>,
    pub system_score_at_time: u8,
    pub received_at: DateTime<Utc>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ValidationError {
    #[error("disagree requires a suggested_score")]
    MissingSuggestedScore,
    #[error("agree must not carry a suggested_score")]
    UnexpectedSuggestedScore,
    #[error("{field} must be in 1..=7, got {value}")]
    ScoreOutOfRange { field: &'static str, value: u8 },
    #[error("{0} must not be empty")]
    EmptyField(&'static str),
}

fn check_score(field: &'static str, value: u8) -> Result<(), ValidationError> {
    if (DISPLAY_MIN..=DISPLAY_MAX).contains(&value) {
        Ok(())
    } else {
        Err(ValidationError::ScoreOutOfRange { field, value })
    }
}

impl FeedbackEntry {
    pub fn validate(&self) -> Result<(), ValidationError> {
        if self.tweet_id.is_empty() {
            return Err(ValidationError::EmptyField("tweet_id"));
        }
        if self.client_token.is_empty() {
            return Err(ValidationError::EmptyField("client_token"));
        }
        check_score("system_score_at_time", self.system_score_at_time)?;
        match (self.verdict, self.suggested_score) {
            (Verdict::Disagree, None) => Err(ValidationError::MissingSuggestedScore),
            (Verdict::Agree, Some(_)) => Err(ValidationError::UnexpectedSuggestedScore),
            (Verdict::Disagree, Some(s)) => check_score("suggested_score", s),
            (Verdict::Agree, None) => Ok(()),
        }
    }

    /// Signed correction `suggested − system`, for disagreements.
    pub fn delta(&self) -> Option<i16> {
        self.suggested_score
            .map(|s| i16::from(s) - i16::from(self.system_score_at_time))
    }

    /// Idempotency key.
    pub fn key(&self) -> (String, String, DateTime<Utc>) {
        (self.client_token.clone(), self.tweet_id.clone(), self.received_at)
    }
}

/// A percentage with its bootstrap interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub pct: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MagnitudeBin {
    pub magnitude: u8,
    pub count: usize,
    #[serde(flatten)]
    pub estimate: Estimate,
}

/// Every percentage is relative to all `n` entries, so the magnitude bins
/// add up to `disagreed` rather than to 100.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackSummary {
    pub n: usize,
    pub agreed: Estimate,
    pub disagreed: Estimate,
    pub should_be_higher: Estimate,
    pub should_be_lower: Estimate,
    pub magnitude: Vec<MagnitudeBin>,
    pub confidence: f64,
    pub resamples: usize,
    pub seed: u64,
}

// Per-entry indicator slots: agree, disagree, higher, lower, |Δ| = 1..=6.
const SLOTS: usize = 10;

fn indicators(e: &FeedbackEntry) -> [bool; SLOTS] {
    let mut out = [false; SLOTS];
    match e.verdict {
        Verdict::Agree => out[0] = true,
        Verdict::Disagree => {
            out[1] = true;
            if let Some(d) = e.delta() {
                out[2] = d > 0;
                out[3] = d < 0;
                let m = d.unsigned_abs() as usize;
                if (1..=6).contains(&m) {
                    out[3 + m] = true;
                }
            }
        }
    }
    out
}

/// Point percentages plus 95% percentile-bootstrap intervals, deterministic
/// in `seed`.
pub fn feedback_summary(
    entries: &[FeedbackEntry],
    resamples: usize,
    seed: u64,
) -> Result<FeedbackSummary, AnalyticsError> {
    let n = entries.len();
    if n == 0 {
        return Err(AnalyticsError::EmptyFeedback);
    }
    let rows: Vec<[bool; SLOTS]> = entries.iter().map(indicators).collect();
    let mut counts = [0usize; SLOTS];
    for r in &rows {
        for (c, &b) in counts.iter_mut().zip(r) {
            *c += usize::from(b);
        }
    }
    let pct = |c: usize| 100.0 * c as f64 / n as f64;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draws: Vec<Vec<f64>> = (0..SLOTS).map(|_| Vec::with_capacity(resamples)).collect();
    for _ in 0..resamples {
        let mut c = [0usize; SLOTS];
        for _ in 0..n {
            let r = &rows[rng.random_range(0..n)];
            for (ci, &b) in c.iter_mut().zip(r) {
                *ci += usize::from(b);
            }
        }
        for (d, &ci) in draws.iter_mut().zip(&c) {
            d.push(pct(ci));
        }
    }
    let estimates: Vec<Estimate> = draws
        .iter_mut()
        .zip(&counts)
        .map(|(d, &c)| {
            let point = pct(c);
            if d.is_empty() {
                return Estimate { pct: point, ci_low: point, ci_high: point };
            }
            d.sort_by(f64::total_cmp);
            Estimate {
                pct: point,
                ci_low: quantile_sorted(d, 0.025),
                ci_high: quantile_sorted(d, 0.975),
            }
        })
        .collect();

    Ok(FeedbackSummary {
        n,
        agreed: estimates[0],
        disagreed: estimates[1],
        should_be_higher: estimates[2],
        should_be_lower: estimates[3],
        magnitude: (1..=6)
            .map(|m| MagnitudeBin {
                magnitude: m as u8,
                count: counts[3 + m],
                estimate: estimates[3 + m],
            })
            .collect(),
        confidence: 0.95,
        resamples,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    pub(crate) fn entry(i: usize, verdict: Verdict, suggested: Option<u8>, system: u8) -> FeedbackEntry {
        FeedbackEntry {
            tweet_id: format!("t{i}"),
            client_token: format!("c{}", i % 13),
            verdict,
            suggested_score: suggested,
            system_score_at_time: system,
            received_at: Utc.timestamp_opt(1_400_000_000 + i as i64, 0).unwrap(),
        }
    }

    #[test]
    fn validation_rules() {
        assert_eq!(entry(0, Verdict::Agree, None, 5).validate(), Ok(()));
        assert_eq!(entry(0, Verdict::Disagree, Some(7), 4).validate(), Ok(()));
        assert_eq!(
            entry(0, Verdict::Disagree, None, 4).validate(),
            Err(ValidationError::MissingSuggestedScore)
        );
        assert_eq!(
            entry(0, Verdict::Agree, Some(3), 4).validate(),
            Err(ValidationError::UnexpectedSuggestedScore)
        );
        assert!(matches!(
            entry(0, Verdict::Disagree, Some(8), 4).validate(),
            Err(ValidationError::ScoreOutOfRange { field: "suggested_score", value: 8 })
        ));
        assert!(entry(0, Verdict::Agree, None, 0).validate().is_err());
    }

    #[test]
    fn all_agree_collapses_interval() {
        let entries: Vec<_> = (0..50).map(|i| entry(i, Verdict::Agree, None, 4)).collect();
        let s = feedback_summary(&entries, 500, 1).unwrap();
        assert_eq!(s.agreed, Estimate { pct: 100.0, ci_low: 100.0, ci_high: 100.0 });
        assert_eq!(s.disagreed.pct, 0.0);
    }

    #[test]
    fn single_disagreement_of_six() {
        let s = feedback_summary(&[entry(0, Verdict::Disagree, Some(7), 1)], 100, 1).unwrap();
        assert_eq!(s.magnitude[5].count, 1);
        assert_eq!(s.magnitude[5].estimate.pct, 100.0);
        assert_eq!(s.should_be_higher.pct, 100.0);
        assert!(s.magnitude[..5].iter().all(|b| b.count == 0));
    }

    #[test]
    fn deterministic_and_contains_point() {
        let entries: Vec<_> = (0..200)
            .map(|i| match i % 5 {
                0 | 1 => entry(i, Verdict::Agree, None, 4),
                2 => entry(i, Verdict::Disagree, Some(6), 3),
                3 => entry(i, Verdict::Disagree, Some(1), 4),
                _ => entry(i, Verdict::Disagree, Some(5), 4),
            })
            .collect();
        let a = feedback_summary(&entries, 2000, 7).unwrap();
        let b = feedback_summary(&entries, 2000, 7).unwrap();
        assert_eq!(a, b);
        assert!((a.agreed.pct + a.disagreed.pct - 100.0).abs() < 1e-9);
        let mag: f64 = a.magnitude.iter().map(|m| m.estimate.pct).sum();
        assert!((mag - a.disagreed.pct).abs() < 1e-9);
        for e in [a.agreed, a.disagreed, a.should_be_higher, a.should_be_lower] {
            assert!(e.ci_low <= e.pct && e.pct <= e.ci_high);
        }
    }

    #[test]
    fn empty_is_an_error() {
        assert_eq!(feedback_summary(&[], 10, 0).unwrap_err(), AnalyticsError::EmptyFeedback);
    }
}
