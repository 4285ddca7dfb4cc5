use serde::{Deserialize, Serialize};

use super::ScoringError;

pub const DISPLAY_MIN: u8 = 1;
pub const DISPLAY_MAX: u8 = 7;

/// Six ascending raw-score thresholds cutting the line into the seven
/// display buckets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreBins {
    pub thresholds: [f64; 6],
}

impl ScoreBins {
    pub fn new(thresholds: [f64; 6]) -> Result<Self, ScoringError> {
        if thresholds.iter().any(|t| !t.is_finite()) || thresholds.windows(2).any(|w| w[0] > w[1]) {
            return Err(ScoringError::InvalidBins);
        }
        Ok(Self { thresholds })
    }

    pub fn to_display(&self, raw: f64) -> u8 {
        to_display(raw, self)
    }
}

/// Empirical quantile with linear interpolation between order statistics
/// (the "type 7" rule). `sorted` must be ascending and non-empty.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Thresholds at the 1/7 … 6/7 quantiles of the training raw scores.
pub fn fit_bins(raw_scores: &[f64]) -> Result<ScoreBins, ScoringError> {
    if raw_scores.len() < 7 {
        return Err(ScoringError::InsufficientData {
            needed: 7,
            got: raw_scores.len(),
        });
    }
    if raw_scores.iter().any(|x| !x.is_finite()) {
        return Err(ScoringError::InvalidBins);
    }
    let mut sorted = raw_scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut t = [0.0; 6];
    for (k, slot) in t.iter_mut().enumerate() {
        *slot = quantile_sorted(&sorted, (k + 1) as f64 / 7.0);
    }
    ScoreBins::new(t)
}

/// 1 + number of thresholds strictly below `raw`. A score exactly on a
/// threshold lands in the lower bucket.
pub fn to_display(raw: f64, bins: &ScoreBins) -> u8 {
    DISPLAY_MIN + bins.thresholds.iter().filter(|&&t| t < raw).count() as u8
}
