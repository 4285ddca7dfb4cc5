use std::fmt::Write;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::AnalyticsError;
use crate::scoring::quantile_sorted;

pub const DEFAULT_QUANTILES: [f64; 5] = [0.5, 0.8, 0.9, 0.95, 0.99];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyRecord {
    pub endpoint: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tweet_id: Option<String>,
    pub elapsed_ms: f64,
    pub timestamp: DateTime<Utc>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CdfPoint {
    pub elapsed_ms: f64,
    /// Share of requests that took at most `elapsed_ms`.
    pub fraction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantilePoint {
    pub q: f64,
    pub elapsed_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyReport {
    pub n: usize,
    pub min_ms: f64,
    pub max_ms: f64,
    pub mean_ms: f64,
    /// One point per distinct elapsed value, ascending.
    pub cdf: Vec<CdfPoint>,
    pub quantiles: Vec<QuantilePoint>,
}

impl LatencyReport {
    /// Empirical CDF at `ms`.
    pub fn cdf_at(&self, ms: f64) -> f64 {
        match self.cdf.partition_point(|p| p.elapsed_ms <= ms) {
            0 => 0.0,
            i => self.cdf[i - 1].fraction,
        }
    }

    pub fn quantile(&self, q: f64) -> Option<f64> {
        self.quantiles.iter().find(|p| p.q == q).map(|p| p.elapsed_ms)
    }

    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "requests  {}", self.n);
        let _ = writeln!(
            out,
            "min {:.3} ms  mean {:.3} ms  max {:.3} ms",
            self.min_ms, self.mean_ms, self.max_ms
        );
        let _ = writeln!(out, "{:>8}  {:>12}", "quantile", "elapsed_ms");
        for p in &self.quantiles {
            let _ = writeln!(out, "{:>8}  {:>12.3}", format!("p{}", p.q * 100.0), p.elapsed_ms);
        }
        out
    }

    /// `elapsed_ms,fraction` lines, ready for plotting.
    pub fn cdf_csv(&self) -> String {
        let mut out = String::from("elapsed_ms,fraction\n");
        for p in &self.cdf {
            let _ = writeln!(out, "{},{}", p.elapsed_ms, p.fraction);
        }
        out
    }
}

pub fn latency_report(records: &[LatencyRecord], quantiles: &[f64]) -> Result<LatencyReport, AnalyticsError> {
    if records.is_empty() {
        return Err(AnalyticsError::EmptyData);
    }
    if let Some(&bad) = quantiles.iter().find(|q| !(0.0..=1.0).contains(*q)) {
        return Err(AnalyticsError::InvalidQuantile(bad));
    }
    let mut xs: Vec<f64> = records.iter().map(|r| r.elapsed_ms.max(0.0)).collect();
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    let mut cdf: Vec<CdfPoint> = Vec::new();
    for (i, &x) in xs.iter().enumerate() {
        let fraction = (i + 1) as f64 / n as f64;
        match cdf.last_mut() {
            Some(last) if last.elapsed_ms == x => last.fraction = fraction,
            _ => cdf.push(CdfPoint { elapsed_ms: x, fraction }),
        }
    }
    Ok(LatencyReport {
        n,
        min_ms: xs[0],
        max_ms: xs[n - 1],
        mean_ms: xs.iter().sum::<f64>() / n as f64,
        cdf,
        quantiles: quantiles
            .iter()
            .map(|&q| QuantilePoint {
                q,
                elapsed_ms: quantile_sorted(&xs, q),
            })
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;
    use proptest::prelude::*;

    fn records(ms: &[f64]) -> Vec<LatencyRecord> {
        ms.iter()
            .map(|&elapsed_ms| LatencyRecord {
                endpoint: "/v1/scores".into(),
                tweet_id: None,
                elapsed_ms,
                timestamp: Utc.timestamp_opt(1_400_000_000, 0).unwrap(),
            })
            .collect()
    }

    #[test]
    fn uniform_grid() {
        let ms: Vec<f64> = (1..=100).map(f64::from).collect();
        let r = latency_report(&records(&ms), &DEFAULT_QUANTILES).unwrap();
        assert_eq!(r.cdf_at(50.0), 0.5);
        assert_eq!(r.cdf_at(0.5), 0.0);
        assert_eq!(r.cdf.last().unwrap().fraction, 1.0);
        // type-7: 1 + 99·0.5
        assert_eq!(r.quantile(0.5), Some(50.5));
    }

    #[test]
    fn single_record() {
        let r = latency_report(&records(&[7.0]), &[0.5, 0.99]).unwrap();
        assert_eq!(r.quantile(0.5), Some(7.0));
        assert_eq!(r.quantile(0.99), Some(7.0));
    }

    #[test]
    fn errors() {
        assert_eq!(latency_report(&[], &[0.5]).unwrap_err(), AnalyticsError::EmptyData);
        assert_eq!(
            latency_report(&records(&[1.0]), &[1.5]).unwrap_err(),
            AnalyticsError::InvalidQuantile(1.5)
        );
    }

    proptest! {
        #[test]
        fn cdf_is_monotone_and_ends_at_one(ms in prop::collection::vec(0.0f64..1e4, 1..200)) {
            let r = latency_report(&records(&ms), &DEFAULT_QUANTILES).unwrap();
            prop_assert!(r.cdf.windows(2).all(|w| w[0].fraction < w[1].fraction && w[0].elapsed_ms < w[1].elapsed_ms));
            prop_assert_eq!(r.cdf.last().unwrap().fraction, 1.0);
            prop_assert!(r.quantiles.windows(2).all(|w| w[0].elapsed_ms <= w[1].elapsed_ms));
        }
    }
}
