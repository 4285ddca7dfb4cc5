use serde::{Deserialize, Serialize};

use super::{FeatureError, FeatureVector, FEATURE_COUNT};

/// Per-feature min/max fitted on training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerParams {
    pub schema_version: String,
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl ScalerParams {
    /// Pass-through scaler: every feature fitted to (0, 1).
    pub fn identity(schema_version: &str) -> Self {
        Self {
            schema_version: schema_version.to_string(),
            min: vec![0.0; FEATURE_COUNT],
            max: vec![1.0; FEATURE_COUNT],
        }
    }

    pub fn apply(&self, v: &FeatureVector) -> Result<FeatureVector, FeatureError> {
        apply_scaler(v, self)
    }
}

pub fn fit_scaler(rows: &[FeatureVector]) -> Result<ScalerParams, FeatureError> {
    if rows.len() < 2 {
        return Err(FeatureError::InsufficientData {
            needed: 2,
            got: rows.len(),
        });
    }
    let version = rows[0].schema_version();
    let mut min = vec![f64::INFINITY; FEATURE_COUNT];
    let mut max = vec![f64::NEG_INFINITY; FEATURE_COUNT];
    for row in rows {
        row.check_schema(version)?;
        for (i, &x) in row.values().iter().enumerate() {
            min[i] = min[i].min(x);
            max[i] = max[i].max(x);
        }
    }
    Ok(ScalerParams {
        schema_version: version.to_string(),
        min,
        max,
    })
}

/// `(x - min) / (max - min)` clamped to [0, 1]; constant features map to 0.
pub fn apply_scaler(v: &FeatureVector, s: &ScalerParams) -> Result<FeatureVector, FeatureError> {
    v.check_schema(&s.schema_version)?;
    let values = v
        .values()
        .iter()
        .zip(s.min.iter().zip(&s.max))
        .map(|(&x, (&lo, &hi))| {
            if hi > lo {
                ((x - lo) / (hi - lo)).clamp(0.0, 1.0)
            } else {
                0.0
            }
        })
        .collect();
    FeatureVector::with_version(values, &s.schema_version)
}
