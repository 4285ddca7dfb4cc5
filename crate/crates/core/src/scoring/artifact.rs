use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{fit_bins, ScoreBins, ScoringError};
use crate::features::{fit_scaler, FeatureSchema, ScalerParams};
use crate::ranking::{LinearModel, QueryGroup, Trainer};

/// Bumped whenever the on-disk layout changes incompatibly.
pub const FORMAT_VERSION: u64 = 1;

/// Everything needed to score a message: model, the scaler fitted on its
/// training rows, and the display bins fitted on its training scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub format_version: u64,
    pub schema_version: String,
    /// Content hash of model, scaler and bins, prefixed by the trainer.
    pub model_version: String,
    pub model: LinearModel,
    pub scaler: ScalerParams,
    pub bins: ScoreBins,
}

impl ModelArtifact {
    pub fn new(model: LinearModel, scaler: ScalerParams, bins: ScoreBins) -> Result<Self, ScoringError> {
        if model.schema_version != scaler.schema_version {
            return Err(ScoringError::SchemaMismatch {
                expected: model.schema_version,
                got: scaler.schema_version,
            });
        }
        Ok(Self {
            format_version: FORMAT_VERSION,
            schema_version: model.schema_version.clone(),
            model_version: content_version(&model, &scaler, &bins),
            model,
            scaler,
            bins,
        })
    }

    fn check_consistent(&self) -> Result<(), ScoringError> {
        for other in [&self.model.schema_version, &self.scaler.schema_version] {
            if *other != self.schema_version {
                return Err(ScoringError::SchemaMismatch {
                    expected: self.schema_version.clone(),
                    got: other.clone(),
                });
            }
        }
        ScoreBins::new(self.bins.thresholds)?;
        let expected = content_version(&self.model, &self.scaler, &self.bins);
        if self.model_version != expected {
            return Err(ScoringError::Parse(format!(
                "model_version {} does not match its contents ({expected})",
                self.model_version
            )));
        }
        Ok(())
    }
}

fn content_version(model: &LinearModel, scaler: &ScalerParams, bins: &ScoreBins) -> String {
    let mut h = Sha256::new();
    for w in &model.weights {
        h.update(w.to_bits().to_le_bytes());
    }
    for x in scaler.min.iter().chain(&scaler.max).chain(&bins.thresholds) {
        h.update(x.to_bits().to_le_bytes());
    }
    h.update(model.schema_version.as_bytes());
    format!("{}-{}", model.trainer, &hex::encode(h.finalize())[..12])
}

/// Fits the scaler on all training rows, trains on the scaled rows, then
/// fits display bins on the model's scores for those same rows.
pub fn train_artifact(groups: &[QueryGroup], trainer: &Trainer) -> Result<ModelArtifact, ScoringError> {
    let rows: Vec<_> = groups.iter().flat_map(|g| g.items.iter().cloned()).collect();
    let scaler = fit_scaler(&rows)?;
    let scaled = groups
        .iter()
        .map(|g| {
            let items = g.items.iter().map(|x| scaler.apply(x)).collect::<Result<Vec<_>, _>>()?;
            Ok(QueryGroup::new(g.event_id.clone(), items, g.grades.clone()))
        })
        .collect::<Result<Vec<_>, ScoringError>>()?;
    let model = trainer.train(&scaled)?;
    let raw = scaled
        .iter()
        .flat_map(|g| g.items.iter())
        .map(|x| model.score(x))
        .collect::<Result<Vec<_>, _>>()?;
    let bins = fit_bins(&raw)?;
    ModelArtifact::new(model, scaler, bins)
}

pub fn save_model(artifact: &ModelArtifact, path: impl AsRef<Path>) -> Result<(), ScoringError> {
    let mut body = serde_json::to_string_pretty(artifact).map_err(|e| ScoringError::Parse(e.to_string()))?;
    body.push('\n');
    fs::write(path, body)?;
    Ok(())
}

/// Loads and checks against the feature schema compiled into this build.
pub fn load_model(path: impl AsRef<Path>) -> Result<ModelArtifact, ScoringError> {
    load_model_expecting(path, FeatureSchema::version())
}

pub fn load_model_expecting(path: impl AsRef<Path>, current_schema: &str) -> Result<ModelArtifact, ScoringError> {
    let body = fs::read_to_string(path)?;
    let value: serde_json::Value = serde_json::from_str(&body).map_err(|e| ScoringError::Parse(e.to_string()))?;
    let version = value.get("format_version").and_then(|v| v.as_u64());
    if version != Some(FORMAT_VERSION) {
        return Err(ScoringError::UnsupportedVersion(version));
    }
    let artifact: ModelArtifact = serde_json::from_value(value).map_err(|e| ScoringError::Parse(e.to_string()))?;
    artifact.check_consistent()?;
    if artifact.schema_version != current_schema {
        return Err(ScoringError::SchemaHashMismatch {
            artifact: artifact.schema_version,
            current: current_schema.to_string(),
        });
    }
    Ok(artifact)
}
