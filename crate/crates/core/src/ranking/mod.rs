//! Learning to rank: NDCG, pairwise SVM, coordinate ascent, and k-fold
//! cross-validation over query groups (one group per event).

mod coord_ascent;
mod cv;
mod metrics;
mod svmrank;
pub mod synthetic;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{FeatureError, FeatureVector, FEATURE_COUNT};
use crate::labeling::TrainingSet;

pub use coord_ascent::{
    train_coordinate_ascent, train_coordinate_ascent_traced, CoordinateAscentOptions, CoordinateAscentRun,
    DEFAULT_GRID,
};
pub use cv::{cross_validate, DEFAULT_CUTOFFS, cross_validate_all, make_folds, render_table, CvReport, FoldReport, FoldUnit, Folds, Trainer};
pub use metrics::{dcg_at_n, ideal_dcg_at_n, ndcg_at_n};
pub use svmrank::{pairs, svm_objective, train_svmrank, SvmRankOptions};

#[derive(Debug, Error, PartialEq)]
pub enum RankError {
    #[error("cutoff must be >= 1, got {0}")]
    InvalidCutoff(usize),
    #[error("no pair with unequal grades inside any group")]
    NoPairs,
    #[error("no training groups")]
    EmptyInput,
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("schema mismatch: model {model}, item {item}")]
    SchemaMismatch { model: String, item: String },
    #[error("weights must have {FEATURE_COUNT} finite values")]
    InvalidWeights,
}

impl From<FeatureError> for RankError {
    fn from(e: FeatureError) -> Self {
        match e {
            FeatureError::SchemaMismatch { expected, got } => RankError::SchemaMismatch {
                model: expected,
                item: got,
            },
            other => RankError::InsufficientData(other.to_string()),
        }
    }
}

/// Messages of one event with their grades.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryGroup {
    pub event_id: String,
    pub items: Vec<FeatureVector>,
    pub grades: Vec<u8>,
}

impl QueryGroup {
    pub fn new(event_id: impl Into<String>, items: Vec<FeatureVector>, grades: Vec<u8>) -> Self {
        assert_eq!(items.len(), grades.len(), "one grade per item");
        Self {
            event_id: event_id.into(),
            items,
            grades,
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn subset(&self, idx: &[usize]) -> QueryGroup {
        QueryGroup {
            event_id: self.event_id.clone(),
            items: idx.iter().map(|&i| self.items[i].clone()).collect(),
            grades: idx.iter().map(|&i| self.grades[i]).collect(),
        }
    }
}

pub fn groups_from_training_set(set: &TrainingSet) -> Vec<QueryGroup> {
    set.groups
        .iter()
        .map(|(event, examples)| {
            QueryGroup::new(
                event.clone(),
                examples.iter().map(|e| e.features.clone()).collect(),
                examples.iter().map(|e| e.grade).collect(),
            )
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainerTag {
    Svmrank,
    CoordinateAscent,
}

impl fmt::Display for TrainerTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TrainerTag::Svmrank => "svmrank",
            TrainerTag::CoordinateAscent => "coordinate_ascent",
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingMetadata {
    pub hyperparameters: BTreeMap<String, f64>,
    pub seed: u64,
    pub wall_time_secs: f64,
    /// Epochs (SVM) or coordinate sweeps (coordinate ascent) actually run.
    pub iterations: usize,
    pub converged: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pair_count: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_objective: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_ndcg: Option<f64>,
}

/// Linear scoring function `w · x`. There is no bias: rankings are
/// translation invariant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub schema_version: String,
    pub trainer: TrainerTag,
    pub metadata: TrainingMetadata,
}

impl LinearModel {
    pub fn new(weights: Vec<f64>, schema_version: impl Into<String>, trainer: TrainerTag) -> Result<Self, RankError> {
        if weights.len() != FEATURE_COUNT || weights.iter().any(|w| !w.is_finite()) {
            return Err(RankError::InvalidWeights);
        }
        Ok(Self {
            weights,
            schema_version: schema_version.into(),
            trainer,
            metadata: TrainingMetadata::default(),
        })
    }

    pub fn score(&self, x: &FeatureVector) -> Result<f64, RankError> {
        x.check_schema(&self.schema_version)?;
        Ok(x.dot(&self.weights))
    }

    pub fn scaled(&self, factor: f64) -> LinearModel {
        LinearModel {
            weights: self.weights.iter().map(|w| w * factor).collect(),
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ranking {
    /// Item indices, best first.
    pub ordering: Vec<usize>,
    pub scores: Vec<f64>,
}

/// Sorts by descending score; ties keep input order.
pub fn rank(model: &LinearModel, items: &[FeatureVector]) -> Result<Ranking, RankError> {
    let scores = items.iter().map(|x| model.score(x)).collect::<Result<Vec<_>, _>>()?;
    let ordering = order_by_score(&scores);
    Ok(Ranking { ordering, scores })
}

pub(crate) fn order_by_score(scores: &[f64]) -> Vec<usize> {
    let mut ordering: Vec<usize> = (0..scores.len()).collect();
    ordering.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    ordering
}

/// Mean NDCG@n of `model` over `groups`.
pub fn mean_ndcg(model: &LinearModel, groups: &[QueryGroup], n: usize) -> Result<f64, RankError> {
    if groups.is_empty() {
        return Err(RankError::EmptyInput);
    }
    let mut total = 0.0;
    for g in groups {
        let r = rank(model, &g.items)?;
        let ranked: Vec<u8> = r.ordering.iter().map(|&i| g.grades[i]).collect();
        total += ndcg_at_n(&ranked, n)?;
    }
    Ok(total / groups.len() as f64)
}

/// Share of within-group pairs with unequal grades that the model orders
/// strictly correctly.
pub fn pairwise_accuracy(model: &LinearModel, groups: &[QueryGroup]) -> Result<f64, RankError> {
    let (mut right, mut total) = (0usize, 0usize);
    for g in groups {
        let scores = g.items.iter().map(|x| model.score(x)).collect::<Result<Vec<_>, _>>()?;
        for i in 0..g.len() {
            for j in 0..g.len() {
                if g.grades[i] > g.grades[j] {
                    total += 1;
                    if scores[i] > scores[j] {
                        right += 1;
                    }
                }
            }
        }
    }
    if total == 0 {
        return Err(RankError::NoPairs);
    }
    Ok(right as f64 / total as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FeatureSchema;
    use proptest::prelude::*;

    fn vec_with(first: f64) -> FeatureVector {
        let mut v = vec![0.0; FEATURE_COUNT];
        v[0] = first;
        v[1] = 1.0 - first;
        FeatureVector::new(v).unwrap()
    }

    fn model(w0: f64, w1: f64) -> LinearModel {
        let mut w = vec![0.0; FEATURE_COUNT];
        w[0] = w0;
        w[1] = w1;
        LinearModel::new(w, FeatureSchema::version(), TrainerTag::Svmrank).unwrap()
    }

    #[test]
    fn zero_weights_keep_input_order() {
        let items: Vec<_> = [0.3, 0.9, 0.1].iter().map(|&x| vec_with(x)).collect();
        let r = rank(&model(0.0, 0.0), &items).unwrap();
        assert_eq!(r.ordering, vec![0, 1, 2]);
        assert_eq!(r.scores, vec![0.0; 3]);
    }

    #[test]
    fn single_item_and_ordering() {
        assert_eq!(rank(&model(1.0, 0.0), &[vec_with(0.5)]).unwrap().ordering, vec![0]);
        let items: Vec<_> = [0.3, 0.9, 0.1].iter().map(|&x| vec_with(x)).collect();
        assert_eq!(rank(&model(1.0, 0.0), &items).unwrap().ordering, vec![1, 0, 2]);
    }

    #[test]
    fn schema_mismatch_is_rejected() {
        let other = FeatureVector::with_version(vec![0.0; FEATURE_COUNT], "fs-elsewhere").unwrap();
        assert!(matches!(rank(&model(1.0, 0.0), &[other]), Err(RankError::SchemaMismatch { .. })));
    }

    #[test]
    fn invalid_weights_rejected() {
        assert_eq!(
            LinearModel::new(vec![0.0; 3], FeatureSchema::version(), TrainerTag::Svmrank).unwrap_err(),
            RankError::InvalidWeights
        );
    }

    proptest! {
        #[test]
        fn positive_scaling_preserves_ordering(xs in prop::collection::vec(0.0f64..1.0, 1..30), w0 in -5.0f64..5.0, w1 in -5.0f64..5.0, k in -20i32..20) {
            // powers of two scale exactly, so float ties are preserved too
            let items: Vec<_> = xs.iter().map(|&x| vec_with(x)).collect();
            let m = model(w0, w1);
            let a = rank(&m, &items).unwrap().ordering;
            let b = rank(&m.scaled(2f64.powi(k)), &items).unwrap().ordering;
            prop_assert_eq!(a, b);
        }
    }
}
