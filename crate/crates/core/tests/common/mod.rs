#![allow(dead_code)]

use std::collections::HashMap;
use std::path::PathBuf;

use chrono::{DateTime, TimeZone, Utc};
use credrank_core::features::{FeatureExtractor, ReputationSnapshot};
use credrank_core::labeling::{build_training_set, load_annotations, TrainingSet};
use credrank_core::tweet::{load_fixture, TweetRecord};

pub fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

/// Extraction clock for every fixture-based test.
pub fn now() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2014, 4, 12, 12, 0, 0).unwrap()
}

pub fn tweets() -> Vec<TweetRecord> {
    let load = load_fixture(data("tweets.jsonl"), now()).unwrap();
    assert!(load.skipped.is_empty(), "{:?}", load.skipped);
    load.records
}

pub fn reputation() -> ReputationSnapshot {
    ReputationSnapshot::load(data("reputation.jsonl")).unwrap()
}

pub fn training_set() -> TrainingSet {
    let by_id: HashMap<String, TweetRecord> = tweets().into_iter().map(|t| (t.id.clone(), t)).collect();
    let annotations = load_annotations(data("annotations.jsonl")).unwrap();
    build_training_set(&annotations, &by_id, &FeatureExtractor::default(), &reputation(), now())
}
