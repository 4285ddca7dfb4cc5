mod common;

use std::fmt::Write;

use credrank_core::features::{Feature, FeatureExtractor, FeatureGroup, FeatureSchema, NoReputation, ScalerParams};
use credrank_core::labeling::ExclusionReason;
use credrank_core::ranking::{groups_from_training_set, LinearModel, SvmRankOptions, Trainer, TrainerTag};
use credrank_core::scoring::{fit_bins, score_tweet, train_artifact, ModelArtifact, ScoreBins};
use credrank_core::FEATURE_COUNT;

const GOLDEN: &str = "features.golden.jsonl";

fn render_features() -> String {
    let extractor = FeatureExtractor::default();
    let reputation = common::reputation();
    let mut out = String::new();
    for t in common::tweets() {
        let v = extractor.extract(&t, &reputation, common::now());
        let line = serde_json::json!({ "id": t.id, "values": v.values() });
        writeln!(out, "{line}").unwrap();
    }
    out
}

#[test]
fn golden_feature_vectors() {
    let rendered = render_features();
    assert_eq!(rendered, render_features(), "extraction is not deterministic");
    assert!(rendered.lines().count() >= 20);
    let path = common::data(GOLDEN);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(&path, &rendered).unwrap();
    }
    let golden = std::fs::read_to_string(&path).expect("golden file; run with UPDATE_GOLDEN=1 to create");
    assert_eq!(rendered, golden);
}

#[test]
fn golden_spot_checks() {
    // Expected values come from reading tests/data/tweets.jsonl in Python.
    let tweets = common::tweets();
    let reputation = common::reputation();
    let x = |id: &str| {
        let t = tweets.iter().find(|t| t.id == id).unwrap();
        FeatureExtractor::default().extract(t, &reputation, common::now())
    };
    let first = x("4001");
    assert_eq!(first.get(Feature::url_count), 1.0);
    assert_eq!(first.get(Feature::mean_wot_score), 78.0);
    assert_eq!(first.get(Feature::has_reputation_data), 1.0);
    assert_eq!(first.get(Feature::char_count), 114.0);

    let video = x("4008");
    assert_eq!(video.get(Feature::youtube_like_dislike_ratio), 12.5);

    let via = x("4013");
    assert_eq!(via.get(Feature::contains_via), 1.0);
    assert_eq!(via.get(Feature::mention_count), 1.0);

    let stocks = x("4018");
    assert_eq!(stocks.get(Feature::has_stock_symbol), 1.0);

    // blog link's out-of-range WOT score is dropped
    assert_eq!(x("4023").get(Feature::has_reputation_data), 0.0);
}

#[test]
fn schema_partition() {
    use FeatureGroup::*;
    let sizes: Vec<usize> = [Meta, ContentSimple, ContentLinguistic, Author, Network, Links]
        .iter()
        .map(|&g| FeatureSchema::group_size(g))
        .collect();
    assert_eq!(sizes, vec![4, 14, 7, 12, 4, 4]);
    assert_eq!(sizes.iter().sum::<usize>(), FEATURE_COUNT);
}

#[test]
fn fixture_training_set() {
    let set = common::training_set();
    let report = &set.exclusions;
    assert_eq!(report.by_reason.get(&ExclusionReason::Unresolved), Some(&1));
    assert_eq!(report.by_reason.get(&ExclusionReason::Skipped), Some(&1));
    assert_eq!(report.by_reason.get(&ExclusionReason::UnknownTweet), Some(&1));
    assert_eq!(set.len() + report.total_excluded(), report.considered);
    assert_eq!(set.groups.len(), 3);
    let h = set.grade_histogram();
    assert!(h.iter().all(|&c| c > 0), "{h:?}");
}

fn zero_artifact() -> ModelArtifact {
    let v = FeatureSchema::version();
    let model = LinearModel::new(vec![0.0; FEATURE_COUNT], v, TrainerTag::Svmrank).unwrap();
    ModelArtifact::new(model, ScalerParams::identity(v), fit_bins(&[0.0; 7]).unwrap()).unwrap()
}

#[test]
fn zero_model_scores_everything_alike() {
    let a = zero_artifact();
    let ex = FeatureExtractor::default();
    let displays: Vec<(f64, u8)> = common::tweets()
        .iter()
        .map(|t| {
            let s = score_tweet(&a, &ex, t, &NoReputation, common::now()).unwrap();
            (s.raw, s.display)
        })
        .collect();
    assert!(displays.iter().all(|&d| d == (0.0, 1)));
}

#[test]
fn via_weight_raises_the_via_message() {
    let v = FeatureSchema::version();
    let mut w = vec![0.0; FEATURE_COUNT];
    w[Feature::contains_via.index()] = 0.5;
    let model = LinearModel::new(w, v, TrainerTag::Svmrank).unwrap();
    let bins = ScoreBins::new([0.1, 0.2, 0.3, 0.4, 0.45, 0.49]).unwrap();
    let a = ModelArtifact::new(model, ScalerParams::identity(v), bins).unwrap();
    let ex = FeatureExtractor::default();
    let mut plain = common::tweets()[0].clone();
    plain.text = "Shelter open at the school".into();
    let mut via = plain.clone();
    via.text = "Shelter open at the school via".into();
    let s_plain = score_tweet(&a, &ex, &plain, &NoReputation, common::now()).unwrap();
    let s_via = score_tweet(&a, &ex, &via, &NoReputation, common::now()).unwrap();
    assert!(s_via.raw > s_plain.raw);
    assert_eq!(s_via.display, 7);
    // deterministic
    assert_eq!(s_via, score_tweet(&a, &ex, &via, &NoReputation, common::now()).unwrap());
}

#[test]
fn trained_fixture_artifact_scores_fixtures() {
    let groups = groups_from_training_set(&common::training_set());
    let a = train_artifact(&groups, &Trainer::Svmrank(SvmRankOptions::default())).unwrap();
    let ex = FeatureExtractor::default();
    let rep = common::reputation();
    for t in common::tweets() {
        let s = score_tweet(&a, &ex, &t, &rep, common::now()).unwrap();
        assert!((1..=7).contains(&s.display));
        assert_eq!(s.display, a.bins.to_display(s.raw));
        assert_eq!(s.model_version, a.model_version);
    }
}
