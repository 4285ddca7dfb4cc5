//! Crowd annotation aggregation: three votes per message, two steps.
//!
//! Step 1 asks whether a message is informative about its event
//! ([`Relatedness`]); messages that resolve to `R1` get a second round of
//! votes on [`Credibility`]. Majorities map to training grades 1–5.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{FeatureExtractor, FeatureVector, ReputationLookup};
use crate::tweet::TweetRecord;

pub const VOTES_PER_STEP: usize = 3;
pub const DEFAULT_EVENT: &str = "default";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LabelError {
    #[error("expected {VOTES_PER_STEP} votes, got {0}")]
    WrongArity(usize),
    #[error("skip label")]
    SkipLabel,
    #[error("informative message without a credibility label")]
    MissingCredibilityLabel,
    #[error("credibility label given for a message that is not informative")]
    UnexpectedCredibilityLabel,
    #[error("unknown label `{0}`")]
    UnknownLabel(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Relatedness {
    /// Contains information about the event.
    R1,
    /// Related to the event, no information.
    R2,
    /// Unrelated.
    R3,
    /// Skip.
    R4,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Credibility {
    /// Definitely credible.
    C1,
    /// Seems credible.
    C2,
    /// Definitely incredible.
    C3,
    /// Skip.
    C4,
}

impl FromStr for Relatedness {
    type Err = LabelError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "R1" => Ok(Self::R1),
            "R2" => Ok(Self::R2),
            "R3" => Ok(Self::R3),
            "R4" => Ok(Self::R4),
            _ => Err(LabelError::UnknownLabel(s.to_string())),
        }
    }
}

impl FromStr for Credibility {
    type Err = LabelError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "C1" => Ok(Self::C1),
            "C2" => Ok(Self::C2),
            "C3" => Ok(Self::C3),
            "C4" => Ok(Self::C4),
            _ => Err(LabelError::UnknownLabel(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Vote<L> {
    Majority(L),
    Unresolved,
}

/// Label chosen by at least two of three voters. Order of `votes` is
/// irrelevant.
pub fn majority_vote<L: Copy + Eq>(votes: &[L]) -> Result<Vote<L>, LabelError> {
    if votes.len() != VOTES_PER_STEP {
        return Err(LabelError::WrongArity(votes.len()));
    }
    let winner = votes
        .iter()
        .find(|&&v| votes.iter().filter(|&&w| w == v).count() >= 2);
    Ok(match winner {
        Some(&l) => Vote::Majority(l),
        None => Vote::Unresolved,
    })
}

/// (R1,C1)→5, (R1,C2)→4, (R1,C3)→3, R2→2, R3→1.
pub fn map_to_grade(r: Relatedness, c: Option<Credibility>) -> Result<u8, LabelError> {
    use Credibility::*;
    use Relatedness::*;
    match (r, c) {
        (R4, _) | (R1, Some(C4)) => Err(LabelError::SkipLabel),
        (R1, None) => Err(LabelError::MissingCredibilityLabel),
        (R1, Some(C1)) => Ok(5),
        (R1, Some(C2)) => Ok(4),
        (R1, Some(C3)) => Ok(3),
        (R2 | R3, Some(_)) => Err(LabelError::UnexpectedCredibilityLabel),
        (R2, None) => Ok(2),
        (R3, None) => Ok(1),
    }
}

/// One line of the annotation file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub tweet_id: String,
    pub step: u8,
    pub annotator_id: String,
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub event_id: Option<String>,
}

#[derive(Debug, Error)]
pub enum AnnotationError {
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub fn parse_annotations(body: &str) -> Result<Vec<AnnotationRecord>, AnnotationError> {
    let mut out = Vec::new();
    for (i, line) in body.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |reason: String| AnnotationError::Malformed { line: i + 1, reason };
        let rec: AnnotationRecord = serde_json::from_str(line).map_err(|e| malformed(e.to_string()))?;
        match rec.step {
            1 => {
                rec.label.parse::<Relatedness>().map_err(|e| malformed(e.to_string()))?;
            }
            2 => {
                rec.label.parse::<Credibility>().map_err(|e| malformed(e.to_string()))?;
            }
            s => return Err(malformed(format!("step must be 1 or 2, got {s}"))),
        }
        out.push(rec);
    }
    Ok(out)
}

pub fn load_annotations(path: impl AsRef<Path>) -> Result<Vec<AnnotationRecord>, AnnotationError> {
    parse_annotations(&std::fs::read_to_string(path)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledExample {
    pub tweet_id: String,
    pub event_id: String,
    pub grade: u8,
    pub features: FeatureVector,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExclusionReason {
    WrongArity,
    Unresolved,
    Skipped,
    MissingCredibilityVotes,
    UnknownTweet,
    ConflictingEvent,
}

impl fmt::Display for ExclusionReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).unwrap();
        f.write_str(s.as_str().unwrap())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExclusionReport {
    pub considered: usize,
    pub included: usize,
    pub by_reason: BTreeMap<ExclusionReason, usize>,
    pub excluded: Vec<(String, ExclusionReason)>,
}

impl ExclusionReport {
    fn exclude(&mut self, tweet_id: &str, reason: ExclusionReason) {
        *self.by_reason.entry(reason).or_default() += 1;
        self.excluded.push((tweet_id.to_string(), reason));
    }

    pub fn total_excluded(&self) -> usize {
        self.excluded.len()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingSet {
    /// event id → examples, in annotation order.
    pub groups: BTreeMap<String, Vec<LabeledExample>>,
    pub exclusions: ExclusionReport,
}

impl TrainingSet {
    pub fn from_examples(examples: Vec<LabeledExample>) -> Self {
        let mut groups: BTreeMap<String, Vec<LabeledExample>> = BTreeMap::new();
        for ex in examples {
            groups.entry(ex.event_id.clone()).or_default().push(ex);
        }
        Self {
            groups,
            exclusions: ExclusionReport::default(),
        }
    }

    pub fn examples(&self) -> impl Iterator<Item = &LabeledExample> {
        self.groups.values().flatten()
    }

    pub fn len(&self) -> usize {
        self.groups.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Counts of grades 1..=5 at indices 0..=4.
    pub fn grade_histogram(&self) -> [usize; 5] {
        let mut h = [0; 5];
        for ex in self.examples() {
            h[usize::from(ex.grade) - 1] += 1;
        }
        h
    }

    pub fn write_jsonl(&self, mut w: impl Write) -> std::io::Result<()> {
        for ex in self.examples() {
            serde_json::to_writer(&mut w, ex)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl(r: impl std::io::Read) -> Result<Self, AnnotationError> {
        let mut examples = Vec::new();
        for (i, line) in BufReader::new(r).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let ex: LabeledExample = serde_json::from_str(&line).map_err(|e| AnnotationError::Malformed {
                line: i + 1,
                reason: e.to_string(),
            })?;
            if !(1..=5).contains(&ex.grade) {
                return Err(AnnotationError::Malformed {
                    line: i + 1,
                    reason: format!("grade {} outside 1..=5", ex.grade),
                });
            }
            examples.push(ex);
        }
        Ok(Self::from_examples(examples))
    }
}

#[derive(Default)]
struct Votes {
    event: Option<String>,
    conflicting_event: bool,
    relatedness: Vec<Relatedness>,
    credibility: Vec<Credibility>,
}

fn grade_for(votes: &Votes) -> Result<u8, ExclusionReason> {
    let r = match majority_vote(&votes.relatedness) {
        Err(_) => return Err(ExclusionReason::WrongArity),
        Ok(Vote::Unresolved) => return Err(ExclusionReason::Unresolved),
        Ok(Vote::Majority(Relatedness::R4)) => return Err(ExclusionReason::Skipped),
        Ok(Vote::Majority(r)) => r,
    };
    // Second-step votes only matter for informative messages.
    let c = if r == Relatedness::R1 {
        if votes.credibility.is_empty() {
            return Err(ExclusionReason::MissingCredibilityVotes);
        }
        match majority_vote(&votes.credibility) {
            Err(_) => return Err(ExclusionReason::WrongArity),
            Ok(Vote::Unresolved) => return Err(ExclusionReason::Unresolved),
            Ok(Vote::Majority(c)) => Some(c),
        }
    } else {
        None
    };
    map_to_grade(r, c).map_err(|e| match e {
        LabelError::SkipLabel => ExclusionReason::Skipped,
        LabelError::MissingCredibilityLabel => ExclusionReason::MissingCredibilityVotes,
        _ => ExclusionReason::Unresolved,
    })
}

/// Aggregates annotations into graded examples. Problem messages are
/// excluded and counted; the batch never aborts.
pub fn build_training_set(
    annotations: &[AnnotationRecord],
    tweets: &HashMap<String, TweetRecord>,
    extractor: &FeatureExtractor,
    reputation: &dyn ReputationLookup,
    now: DateTime<Utc>,
) -> TrainingSet {
    let mut order: Vec<&str> = Vec::new();
    let mut by_tweet: HashMap<&str, Votes> = HashMap::new();
    for a in annotations {
        let votes = by_tweet.entry(a.tweet_id.as_str()).or_insert_with(|| {
            order.push(a.tweet_id.as_str());
            Votes::default()
        });
        if let Some(ev) = &a.event_id {
            match &votes.event {
                Some(existing) if existing != ev => votes.conflicting_event = true,
                Some(_) => {}
                None => votes.event = Some(ev.clone()),
            }
        }
        // Labels were validated when the file was parsed; anything else is
        // dropped here and surfaces as an arity problem.
        match a.step {
            1 => votes.relatedness.extend(a.label.parse::<Relatedness>().ok()),
            2 => votes.credibility.extend(a.label.parse::<Credibility>().ok()),
            _ => {}
        }
    }

    let mut out = TrainingSet::default();
    for id in order {
        let votes = &by_tweet[id];
        out.exclusions.considered += 1;
        if votes.conflicting_event {
            out.exclusions.exclude(id, ExclusionReason::ConflictingEvent);
            continue;
        }
        let grade = match grade_for(votes) {
            Ok(g) => g,
            Err(reason) => {
                out.exclusions.exclude(id, reason);
                continue;
            }
        };
        let Some(tweet) = tweets.get(id) else {
            out.exclusions.exclude(id, ExclusionReason::UnknownTweet);
            continue;
        };
        let event_id = votes.event.clone().unwrap_or_else(|| DEFAULT_EVENT.to_string());
        out.groups.entry(event_id.clone()).or_default().push(LabeledExample {
            tweet_id: id.to_string(),
            event_id,
            grade,
            features: extractor.extract(tweet, reputation, now),
        });
        out.exclusions.included += 1;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::NoReputation;
    use crate::tweet::AuthorRecord;
    use chrono::TimeZone;
    use proptest::prelude::*;
    use Credibility::*;
    use Relatedness::*;

    #[test]
    fn majority_cases() {
        assert_eq!(majority_vote(&[R1, R1, R2]).unwrap(), Vote::Majority(R1));
        assert_eq!(majority_vote(&[C2, C2, C2]).unwrap(), Vote::Majority(C2));
        assert_eq!(majority_vote(&[R1, R2, R3]).unwrap(), Vote::Unresolved);
        assert_eq!(majority_vote(&[R1, R1]), Err(LabelError::WrongArity(2)));
        assert_eq!(majority_vote::<Relatedness>(&[]), Err(LabelError::WrongArity(0)));
    }

    #[test]
    fn grade_mapping_errors() {
        assert_eq!(map_to_grade(R1, Some(C4)), Err(LabelError::SkipLabel));
        assert_eq!(map_to_grade(R4, None), Err(LabelError::SkipLabel));
        assert_eq!(map_to_grade(R1, None), Err(LabelError::MissingCredibilityLabel));
        assert_eq!(map_to_grade(R2, Some(C1)), Err(LabelError::UnexpectedCredibilityLabel));
    }

    fn rel(v: u8) -> impl Strategy<Value = Relatedness> {
        let _ = v;
        prop_oneof![Just(R1), Just(R2), Just(R3), Just(R4)]
    }

    proptest! {
        #[test]
        fn vote_order_does_not_matter(a in rel(0), b in rel(1), c in rel(2)) {
            let base = majority_vote(&[a, b, c]).unwrap();
            for p in [[a, c, b], [b, a, c], [b, c, a], [c, a, b], [c, b, a]] {
                prop_assert_eq!(majority_vote(&p).unwrap(), base);
            }
        }
    }

    fn ann(id: &str, step: u8, who: &str, label: &str) -> AnnotationRecord {
        AnnotationRecord {
            tweet_id: id.into(),
            step,
            annotator_id: who.into(),
            label: label.into(),
            event_id: Some("storm".into()),
        }
    }

    fn tweets(ids: &[&str]) -> HashMap<String, TweetRecord> {
        let at = Utc.with_ymd_and_hms(2013, 5, 20, 20, 0, 0).unwrap();
        ids.iter()
            .map(|id| {
                let t = TweetRecord {
                    id: id.to_string(),
                    text: format!("update {id}"),
                    created_at: at,
                    source_label: "web".into(),
                    has_geo: false,
                    urls: vec![],
                    hashtag_count: 0,
                    mention_count: 0,
                    stock_symbol_count: 0,
                    retweet_count: 0,
                    is_retweet: false,
                    is_reply: false,
                    author: AuthorRecord {
                        followers_count: 1,
                        friends_count: 1,
                        statuses_count: 1,
                        listed_count: 0,
                        verified: false,
                        created_at: at,
                        location: None,
                        description: None,
                        profile_url: None,
                    },
                };
                (id.to_string(), t)
            })
            .collect()
    }

    fn run(anns: &[AnnotationRecord], ids: &[&str]) -> TrainingSet {
        let now = Utc.with_ymd_and_hms(2013, 6, 1, 0, 0, 0).unwrap();
        build_training_set(anns, &tweets(ids), &FeatureExtractor::default(), &NoReputation, now)
    }

    fn three(id: &str, step: u8, labels: [&str; 3]) -> Vec<AnnotationRecord> {
        labels
            .iter()
            .enumerate()
            .map(|(i, l)| ann(id, step, &format!("w{i}"), l))
            .collect()
    }

    #[test]
    fn two_step_aggregation() {
        let mut anns = three("a", 1, ["R1", "R1", "R1"]);
        anns.extend(three("a", 2, ["C2", "C2", "C3"]));
        anns.extend(three("b", 1, ["R3", "R3", "R1"]));
        anns.extend(three("c", 1, ["R1", "R2", "R3"]));
        anns.extend(three("d", 1, ["R4", "R4", "R1"]));
        anns.extend(three("e", 1, ["R1", "R1", "R2"]));
        let set = run(&anns, &["a", "b", "c", "d", "e"]);

        let storm = &set.groups["storm"];
        let grades: Vec<_> = storm.iter().map(|e| (e.tweet_id.as_str(), e.grade)).collect();
        assert_eq!(grades, vec![("a", 4), ("b", 1)]);
        let r = &set.exclusions;
        assert_eq!(r.considered, 5);
        assert_eq!(r.included, 2);
        assert_eq!(r.by_reason[&ExclusionReason::Unresolved], 1);
        assert_eq!(r.by_reason[&ExclusionReason::Skipped], 1);
        assert_eq!(r.by_reason[&ExclusionReason::MissingCredibilityVotes], 1);
        assert_eq!(set.grade_histogram(), [1, 0, 0, 1, 0]);
    }

    #[test]
    fn unknown_tweets_and_arity_problems_are_excluded() {
        let mut anns = three("x", 1, ["R2", "R2", "R2"]);
        anns.extend(three("y", 1, ["R2", "R2", "R2"]));
        anns.push(ann("y", 1, "w9", "R2"));
        let set = run(&anns, &["y"]);
        assert!(set.is_empty());
        assert_eq!(set.exclusions.by_reason[&ExclusionReason::UnknownTweet], 1);
        assert_eq!(set.exclusions.by_reason[&ExclusionReason::WrongArity], 1);
    }

    #[test]
    fn conflicting_events_are_excluded() {
        let mut anns = three("a", 1, ["R2", "R2", "R2"]);
        anns[2].event_id = Some("other".into());
        let set = run(&anns, &["a"]);
        assert_eq!(set.exclusions.excluded, vec![("a".to_string(), ExclusionReason::ConflictingEvent)]);
    }

    #[test]
    fn no_high_grade_without_informative_majority() {
        // credibility votes on a non-informative message are ignored
        let mut anns = three("a", 1, ["R2", "R2", "R1"]);
        anns.extend(three("a", 2, ["C1", "C1", "C1"]));
        let set = run(&anns, &["a"]);
        assert_eq!(set.groups["storm"][0].grade, 2);
    }

    #[test]
    fn annotation_file_validation() {
        let ok = "{\"tweet_id\":\"1\",\"step\":1,\"annotator_id\":\"a\",\"label\":\"R1\"}\n";
        assert_eq!(parse_annotations(ok).unwrap().len(), 1);
        let bad_label = "{\"tweet_id\":\"1\",\"step\":2,\"annotator_id\":\"a\",\"label\":\"R1\"}\n";
        assert!(matches!(parse_annotations(bad_label), Err(AnnotationError::Malformed { line: 1, .. })));
        let bad_step = "\n{\"tweet_id\":\"1\",\"step\":3,\"annotator_id\":\"a\",\"label\":\"R1\"}\n";
        assert!(matches!(parse_annotations(bad_step), Err(AnnotationError::Malformed { line: 2, .. })));
    }

    #[test]
    fn training_file_round_trip() {
        let mut anns = three("a", 1, ["R2", "R2", "R2"]);
        anns.extend(three("b", 1, ["R3", "R3", "R3"]));
        let set = run(&anns, &["a", "b"]);
        let mut buf = Vec::new();
        set.write_jsonl(&mut buf).unwrap();
        let back = TrainingSet::read_jsonl(buf.as_slice()).unwrap();
        assert_eq!(back.groups, set.groups);
    }
}
