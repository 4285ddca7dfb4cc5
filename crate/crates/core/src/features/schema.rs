use std::fmt;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const FEATURE_COUNT: usize = 45;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureGroup {
    Meta,
    ContentSimple,
    ContentLinguistic,
    Author,
    Network,
    Links,
}

impl FeatureGroup {
    pub const ALL: [FeatureGroup; 6] = [
        FeatureGroup::Meta,
        FeatureGroup::ContentSimple,
        FeatureGroup::ContentLinguistic,
        FeatureGroup::Author,
        FeatureGroup::Network,
        FeatureGroup::Links,
    ];
}

impl fmt::Display for FeatureGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FeatureGroup::Meta => "meta",
            FeatureGroup::ContentSimple => "content-simple",
            FeatureGroup::ContentLinguistic => "content-linguistic",
            FeatureGroup::Author => "author",
            FeatureGroup::Network => "network",
            FeatureGroup::Links => "links",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FeatureDef {
    pub name: &'static str,
    pub group: FeatureGroup,
    pub description: &'static str,
}

macro_rules! feature_defs {
    ($( $group:ident { $( $name:ident => $desc:literal ),* $(,)? } )*) => {
        /// Slot indices into a [`FeatureVector`](super::FeatureVector).
        #[allow(non_camel_case_types)]
        #[derive(Debug, Clone, Copy, PartialEq, Eq)]
        #[repr(usize)]
        pub enum Feature { $( $( $name, )* )* }

        const DEFS: [FeatureDef; FEATURE_COUNT] = [
            $( $( FeatureDef {
                name: stringify!($name),
                group: FeatureGroup::$group,
                description: $desc,
            }, )* )*
        ];
    };
}

feature_defs! {
    Meta {
        age_seconds => "Seconds between posting and extraction",
        source_is_web => "Posting client looks like a web client",
        source_is_mobile => "Posting client looks like a mobile client",
        has_geo => "Message carries geo-coordinates",
    }
    ContentSimple {
        char_count => "Number of characters",
        word_count => "Number of whitespace-separated words",
        url_count => "Number of URLs",
        hashtag_count => "Number of hashtags",
        unique_char_count => "Number of distinct characters",
        has_stock_symbol => "Contains a $SYMBOL",
        has_happy_emoticon => "Contains a happy emoticon",
        has_sad_emoticon => "Contains a sad emoticon",
        contains_via => "Contains the word 'via'",
        contains_colon => "Contains a colon outside URLs",
        exclamation_count => "Number of '!'",
        question_mark_count => "Number of '?'",
        uppercase_ratio => "Uppercase letters over all letters",
        digit_ratio => "Digits over all characters",
    }
    ContentLinguistic {
        swear_count => "Words from the swear lexicon",
        negative_emotion_count => "Words from the negative-emotion lexicon",
        positive_emotion_count => "Words from the positive-emotion lexicon",
        pronoun_count => "Pronouns",
        self_word_count => "First-person singular words (I, my, mine...)",
        negation_count => "Negations",
        intensifier_count => "Intensifiers",
    }
    Author {
        followers_count => "Author followers",
        friends_count => "Accounts the author follows",
        statuses_count => "Messages posted by the author",
        listed_count => "Lists the author appears on",
        is_verified => "Author is verified",
        account_age_days => "Days between account creation and extraction",
        has_location => "Profile has a location",
        has_description => "Profile has a description",
        has_profile_url => "Profile has a URL",
        follower_friend_ratio => "followers / friends",
        statuses_per_day => "statuses / account age in days at posting time",
        statuses_follower_ratio => "statuses / followers",
    }
    Network {
        retweet_count => "Times the message was reshared",
        mention_count => "Number of @mentions",
        is_reply => "Message is a reply",
        is_retweet => "Message is a reshare",
    }
    Links {
        mean_wot_score => "Mean WOT reputation over URLs with data",
        min_wot_score => "Minimum WOT reputation over URLs with data",
        youtube_like_dislike_ratio => "Mean like/dislike ratio over video URLs with data",
        has_reputation_data => "At least one URL had reputation data",
    }
}

impl Feature {
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        DEFS[self as usize].name
    }
}

/// The frozen, ordered 45-slot feature layout.
#[derive(Debug, Clone, Copy)]
pub struct FeatureSchema;

impl FeatureSchema {
    pub fn defs() -> &'static [FeatureDef; FEATURE_COUNT] {
        &DEFS
    }

    pub fn group_size(group: FeatureGroup) -> usize {
        DEFS.iter().filter(|d| d.group == group).count()
    }

    pub fn position(name: &str) -> Option<usize> {
        DEFS.iter().position(|d| d.name == name)
    }

    /// Canonical machine-readable form; this is what `docs/feature-schema.json`
    /// contains and what the version hash covers.
    pub fn to_json() -> String {
        #[derive(Serialize)]
        struct Doc<'a> {
            features: &'a [FeatureDef],
        }
        let mut out = serde_json::to_string_pretty(&Doc { features: &DEFS }).unwrap();
        out.push('\n');
        out
    }

    /// Content hash of the schema document, used as `schema_version`
    /// everywhere a vector or model is persisted.
    pub fn version() -> &'static str {
        static VERSION: OnceLock<String> = OnceLock::new();
        VERSION.get_or_init(|| {
            let digest = Sha256::digest(Self::to_json().as_bytes());
            format!("fs-{}", &hex::encode(digest)[..16])
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn group_sizes_partition_45() {
        let expected = [
            (FeatureGroup::Meta, 4),
            (FeatureGroup::ContentSimple, 14),
            (FeatureGroup::ContentLinguistic, 7),
            (FeatureGroup::Author, 12),
            (FeatureGroup::Network, 4),
            (FeatureGroup::Links, 4),
        ];
        for (g, n) in expected {
            assert_eq!(FeatureSchema::group_size(g), n, "{g}");
        }
        let total: usize = FeatureGroup::ALL.iter().map(|&g| FeatureSchema::group_size(g)).sum();
        assert_eq!(total, FEATURE_COUNT);
    }

    #[test]
    fn names_unique_and_indices_consistent() {
        let names: HashSet<_> = DEFS.iter().map(|d| d.name).collect();
        assert_eq!(names.len(), FEATURE_COUNT);
        assert_eq!(Feature::contains_via.name(), "contains_via");
        assert_eq!(FeatureSchema::position("has_reputation_data"), Some(44));
        assert_eq!(Feature::has_reputation_data.index(), 44);
    }

    #[test]
    fn version_is_stable_hash() {
        let v = FeatureSchema::version();
        assert!(v.starts_with("fs-"));
        assert_eq!(v.len(), 19);
        assert_eq!(v, FeatureSchema::version());
    }

    #[test]
    fn checked_in_schema_document_matches() {
        let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../docs/feature-schema.json");
        if std::env::var_os("UPDATE_SCHEMA_DOC").is_some() {
            std::fs::write(path, FeatureSchema::to_json()).unwrap();
        }
        let doc = std::fs::read_to_string(path).unwrap();
        assert_eq!(doc, FeatureSchema::to_json(), "rerun with UPDATE_SCHEMA_DOC=1");
    }
}
