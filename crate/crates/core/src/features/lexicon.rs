use std::collections::HashSet;
use std::path::Path;

use super::FeatureError;

/// Case-insensitive word list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lexicon {
    name: String,
    words: HashSet<String>,
}

impl Lexicon {
    /// Parses the lexicon file format: one word per line, `#` starts a
    /// comment, blank lines ignored.
    pub fn parse(name: impl Into<String>, body: &str) -> Result<Self, FeatureError> {
        let name = name.into();
        let words: HashSet<String> = body
            .lines()
            .map(|l| l.split('#').next().unwrap_or("").trim())
            .filter(|l| !l.is_empty())
            .map(str::to_lowercase)
            .collect();
        if words.is_empty() {
            return Err(FeatureError::EmptyLexicon(name));
        }
        Ok(Self { name, words })
    }

    pub fn load(name: impl Into<String>, path: impl AsRef<Path>) -> Result<Self, FeatureError> {
        let body = std::fs::read_to_string(path.as_ref())?;
        Self::parse(name, &body)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// `word` must already be lowercase.
    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(word)
    }

    pub fn count_in<'a>(&self, words: impl IntoIterator<Item = &'a str>) -> usize {
        words.into_iter().filter(|w| self.contains(w)).count()
    }
}

/// The seven word lists used by the linguistic feature group.
#[derive(Debug, Clone)]
pub struct Lexicons {
    pub swear: Lexicon,
    pub negative_emotion: Lexicon,
    pub positive_emotion: Lexicon,
    pub pronoun: Lexicon,
    pub self_words: Lexicon,
    pub negation: Lexicon,
    pub intensifier: Lexicon,
}

impl Lexicons {
    pub const FILES: [&'static str; 7] = [
        "swear",
        "negative_emotion",
        "positive_emotion",
        "pronoun",
        "self",
        "negation",
        "intensifier",
    ];

    pub fn bundled() -> Self {
        let b = |name: &str, body: &str| Lexicon::parse(name, body).expect("bundled lexicon");
        Self {
            swear: b("swear", include_str!("../../lexicons/swear.txt")),
            negative_emotion: b("negative_emotion", include_str!("../../lexicons/negative_emotion.txt")),
            positive_emotion: b("positive_emotion", include_str!("../../lexicons/positive_emotion.txt")),
            pronoun: b("pronoun", include_str!("../../lexicons/pronoun.txt")),
            self_words: b("self", include_str!("../../lexicons/self.txt")),
            negation: b("negation", include_str!("../../lexicons/negation.txt")),
            intensifier: b("intensifier", include_str!("../../lexicons/intensifier.txt")),
        }
    }

    /// Starts from the bundled lists and replaces any for which
    /// `<dir>/<name>.txt` exists.
    pub fn with_overrides(dir: impl AsRef<Path>) -> Result<Self, FeatureError> {
        let dir = dir.as_ref();
        let mut out = Self::bundled();
        for name in Self::FILES {
            let path = dir.join(format!("{name}.txt"));
            if !path.exists() {
                continue;
            }
            let lex = Lexicon::load(name, &path)?;
            match name {
                "swear" => out.swear = lex,
                "negative_emotion" => out.negative_emotion = lex,
                "positive_emotion" => out.positive_emotion = lex,
                "pronoun" => out.pronoun = lex,
                "self" => out.self_words = lex,
                "negation" => out.negation = lex,
                "intensifier" => out.intensifier = lex,
                _ => unreachable!(),
            }
        }
        Ok(out)
    }
}

impl Default for Lexicons {
    fn default() -> Self {
        Self::bundled()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_normalizes_and_skips_comments() {
        let lex = Lexicon::parse("t", "# header\nDamn\n\n  hell  # trailing\n").unwrap();
        assert_eq!(lex.len(), 2);
        assert!(lex.contains("damn"));
        assert!(lex.contains("hell"));
        assert_eq!(lex.count_in(["damn", "ok", "hell", "damn"]), 3);
    }

    #[test]
    fn empty_lexicon_rejected() {
        assert!(matches!(
            Lexicon::parse("empty", "# nothing\n\n"),
            Err(FeatureError::EmptyLexicon(_))
        ));
    }

    #[test]
    fn overrides_replace_only_present_files() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("swear.txt"), "heck\n").unwrap();
        let lex = Lexicons::with_overrides(dir.path()).unwrap();
        assert_eq!(lex.swear.len(), 1);
        assert!(lex.swear.contains("heck"));
        assert_eq!(lex.pronoun, Lexicons::bundled().pronoun);
    }
}
