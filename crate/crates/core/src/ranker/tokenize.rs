//! Word-level tokenizer and vocabulary.

use std::collections::{BTreeMap, HashMap};
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

pub const PAD: usize = 0;
pub const UNK: usize = 1;
pub const SELF_TOKEN: usize = 2;
pub const OPP_TOKEN: usize = 3;
const SPECIALS: [&str; 4] = ["<pad>", "<unk>", "<self>", "<opp>"];

fn token_pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"[a-z0-9]+(?:'[a-z]+)?|[^\sa-z0-9]").expect("token pattern"))
}

/// Lowercases and splits into words, numbers and single punctuation marks.
pub fn tokenize(text: &str) -> Vec<String> {
    let lower = text.to_lowercase();
    token_pattern()
        .find_iter(&lower)
        .map(|m| m.as_str().to_string())
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl From<Vec<String>> for Vocab {
    fn from(tokens: Vec<String>) -> Self {
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Self { tokens, index }
    }
}

impl From<Vocab> for Vec<String> {
    fn from(v: Vocab) -> Self {
        v.tokens
    }
}

impl Vocab {
    /// Tokens seen at least `min_freq` times, most frequent first, ties in
    /// lexicographic order, after the four special tokens.
    pub fn build<'a>(texts: impl IntoIterator<Item = &'a str>, min_freq: usize) -> Self {
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        for text in texts {
            for tok in tokenize(text) {
                *counts.entry(tok).or_default() += 1;
            }
        }
        let mut kept: Vec<(String, usize)> =
            counts.into_iter().filter(|(_, c)| *c >= min_freq).collect();
        kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let tokens = SPECIALS
            .iter()
            .map(|s| s.to_string())
            .chain(kept.into_iter().map(|(t, _)| t))
            .collect::<Vec<_>>();
        tokens.into()
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(UNK)
    }

    pub fn token(&self, id: usize) -> &str {
        &self.tokens[id]
    }

    pub fn encode(&self, text: &str) -> Vec<usize> {
        tokenize(text).iter().map(|t| self.id(t)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splits_punctuation() {
        assert_eq!(tokenize("I need Water!"), vec!["i", "need", "water", "!"]);
        assert_eq!(
            tokenize("i'll take 2,  ok?"),
            vec!["i'll", "take", "2", ",", "ok", "?"]
        );
    }

    #[test]
    fn vocabulary_rules() {
        let v = Vocab::build(["a b b c", "b a d"], 2);
        assert_eq!(v.len(), 6);
        assert_eq!(v.token(4), "b");
        assert_eq!(v.token(5), "a");
        assert_eq!(v.id("c"), UNK);
        assert_eq!(v.encode("B a zzz"), vec![4, 5, UNK]);
        assert_eq!(v.encode("B a zzz"), v.encode("B a zzz"));
    }

    #[test]
    fn serde_round_trip() {
        let v = Vocab::build(["x y x y"], 1);
        let s = serde_json::to_string(&v).unwrap();
        let back: Vocab = serde_json::from_str(&s).unwrap();
        assert_eq!(v, back);
    }
}
