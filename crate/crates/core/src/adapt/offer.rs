//! Offer detection and utterance categories.

use serde::{Deserialize, Serialize};

use crate::corpus::Utterance;

/// An utterance is an offer when it contains at least three distinct
/// phrases from this list.
pub const OFFER_PHRASES: [&str; 17] = [
    "0",
    "1",
    "2",
    "3",
    "one",
    "two",
    "three",
    "all the",
    "food",
    "water",
    "firewood",
    "i get",
    "you get",
    "what if",
    "i take",
    "you can take",
    "can do",
];

/// Strategy tags that mark a preference statement.
pub const PREFERENCE_TAGS: [&str; 3] = ["self-need", "other-need", "no-need"];

pub fn offer_phrase_count(text: &str) -> usize {
    let lower = text.to_lowercase();
    OFFER_PHRASES.iter().filter(|p| lower.contains(*p)).count()
}

pub fn detect_offer(text: &str) -> bool {
    offer_phrase_count(text) >= 3
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Preference,
    Offer,
    Other,
}

impl Category {
    pub const ALL: [Category; 3] = [Category::Preference, Category::Offer, Category::Other];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Category::Preference => "preference",
            Category::Offer => "offer",
            Category::Other => "other",
        }
    }
}

/// Preference tags win over the offer rule.
pub fn tag_utterance_category(u: &Utterance) -> Category {
    if PREFERENCE_TAGS.iter().any(|t| u.has_tag(t)) {
        Category::Preference
    } else if detect_offer(&u.text) {
        Category::Offer
    } else {
        Category::Other
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Author;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        assert!(detect_offer("i get 2 food and you get 1 water"));
        assert!(!detect_offer("hello how are you"));
        assert!(detect_offer("what if i take one firewood"));
        assert!(detect_offer("WHAT IF I TAKE ONE FIREWOOD"));
        // repeated phrases count once
        assert!(!detect_offer("food food food water"));
    }

    #[test]
    fn categories() {
        let offer = "you can take all the firewood, i take three food";
        let tagged = Utterance::new(Author::Opponent, offer).with_tags(&["Self-Need"]);
        assert_eq!(tag_utterance_category(&tagged), Category::Preference);
        let plain = Utterance::new(Author::Opponent, offer);
        assert_eq!(tag_utterance_category(&plain), Category::Offer);
        let chat = Utterance::new(Author::Opponent, "hi there, how is camping?");
        assert_eq!(tag_utterance_category(&chat), Category::Other);
    }

    proptest! {
        #[test]
        fn case_insensitive(s in "[a-zA-Z0-9 ]{0,40}") {
            prop_assert_eq!(detect_offer(&s), detect_offer(&s.to_uppercase()));
            prop_assert_eq!(detect_offer(&s), detect_offer(&s));
        }
    }
}
