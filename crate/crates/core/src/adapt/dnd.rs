//! Remapping DealOrNoDeal-style records onto the target issue set.
//!
//! The reader agent (`YOU` turns, `<input>` values) is the opponent whose
//! priorities are predicted; the partner is the self party.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use regex::{Captures, Regex};
use serde::{Deserialize, Serialize};

use crate::corpus::dnd::{DndSpeaker, RawDndDialogue, DND_ITEMS};
use crate::corpus::{Author, Instance, Scenario, Source, Utterance};
use crate::error::{Error, Result};
use crate::issue::{Issue, PriorityOrder, DEFAULT_ISSUES};

/// Source noun (singular) → target issue. Index `i` of `pairs` corresponds
/// to value field `i` of the raw record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IssueMapping {
    pub pairs: Vec<(String, Issue)>,
}

impl Default for IssueMapping {
    fn default() -> Self {
        Self {
            pairs: DND_ITEMS
                .iter()
                .enumerate()
                .map(|(i, n)| (n.to_string(), Issue(i)))
                .collect(),
        }
    }
}

impl IssueMapping {
    /// A uniformly drawn bijection.
    pub fn random(seed: u64) -> Self {
        let mut targets: Vec<Issue> = Issue::all(DEFAULT_ISSUES).collect();
        targets.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        Self {
            pairs: DND_ITEMS
                .iter()
                .zip(targets)
                .map(|(n, t)| (n.to_string(), t))
                .collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let sources: HashSet<&str> = self.pairs.iter().map(|(s, _)| s.as_str()).collect();
        let targets: HashSet<Issue> = self.pairs.iter().map(|(_, t)| *t).collect();
        let ok = self.pairs.len() == DEFAULT_ISSUES
            && sources.len() == DEFAULT_ISSUES
            && targets.len() == DEFAULT_ISSUES
            && targets.iter().all(|t| t.0 < DEFAULT_ISSUES);
        if ok {
            Ok(())
        } else {
            Err(Error::Validation(format!(
                "issue mapping is not a bijection onto {DEFAULT_ISSUES} issues: {:?}",
                self.pairs
            )))
        }
    }

    fn pattern(&self) -> Regex {
        let alts: Vec<String> = self
            .pairs
            .iter()
            .map(|(s, _)| format!("{}s?", regex::escape(s)))
            .collect();
        Regex::new(&format!(r"\b({})\b", alts.join("|"))).expect("noun pattern")
    }

    /// Replaces whole-word source nouns (singular or plural) by target names.
    pub fn apply(&self, text: &str) -> String {
        self.pattern()
            .replace_all(text, |c: &Captures| {
                let word = &c[1];
                self.pairs
                    .iter()
                    .find(|(s, _)| word == s || word.strip_suffix('s') == Some(s.as_str()))
                    .map(|(_, t)| t.name())
                    .unwrap_or_else(|| word.to_string())
            })
            .into_owned()
    }

    /// Replaces target names by the singular source nouns.
    pub fn invert(&self, text: &str) -> String {
        let alts: Vec<String> = self
            .pairs
            .iter()
            .map(|(_, t)| regex::escape(&t.name()))
            .collect();
        let re = Regex::new(&format!(r"\b({})\b", alts.join("|"))).expect("target pattern");
        re.replace_all(text, |c: &Captures| {
            self.pairs
                .iter()
                .find(|(_, t)| t.name() == c[1])
                .map(|(s, _)| s.clone())
                .unwrap_or_else(|| c[1].to_string())
        })
        .into_owned()
    }

    fn order_from_values(&self, values: [u32; 3]) -> Result<PriorityOrder> {
        let mut target_values = vec![0.0; DEFAULT_ISSUES];
        for (i, (_, t)) in self.pairs.iter().enumerate() {
            target_values[t.0] = f64::from(values[i]);
        }
        Ok(PriorityOrder::from_values(&target_values))
    }
}

/// At least 4 utterances and pairwise distinct reader values.
pub fn filter_dnd(raw: &RawDndDialogue) -> bool {
    let [a, b, c] = raw.reader_values();
    raw.turns.len() >= 4 && a != b && b != c && a != c
}

/// Canonical instance for the reader's perspective. Texts are remapped,
/// the label follows the reader's values and turn count is preserved.
pub fn remap_dnd(raw: &RawDndDialogue, mapping: &IssueMapping, id: &str) -> Result<Instance> {
    mapping.validate()?;
    let utterances = raw
        .turns
        .iter()
        .map(|(speaker, text)| {
            let author = match speaker {
                DndSpeaker::You => Author::Opponent,
                DndSpeaker::Them => Author::SelfParty,
            };
            Utterance::new(author, mapping.apply(text))
        })
        .collect();
    let label = mapping.order_from_values(raw.reader_values())?;
    let scenario = match raw.partner {
        Some(p) => Some(Scenario {
            self_order: mapping.order_from_values([p[0].value, p[1].value, p[2].value])?,
            opp_order: label.clone(),
        }),
        None => None,
    };
    Ok(Instance {
        id: id.to_string(),
        source: Source::Dnd,
        utterances,
        label,
        pair_mask: None,
        scenario,
    })
}
