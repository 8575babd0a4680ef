//! Templated dialogues whose labels are recoverable from the text.
//!
//! The opponent states its top issue, its least important issue, or an offer
//! claiming its top two issues. The self party talks about its own (different)
//! priorities at a lower rate, so a model has to attend to authorship. With
//! noise, some statements are replaced by small talk.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::adapt::ca::ArgumentSet;
use crate::corpus::dnd::{DndSpeaker, ItemTerms, RawDndDialogue};
use crate::corpus::{partial_view, Author, Instance, Scenario, Source, Utterance};
use crate::error::{Error, Result};
use crate::issue::{Issue, PriorityOrder, DEFAULT_ISSUES};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub count: usize,
    pub utterances_per_dialogue: usize,
    /// Probability that a templated statement is replaced by small talk.
    pub noise: f64,
    /// Probability that a self turn states the self party's own priorities.
    pub self_statement_rate: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            count: 2000,
            utterances_per_dialogue: 10,
            noise: 0.1,
            self_statement_rate: 0.4,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.utterances_per_dialogue < 2 {
            return Err(Error::Argument(
                "synthetic dialogues need at least 2 utterances".into(),
            ));
        }
        for (name, p) in [
            ("noise", self.noise),
            ("self_statement_rate", self.self_statement_rate),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Argument(format!("{name} {p} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

const TOP: [&str; 4] = [
    "i really need {a}",
    "{a} is my top priority",
    "i need {a} the most",
    "we are very short on {a}",
];
const LOW: [&str; 3] = [
    "i do not need much {a}",
    "{a} is the least important to me",
    "we already have plenty of {a}",
];
const MEDIUM: [&str; 2] = ["{a} would be nice to have", "some extra {a} could help"];
const OFFER: [&str; 3] = [
    "i get 3 {a} and 2 {b} , you get the rest",
    "how about i take all the {a} and two {b}",
    "can i have all the {a} and some {b} ?",
];
const SMALL_TALK: [&str; 6] = [
    "hello there",
    "how are you doing ?",
    "sounds good",
    "okay",
    "hmm let me think",
    "that works for me",
];
const QUESTIONS: [&str; 2] = [
    "what do you need the most ?",
    "which item matters least to you ?",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Statement {
    Top,
    Low,
    Offer,
}

struct Rendered {
    text: String,
    tags: Vec<&'static str>,
}

fn fill(template: &str, a: &str, b: &str) -> String {
    template.replace("{a}", a).replace("{b}", b)
}

fn render<R: Rng>(
    kind: Statement,
    order: &PriorityOrder,
    noun: &dyn Fn(Issue, &mut R) -> String,
    rng: &mut R,
) -> Rendered {
    let issues = order.issues();
    match kind {
        Statement::Top => Rendered {
            text: fill(TOP.choose(rng).unwrap(), &noun(issues[0], rng), ""),
            tags: vec!["self-need"],
        },
        Statement::Low => Rendered {
            text: fill(
                LOW.choose(rng).unwrap(),
                &noun(issues[issues.len() - 1], rng),
                "",
            ),
            tags: vec!["no-need"],
        },
        Statement::Offer => {
            let a = noun(issues[0], rng);
            let b = noun(issues[1], rng);
            Rendered {
                text: fill(OFFER.choose(rng).unwrap(), &a, &b),
                tags: vec![],
            }
        }
    }
}

fn small_talk<R: Rng>(rng: &mut R) -> Rendered {
    Rendered {
        text: SMALL_TALK.choose(rng).unwrap().to_string(),
        tags: vec!["small-talk"],
    }
}

fn random_order<R: Rng>(rng: &mut R) -> PriorityOrder {
    let mut v: Vec<usize> = (0..DEFAULT_ISSUES).collect();
    v.shuffle(rng);
    PriorityOrder::from_indices(&v).expect("shuffled permutation")
}

fn resolves(kinds: &[Statement]) -> bool {
    kinds.contains(&Statement::Offer)
        || (kinds.contains(&Statement::Top) && kinds.contains(&Statement::Low))
}

/// Opponent statement kinds; the last one is forced to an offer when the
/// drawn sequence would not pin down the full order.
fn opponent_plan<R: Rng>(n: usize, rng: &mut R) -> Vec<Statement> {
    let all = [Statement::Top, Statement::Low, Statement::Offer];
    let mut kinds: Vec<Statement> = (0..n).map(|_| *all.choose(rng).unwrap()).collect();
    if n > 0 && !resolves(&kinds) {
        kinds[n - 1] = Statement::Offer;
    }
    kinds
}

fn canonical_noun<R: Rng>(issue: Issue, _rng: &mut R) -> String {
    issue.name()
}

/// Deterministic under `(config, seed)`.
pub fn generate_synthetic(config: &SynthConfig, seed: u64) -> Result<Vec<Instance>> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = config.utterances_per_dialogue;
    let mut out = Vec::with_capacity(config.count);
    for i in 0..config.count {
        let opp_order = random_order(&mut rng);
        let self_order = random_order(&mut rng);
        let opp_first = rng.gen_bool(0.5);
        let authors: Vec<Author> = (0..n)
            .map(|j| {
                if (j % 2 == 0) == opp_first {
                    Author::Opponent
                } else {
                    Author::SelfParty
                }
            })
            .collect();
        let n_opp = authors.iter().filter(|a| **a == Author::Opponent).count();
        let mut plan = opponent_plan(n_opp, &mut rng).into_iter();

        let mut utterances = Vec::with_capacity(n);
        for (j, &author) in authors.iter().enumerate() {
            let r = match author {
                Author::Opponent => {
                    let kind = plan.next().expect("one kind per opponent turn");
                    let r = render(kind, &opp_order, &canonical_noun, &mut rng);
                    if rng.gen_bool(config.noise) {
                        small_talk(&mut rng)
                    } else {
                        r
                    }
                }
                Author::SelfParty => {
                    if rng.gen_bool(config.self_statement_rate) {
                        let kind = *[Statement::Top, Statement::Low, Statement::Offer]
                            .choose(&mut rng)
                            .unwrap();
                        render(kind, &self_order, &canonical_noun, &mut rng)
                    } else if j + 1 < n && rng.gen_bool(0.3) {
                        Rendered {
                            text: QUESTIONS.choose(&mut rng).unwrap().to_string(),
                            tags: vec!["elicit-pref"],
                        }
                    } else {
                        small_talk(&mut rng)
                    }
                }
            };
            utterances.push(Utterance::new(author, r.text).with_tags(&r.tags));
        }
        out.push(Instance {
            id: format!("syn{i:06}:a"),
            source: Source::Syn,
            utterances,
            label: opp_order.clone(),
            pair_mask: None,
            scenario: Some(Scenario {
                self_order,
                opp_order,
            }),
        });
    }
    Ok(out)
}

/// Argument triples (High, Medium, Low) phrased with the same templates.
pub fn generate_synthetic_arguments(count: usize, seed: u64) -> Vec<ArgumentSet> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let order = random_order(&mut rng);
            let is = order.issues();
            let high = fill(TOP.choose(&mut rng).unwrap(), &is[0].name(), "");
            let medium = fill(MEDIUM.choose(&mut rng).unwrap(), &is[1].name(), "");
            let low = fill(LOW.choose(&mut rng).unwrap(), &is[2].name(), "");
            ArgumentSet {
                participant_id: format!("synca{i:06}:p"),
                args: [high, medium, low],
                issues: [is[0], is[1], is[2]],
            }
        })
        .collect()
}

/// DealOrNoDeal-style records about books, hats and balls. The reader
/// (`YOU`) makes the informative statements; its values follow the order.
pub fn generate_synthetic_dnd(
    count: usize,
    turns: usize,
    noise: f64,
    seed: u64,
) -> Vec<RawDndDialogue> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dnd_noun = |issue: Issue, rng: &mut ChaCha8Rng| -> String {
        let base = crate::corpus::dnd::DND_ITEMS[issue.0];
        if rng.gen_bool(0.5) {
            format!("{base}s")
        } else {
            base.to_string()
        }
    };
    (0..count)
        .map(|_| {
            let order = random_order(&mut rng);
            let partner_order = random_order(&mut rng);
            let mut values = [0u32; 3];
            for (rank, issue) in order.issues().iter().enumerate() {
                values[issue.0] = [6, 3, 1][rank];
            }
            let mut pvalues = [0u32; 3];
            for (rank, issue) in partner_order.issues().iter().enumerate() {
                pvalues[issue.0] = [6, 3, 1][rank];
            }
            let reader_first = rng.gen_bool(0.5);
            let n_reader = (0..turns).filter(|j| (j % 2 == 0) == reader_first).count();
            let mut plan = opponent_plan(n_reader, &mut rng).into_iter();
            let turns_v = (0..turns)
                .map(|j| {
                    let reader = (j % 2 == 0) == reader_first;
                    if reader {
                        let kind = plan.next().unwrap();
                        let r = render(kind, &order, &dnd_noun, &mut rng);
                        let text = if rng.gen_bool(noise) {
                            small_talk(&mut rng).text
                        } else {
                            r.text
                        };
                        (DndSpeaker::You, text)
                    } else if rng.gen_bool(0.4) {
                        let r = render(Statement::Offer, &partner_order, &dnd_noun, &mut rng);
                        (DndSpeaker::Them, r.text)
                    } else {
                        (DndSpeaker::Them, small_talk(&mut rng).text)
                    }
                })
                .collect();
            RawDndDialogue {
                line: 0,
                reader: [0, 1, 2].map(|i| ItemTerms {
                    count: 1,
                    value: values[i],
                }),
                partner: Some([0, 1, 2].map(|i| ItemTerms {
                    count: 1,
                    value: pvalues[i],
                })),
                turns: turns_v,
            }
        })
        .collect()
}

/// Reads the opponent's statements in a prefix and reconstructs its order.
#[derive(Debug)]
pub struct RuleOracle {
    top: Vec<Regex>,
    low: Vec<Regex>,
    offer: Vec<Regex>,
}

impl Default for RuleOracle {
    fn default() -> Self {
        let compile = |templates: &[&str]| -> Vec<Regex> {
            templates
                .iter()
                .map(|t| {
                    let escaped = regex::escape(t)
                        .replace(r"\{a\}", "(?P<a>[a-z]+)")
                        .replace(r"\{b\}", "(?P<b>[a-z]+)");
                    Regex::new(&format!("^{escaped}$")).expect("template regex")
                })
                .collect()
        };
        Self {
            top: compile(&TOP),
            low: compile(&LOW),
            offer: compile(&OFFER),
        }
    }
}

impl RuleOracle {
    pub fn infer(&self, utterances: &[Utterance]) -> PriorityOrder {
        let mut top: Option<Issue> = None;
        let mut low: Option<Issue> = None;
        let mut second: Option<Issue> = None;
        let issue = |s: &str| s.parse::<Issue>().ok();
        for u in utterances.iter().filter(|u| u.author == Author::Opponent) {
            if let Some(c) = self.top.iter().find_map(|r| r.captures(&u.text)) {
                top = issue(&c["a"]).or(top);
            } else if let Some(c) = self.low.iter().find_map(|r| r.captures(&u.text)) {
                low = issue(&c["a"]).or(low);
            } else if let Some(c) = self.offer.iter().find_map(|r| r.captures(&u.text)) {
                top = issue(&c["a"]).or(top);
                second = issue(&c["b"]).or(second);
            }
        }
        let mut order: Vec<Issue> = Vec::with_capacity(DEFAULT_ISSUES);
        order.extend(top);
        if let Some(s) = second.filter(|s| Some(*s) != top) {
            order.push(s);
        }
        let rest: Vec<Issue> = Issue::all(DEFAULT_ISSUES)
            .filter(|i| !order.contains(i) && Some(*i) != low)
            .collect();
        order.extend(rest);
        if let Some(l) = low.filter(|l| !order.contains(l)) {
            order.push(l);
        }
        PriorityOrder::new(order).unwrap_or_else(|_| PriorityOrder::canonical(DEFAULT_ISSUES))
    }

    pub fn infer_at_k(&self, instance: &Instance, k: usize) -> Result<PriorityOrder> {
        let p = partial_view(instance, k)?;
        Ok(self.infer(p.utterances()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adapt::offer::detect_offer;

    #[test]
    fn deterministic_under_seed() {
        let cfg = SynthConfig {
            count: 10,
            ..SynthConfig::default()
        };
        let a = serde_json::to_string(&generate_synthetic(&cfg, 7).unwrap()).unwrap();
        let b = serde_json::to_string(&generate_synthetic(&cfg, 7).unwrap()).unwrap();
        let c = serde_json::to_string(&generate_synthetic(&cfg, 8).unwrap()).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn noiseless_corpus_is_fully_recoverable() {
        let cfg = SynthConfig {
            count: 500,
            noise: 0.0,
            ..SynthConfig::default()
        };
        let oracle = RuleOracle::default();
        for inst in generate_synthetic(&cfg, 3).unwrap() {
            inst.validate().unwrap();
            assert_eq!(oracle.infer(&inst.utterances), inst.label, "{}", inst.id);
        }
    }

    #[test]
    fn labels_are_uniform_over_orders() {
        let cfg = SynthConfig {
            count: 2000,
            ..SynthConfig::default()
        };
        let corpus = generate_synthetic(&cfg, 11).unwrap();
        let orders = PriorityOrder::all_orders(3);
        for o in &orders {
            let freq = corpus.iter().filter(|i| &i.label == o).count() as f64 / 2000.0;
            assert!((freq - 1.0 / 6.0).abs() <= 0.03, "{o}: {freq}");
        }
    }

    #[test]
    fn templates_classify_as_intended() {
        for t in OFFER {
            assert!(detect_offer(&fill(t, "food", "water")), "{t}");
        }
        for t in SMALL_TALK.iter().chain(&QUESTIONS) {
            assert!(!detect_offer(t), "{t}");
        }
    }

    #[test]
    fn synthetic_arguments_follow_priorities() {
        let sets = generate_synthetic_arguments(20, 1);
        for s in sets {
            assert!(s.args[0].contains(&s.issues[0].name()));
            assert!(s.args[2].contains(&s.issues[2].name()));
        }
    }

    #[test]
    fn synthetic_dnd_values_are_distinct() {
        for d in generate_synthetic_dnd(30, 6, 0.0, 2) {
            let v = d.reader_values();
            assert!(v[0] != v[1] && v[1] != v[2] && v[0] != v[2]);
            assert_eq!(d.turns.len(), 6);
        }
    }
}
