//! Canonical dialogue data model, ingestion and partial views.

pub mod casino;
pub mod dnd;
pub mod folds;
pub mod synthetic;

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::issue::{Issue, PriorityOrder};

pub use folds::{FoldPlan, FoldSpec, FoldSplit};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Author {
    #[serde(rename = "self")]
    SelfParty,
    #[serde(rename = "opp")]
    Opponent,
}

impl Author {
    pub fn other(self) -> Self {
        match self {
            Author::SelfParty => Author::Opponent,
            Author::Opponent => Author::SelfParty,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Utterance {
    pub author: Author,
    pub text: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tags: Vec<String>,
}

impl Utterance {
    pub fn new(author: Author, text: impl Into<String>) -> Self {
        Self {
            author,
            text: text.into(),
            tags: Vec::new(),
        }
    }

    pub fn with_tags(mut self, tags: &[&str]) -> Self {
        self.tags = tags.iter().map(|t| t.to_string()).collect();
        self
    }

    pub fn has_tag(&self, tag: &str) -> bool {
        self.tags.iter().any(|t| t.eq_ignore_ascii_case(tag))
    }
}

/// Where an instance came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Source {
    /// Full CaSiNo-style dialogues.
    Cd,
    /// Template dialogues built from argument metadata.
    Ca,
    /// Remapped DealOrNoDeal-style dialogues.
    Dnd,
    /// Generated learnability corpus.
    Syn,
}

impl Source {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "cd" => Ok(Source::Cd),
            "ca" => Ok(Source::Ca),
            "dnd" => Ok(Source::Dnd),
            "syn" => Ok(Source::Syn),
            other => Err(Error::Argument(format!("unknown data source {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scenario {
    pub self_order: PriorityOrder,
    pub opp_order: PriorityOrder,
}

/// One perspective of a dialogue with the opponent's priorities as label.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub id: String,
    pub source: Source,
    pub utterances: Vec<Utterance>,
    pub label: PriorityOrder,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pair_mask: Option<Vec<(Issue, Issue)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<Scenario>,
}

impl Instance {
    /// Identifier of the underlying dialogue: the id up to the first `:`.
    /// Both perspectives of a dialogue, and template dialogues derived from
    /// its metadata, share this key.
    pub fn dialogue_key(&self) -> &str {
        dialogue_key(&self.id)
    }

    pub fn issue_count(&self) -> usize {
        self.label.len()
    }

    pub fn has_full_label(&self) -> bool {
        self.pair_mask.is_none()
    }

    pub fn opponent_count(&self) -> usize {
        self.utterances
            .iter()
            .filter(|u| u.author == Author::Opponent)
            .count()
    }

    /// Utterance indices of opponent turns, in order.
    pub fn opponent_positions(&self) -> Vec<usize> {
        self.utterances
            .iter()
            .enumerate()
            .filter(|(_, u)| u.author == Author::Opponent)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Validation(format!("instance {}: {msg}", self.id)));
        if self.utterances.is_empty() {
            return fail("no utterances".into());
        }
        for (i, u) in self.utterances.iter().enumerate() {
            if u.text.trim().is_empty() {
                return fail(format!("utterance {i} is blank"));
            }
            if i > 0 && self.utterances[i - 1].author == u.author {
                return fail(format!("authors do not alternate at utterance {i}"));
            }
        }
        let m = self.label.len();
        if let Some(mask) = &self.pair_mask {
            if mask.is_empty() {
                return fail("empty pair mask".into());
            }
            for &(a, b) in mask {
                if a.0 >= m || b.0 >= m || a == b {
                    return fail(format!("invalid masked pair ({a}, {b})"));
                }
                if !self.label.prefers(a, b) {
                    return fail(format!("label disagrees with known pair {a} > {b}"));
                }
            }
        }
        if self.source == Source::Ca && self.pair_mask.as_ref().map(Vec::len) != Some(1) {
            return fail("CA instances carry exactly one known pair".into());
        }
        if let Some(s) = &self.scenario {
            if s.self_order.len() != m || s.opp_order.len() != m {
                return fail("scenario orders have the wrong length".into());
            }
        }
        Ok(())
    }

    /// The same dialogue seen by the other party. Needs a scenario.
    pub fn swap_perspective(&self) -> Result<Instance> {
        let scenario = self
            .scenario
            .as_ref()
            .ok_or_else(|| Error::Input(format!("instance {} has no scenario to swap", self.id)))?;
        Ok(Instance {
            id: self.id.clone(),
            source: self.source,
            utterances: self
                .utterances
                .iter()
                .map(|u| Utterance {
                    author: u.author.other(),
                    ..u.clone()
                })
                .collect(),
            label: scenario.self_order.clone(),
            pair_mask: None,
            scenario: Some(Scenario {
                self_order: scenario.opp_order.clone(),
                opp_order: scenario.self_order.clone(),
            }),
        })
    }
}

pub fn dialogue_key(id: &str) -> &str {
    id.split(':').next().unwrap_or(id)
}

/// Prefix of an instance ending at its k-th opponent utterance.
#[derive(Clone, Copy, Debug)]
pub struct PartialDialogue<'a> {
    pub instance: &'a Instance,
    /// Requested k.
    pub k: usize,
    /// Opponent utterances actually included; less than `k` when clamped.
    pub opponent_seen: usize,
    pub len: usize,
    pub clamped: bool,
}

impl<'a> PartialDialogue<'a> {
    pub fn utterances(&self) -> &'a [Utterance] {
        &self.instance.utterances[..self.len]
    }

    /// Index of the last utterance, the k-th opponent turn.
    pub fn readout_row(&self) -> usize {
        self.len - 1
    }
}

pub fn partial_view(instance: &Instance, k: usize) -> Result<PartialDialogue<'_>> {
    if k == 0 {
        return Err(Error::Argument("k must be at least 1".into()));
    }
    let positions = instance.opponent_positions();
    let Some(&last) = positions.last() else {
        return Err(Error::Input(format!(
            "instance {} has no opponent utterance",
            instance.id
        )));
    };
    let (pos, seen, clamped) = match positions.get(k - 1) {
        Some(&p) => (p, k, false),
        None => (last, positions.len(), true),
    };
    Ok(PartialDialogue {
        instance,
        k,
        opponent_seen: seen,
        len: pos + 1,
        clamped,
    })
}

/// One participant of a raw two-party dialogue.
#[derive(Clone, Debug, PartialEq)]
pub struct Participant {
    pub id: String,
    pub order: PriorityOrder,
    /// Free-text arguments for the High, Medium and Low priority issues.
    pub arguments: Option<[String; 3]>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RawTurn {
    pub speaker: String,
    pub text: String,
    pub tags: Vec<String>,
}

/// Source-format-independent dialogue before perspective extraction.
#[derive(Clone, Debug, PartialEq)]
pub struct RawDialogue {
    pub id: String,
    pub source: Source,
    pub participants: Vec<Participant>,
    pub turns: Vec<RawTurn>,
}

/// Two instances, one per participant, each labelled with the other
/// participant's order. Consecutive turns by one speaker are merged so that
/// authors alternate.
pub fn extract_perspectives(raw: &RawDialogue) -> Result<(Instance, Instance)> {
    if raw.participants.len() != 2 {
        return Err(Error::Validation(format!(
            "dialogue {} has {} participants, expected 2",
            raw.id,
            raw.participants.len()
        )));
    }
    let merged = merge_turns(&raw.turns);
    for t in &merged {
        if !raw.participants.iter().any(|p| p.id == t.speaker) {
            return Err(Error::Validation(format!(
                "dialogue {}: turn by unknown speaker {:?}",
                raw.id, t.speaker
            )));
        }
    }
    let build = |me: &Participant, them: &Participant| -> Result<Instance> {
        let inst = Instance {
            id: format!("{}:{}", raw.id, me.id),
            source: raw.source,
            utterances: merged
                .iter()
                .map(|t| Utterance {
                    author: if t.speaker == me.id {
                        Author::SelfParty
                    } else {
                        Author::Opponent
                    },
                    text: t.text.clone(),
                    tags: t.tags.clone(),
                })
                .collect(),
            label: them.order.clone(),
            pair_mask: None,
            scenario: Some(Scenario {
                self_order: me.order.clone(),
                opp_order: them.order.clone(),
            }),
        };
        inst.validate()?;
        Ok(inst)
    };
    let (a, b) = (&raw.participants[0], &raw.participants[1]);
    Ok((build(a, b)?, build(b, a)?))
}

fn merge_turns(turns: &[RawTurn]) -> Vec<RawTurn> {
    let mut out: Vec<RawTurn> = Vec::with_capacity(turns.len());
    for t in turns.iter().filter(|t| !t.text.trim().is_empty()) {
        match out.last_mut() {
            Some(prev) if prev.speaker == t.speaker => {
                prev.text.push(' ');
                prev.text.push_str(t.text.trim());
                let mut tags: BTreeSet<String> = prev.tags.drain(..).collect();
                tags.extend(t.tags.iter().cloned());
                prev.tags = tags.into_iter().collect();
            }
            _ => out.push(RawTurn {
                speaker: t.speaker.clone(),
                text: t.text.trim().to_string(),
                tags: t.tags.clone(),
            }),
        }
    }
    out
}

/// Reads canonical instances, one JSON object per line. Blank lines are
/// skipped; a file holding a single JSON array is accepted too.
pub fn read_instances(path: &Path) -> Result<Vec<Instance>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::new(file);
    let mut first = String::new();
    let mut rest = String::new();
    reader
        .read_line(&mut first)
        .map_err(|e| Error::io(path, e))?;
    if first.trim_start().starts_with('[') {
        std::io::Read::read_to_string(&mut reader, &mut rest).map_err(|e| Error::io(path, e))?;
        let all = format!("{first}{rest}");
        let instances: Vec<Instance> = serde_json::from_str(&all).map_err(|e| Error::Line {
            path: path.to_path_buf(),
            line: e.line(),
            detail: e.to_string(),
        })?;
        for inst in &instances {
            inst.validate()?;
        }
        return Ok(instances);
    }
    let mut out = Vec::new();
    let lines = std::iter::once(Ok(first)).chain(reader.lines());
    for (i, line) in lines.enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let inst: Instance = serde_json::from_str(&line).map_err(|e| Error::Line {
            path: path.to_path_buf(),
            line: i + 1,
            detail: e.to_string(),
        })?;
        inst.validate().map_err(|e| Error::Line {
            path: path.to_path_buf(),
            line: i + 1,
            detail: e.to_string(),
        })?;
        out.push(inst);
    }
    Ok(out)
}

pub fn write_instances(path: &Path, instances: &[Instance]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for inst in instances {
        serde_json::to_writer(&mut w, inst)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
