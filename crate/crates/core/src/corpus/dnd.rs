//! Line-oriented DealOrNoDeal records.
//!
//! ```text
//! <input> 1 4 4 1 1 2 </input> <dialogue> THEM: i want the hats <eos> YOU: deal <eos> THEM: <selection> </dialogue> <output> ... </output> <partner_input> 1 0 4 2 1 2 </partner_input>
//! ```
//!
//! `<input>` holds (count, value) for book, hat and ball as seen by the agent
//! whose turns are marked `YOU`; `<partner_input>` holds the same for `THEM`.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// Item nouns in the order the value fields use.
pub const DND_ITEMS: [&str; 3] = ["book", "hat", "ball"];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DndSpeaker {
    You,
    Them,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct ItemTerms {
    pub count: u32,
    pub value: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RawDndDialogue {
    /// 1-based line number in the source file; 0 for generated records.
    pub line: usize,
    /// Terms of the reader agent (`YOU`).
    pub reader: [ItemTerms; 3],
    pub partner: Option<[ItemTerms; 3]>,
    pub turns: Vec<(DndSpeaker, String)>,
}

impl RawDndDialogue {
    pub fn reader_values(&self) -> [u32; 3] {
        [
            self.reader[0].value,
            self.reader[1].value,
            self.reader[2].value,
        ]
    }

    /// Serialises back to the line format.
    pub fn to_line(&self) -> String {
        let mut s = String::from("<input>");
        for t in &self.reader {
            let _ = write!(s, " {} {}", t.count, t.value);
        }
        s.push_str(" </input> <dialogue>");
        for (speaker, text) in &self.turns {
            let tag = match speaker {
                DndSpeaker::You => "YOU:",
                DndSpeaker::Them => "THEM:",
            };
            let _ = write!(s, " {tag} {text} <eos>");
        }
        s.push_str(" </dialogue>");
        if let Some(p) = &self.partner {
            s.push_str(" <partner_input>");
            for t in p {
                let _ = write!(s, " {} {}", t.count, t.value);
            }
            s.push_str(" </partner_input>");
        }
        s
    }
}

pub fn load_dnd(path: &Path) -> Result<Vec<RawDndDialogue>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_dnd(&text, path)
}

pub fn parse_dnd(text: &str, path: &Path) -> Result<Vec<RawDndDialogue>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let lineno = i + 1;
        let err = |detail: String| Error::Line {
            path: path.to_path_buf(),
            line: lineno,
            detail,
        };
        let reader = section(line, "input")
            .ok_or_else(|| err("missing <input> section".into()))
            .and_then(|s| terms(s).map_err(err))?;
        let partner = match section(line, "partner_input") {
            Some(s) => Some(terms(s).map_err(err)?),
            None => None,
        };
        let dialogue =
            section(line, "dialogue").ok_or_else(|| err("missing <dialogue> section".into()))?;
        let mut turns = Vec::new();
        for chunk in dialogue.split("<eos>") {
            let chunk = chunk.trim();
            if chunk.is_empty() {
                continue;
            }
            let (speaker, rest) = if let Some(r) = chunk.strip_prefix("YOU:") {
                (DndSpeaker::You, r)
            } else if let Some(r) = chunk.strip_prefix("THEM:") {
                (DndSpeaker::Them, r)
            } else {
                return Err(err(format!("turn without speaker mark: {chunk:?}")));
            };
            let rest = rest.trim();
            if rest.is_empty() || rest.starts_with("<selection>") {
                continue;
            }
            turns.push((speaker, rest.to_string()));
        }
        out.push(RawDndDialogue {
            line: lineno,
            reader,
            partner,
            turns,
        });
    }
    Ok(out)
}

fn section<'a>(line: &'a str, tag: &str) -> Option<&'a str> {
    let open = format!("<{tag}>");
    let close = format!("</{tag}>");
    let start = line.find(&open)? + open.len();
    let end = start + line[start..].find(&close)?;
    Some(&line[start..end])
}

fn terms(s: &str) -> std::result::Result<[ItemTerms; 3], String> {
    let nums: Vec<u32> = s
        .split_whitespace()
        .map(|t| {
            t.parse::<u32>()
                .map_err(|_| format!("non-integer value field {t:?}"))
        })
        .collect::<std::result::Result<_, _>>()?;
    if nums.len() != 6 {
        return Err(format!("expected 6 integers, found {}", nums.len()));
    }
    Ok([
        ItemTerms {
            count: nums[0],
            value: nums[1],
        },
        ItemTerms {
            count: nums[2],
            value: nums[3],
        },
        ItemTerms {
            count: nums[4],
            value: nums[5],
        },
    ])
}
