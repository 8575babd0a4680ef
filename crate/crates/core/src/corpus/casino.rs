//! Ingestion of CaSiNo-style chat records.
//!
//! The input is a JSON array of chat records. Field names are taken from a
//! [`FieldMap`] whose defaults follow the public release:
//!
//! ```text
//! { "dialogue_id": 0,
//!   "chat_logs": [ { "text": "...", "id": "mturk_agent_1" }, ... ],
//!   "participant_info": { "mturk_agent_1": { "value2issue": { "High": "Food", ... },
//!                                            "value2reason": { "High": "...", ... } }, ... },
//!   "annotations": [ [ "utterance text", "small-talk,self-need" ], ... ] }
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::corpus::{Participant, RawDialogue, RawTurn, Source};
use crate::error::{Error, Result};
use crate::issue::{Issue, PriorityOrder};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FieldMap {
    pub dialogue_id: String,
    pub chat_logs: String,
    pub speaker: String,
    pub text: String,
    pub participant_info: String,
    pub value2issue: String,
    pub value2reason: String,
    pub annotations: String,
    /// Priority level keys, highest first.
    pub levels: Vec<String>,
    /// Turn texts that are deal actions rather than utterances.
    pub skip_texts: Vec<String>,
    /// Raw issue name → canonical issue name.
    pub issue_names: BTreeMap<String, String>,
}

impl Default for FieldMap {
    fn default() -> Self {
        Self {
            dialogue_id: "dialogue_id".into(),
            chat_logs: "chat_logs".into(),
            speaker: "id".into(),
            text: "text".into(),
            participant_info: "participant_info".into(),
            value2issue: "value2issue".into(),
            value2reason: "value2reason".into(),
            annotations: "annotations".into(),
            levels: vec!["High".into(), "Medium".into(), "Low".into()],
            skip_texts: ["Submit-Deal", "Accept-Deal", "Reject-Deal", "Walk-Away"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
            issue_names: [
                ("Food", "food"),
                ("Water", "water"),
                ("Firewood", "firewood"),
            ]
            .iter()
            .map(|(a, b)| (a.to_string(), b.to_string()))
            .collect(),
        }
    }
}

impl FieldMap {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Line {
            path: path.to_path_buf(),
            line: e.line(),
            detail: e.to_string(),
        })
    }

    fn issue(&self, raw: &str) -> Option<Issue> {
        let mapped = self.issue_names.get(raw).map(String::as_str).unwrap_or(raw);
        mapped.parse().ok()
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct CasinoLoad {
    pub dialogues: Vec<RawDialogue>,
    /// Records skipped for missing or unusable priority metadata.
    pub skipped: usize,
}

pub fn load_casino(path: &Path, fields: &FieldMap) -> Result<CasinoLoad> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_casino(&text, path, fields)
}

pub fn parse_casino(text: &str, path: &Path, fields: &FieldMap) -> Result<CasinoLoad> {
    let value: Value = serde_json::from_str(text).map_err(|e| Error::Line {
        path: path.to_path_buf(),
        line: e.line(),
        detail: e.to_string(),
    })?;
    let records = value.as_array().ok_or_else(|| Error::Record {
        path: path.to_path_buf(),
        record: 0,
        detail: "top level is not an array of chat records".into(),
    })?;
    let mut out = CasinoLoad::default();
    for (index, record) in records.iter().enumerate() {
        let rec_err = |detail: String| Error::Record {
            path: path.to_path_buf(),
            record: index,
            detail,
        };
        let obj = record
            .as_object()
            .ok_or_else(|| rec_err("record is not an object".into()))?;
        let id = match obj.get(&fields.dialogue_id) {
            Some(Value::String(s)) => s.clone(),
            Some(Value::Number(n)) => n.to_string(),
            _ => index.to_string(),
        };
        let logs = obj
            .get(&fields.chat_logs)
            .and_then(Value::as_array)
            .ok_or_else(|| rec_err(format!("missing {:?} array", fields.chat_logs)))?;

        let info = obj.get(&fields.participant_info).and_then(Value::as_object);
        let Some(participants) = info.and_then(|info| participants(info, fields)) else {
            log::warn!("record {index}: missing priority metadata, skipped");
            out.skipped += 1;
            continue;
        };

        let annotations: Vec<(String, Vec<String>)> = obj
            .get(&fields.annotations)
            .and_then(Value::as_array)
            .map(|rows| {
                rows.iter()
                    .filter_map(|r| {
                        let r = r.as_array()?;
                        let text = r.first()?.as_str()?.to_string();
                        let tags = r
                            .get(1)
                            .and_then(Value::as_str)
                            .map(|t| {
                                t.split(',')
                                    .map(|s| s.trim().to_string())
                                    .filter(|s| !s.is_empty())
                                    .collect()
                            })
                            .unwrap_or_default();
                        Some((text, tags))
                    })
                    .collect()
            })
            .unwrap_or_default();

        let mut turns = Vec::with_capacity(logs.len());
        for (t, turn) in logs.iter().enumerate() {
            let speaker = turn
                .get(&fields.speaker)
                .and_then(Value::as_str)
                .ok_or_else(|| rec_err(format!("turn {t} has no {:?}", fields.speaker)))?;
            let text = turn
                .get(&fields.text)
                .and_then(Value::as_str)
                .ok_or_else(|| rec_err(format!("turn {t} has no {:?}", fields.text)))?;
            if fields.skip_texts.iter().any(|s| s == text) || text.trim().is_empty() {
                continue;
            }
            turns.push(RawTurn {
                speaker: speaker.to_string(),
                text: text.to_string(),
                tags: Vec::new(),
            });
        }
        attach_tags(&mut turns, &annotations);

        out.dialogues.push(RawDialogue {
            id,
            source: Source::Cd,
            participants,
            turns,
        });
    }
    Ok(out)
}

fn participants(
    info: &serde_json::Map<String, Value>,
    fields: &FieldMap,
) -> Option<Vec<Participant>> {
    if info.len() != 2 {
        return None;
    }
    let mut out = Vec::with_capacity(2);
    for (pid, meta) in info {
        let v2i = meta.get(&fields.value2issue)?.as_object()?;
        let mut order = Vec::with_capacity(fields.levels.len());
        for level in &fields.levels {
            order.push(fields.issue(v2i.get(level)?.as_str()?)?);
        }
        let order = PriorityOrder::new(order).ok()?;
        let arguments = meta
            .get(&fields.value2reason)
            .and_then(Value::as_object)
            .and_then(|reasons| {
                let get = |l: &String| reasons.get(l).and_then(Value::as_str).map(str::to_string);
                if fields.levels.len() != 3 {
                    return None;
                }
                Some([
                    get(&fields.levels[0])?,
                    get(&fields.levels[1])?,
                    get(&fields.levels[2])?,
                ])
            });
        out.push(Participant {
            id: pid.clone(),
            order,
            arguments,
        });
    }
    Some(out)
}

/// Annotations list one row per non-action utterance. Rows are matched in
/// order when texts agree; unmatched turns stay untagged.
fn attach_tags(turns: &mut [RawTurn], annotations: &[(String, Vec<String>)]) {
    let mut cursor = 0;
    for turn in turns.iter_mut() {
        if let Some(offset) = annotations[cursor.min(annotations.len())..]
            .iter()
            .position(|(text, _)| text.trim() == turn.text.trim())
        {
            let idx = cursor + offset;
            turn.tags = annotations[idx].1.clone();
            cursor = idx + 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::extract_perspectives;

    pub(crate) fn record(id: usize, with_meta_b: bool) -> Value {
        let b_meta = if with_meta_b {
            serde_json::json!({
                "value2issue": {"High": "Water", "Medium": "Firewood", "Low": "Food"},
                "value2reason": {"High": "we hike a lot", "Medium": "cold nights", "Low": "we packed snacks"}
            })
        } else {
            serde_json::json!({"value2reason": {}})
        };
        serde_json::json!({
            "dialogue_id": id,
            "chat_logs": [
                {"text": "Hello! how are you?", "id": "mturk_agent_1"},
                {"text": "Good. I really need water.", "id": "mturk_agent_2"},
                {"text": "I need food the most", "id": "mturk_agent_1"},
                {"text": "Submit-Deal", "id": "mturk_agent_2", "task_data": {}},
                {"text": "Accept-Deal", "id": "mturk_agent_1", "task_data": {}}
            ],
            "participant_info": {
                "mturk_agent_1": {
                    "value2issue": {"High": "Food", "Medium": "Water", "Low": "Firewood"},
                    "value2reason": {"High": "kids eat a lot", "Medium": "hot days", "Low": "it is warm"}
                },
                "mturk_agent_2": b_meta
            },
            "annotations": [
                ["Hello! how are you?", "small-talk"],
                ["Good. I really need water.", "small-talk,self-need"],
                ["I need food the most", "self-need"]
            ]
        })
    }

    #[test]
    fn parses_records_and_tags() {
        let text = serde_json::to_string(&vec![record(1, true), record(2, true)]).unwrap();
        let load = parse_casino(&text, Path::new("x.json"), &FieldMap::default()).unwrap();
        assert_eq!(load.dialogues.len(), 2);
        assert_eq!(load.skipped, 0);
        let d = &load.dialogues[0];
        assert_eq!(d.id, "1");
        assert_eq!(d.turns.len(), 3);
        assert_eq!(d.turns[1].tags, vec!["small-talk", "self-need"]);
        let (a, b) = extract_perspectives(d).unwrap();
        assert_eq!(a.label.names(), vec!["water", "firewood", "food"]);
        assert_eq!(b.label.names(), vec!["food", "water", "firewood"]);
        assert_eq!(
            d.participants[0].arguments.as_ref().unwrap()[0],
            "kids eat a lot"
        );
    }

    #[test]
    fn empty_array() {
        let load = parse_casino("[]", Path::new("x.json"), &FieldMap::default()).unwrap();
        assert!(load.dialogues.is_empty());
    }

    #[test]
    fn missing_priorities_skipped_and_counted() {
        let text = serde_json::to_string(&vec![record(1, true), record(2, false)]).unwrap();
        let load = parse_casino(&text, Path::new("x.json"), &FieldMap::default()).unwrap();
        assert_eq!(load.dialogues.len(), 1);
        assert_eq!(load.skipped, 1);
    }

    #[test]
    fn malformed_record_reports_index() {
        let mut recs = vec![record(1, true), record(2, true)];
        recs[1]["chat_logs"] = Value::Null;
        let text = serde_json::to_string(&recs).unwrap();
        let err = parse_casino(&text, Path::new("x.json"), &FieldMap::default()).unwrap_err();
        assert!(matches!(err, Error::Record { record: 1, .. }), "{err}");
    }

    #[test]
    fn malformed_json_is_parse_error() {
        let err = parse_casino("[{", Path::new("x.json"), &FieldMap::default()).unwrap_err();
        assert!(matches!(err, Error::Line { .. }));
    }

    #[test]
    fn field_map_overrides() {
        let mut rec = record(5, true);
        let logs = rec["chat_logs"].take();
        rec["turns"] = logs;
        let fields = FieldMap {
            chat_logs: "turns".into(),
            ..FieldMap::default()
        };
        let text = serde_json::to_string(&vec![rec]).unwrap();
        let load = parse_casino(&text, Path::new("x.json"), &fields).unwrap();
        assert_eq!(load.dialogues.len(), 1);
    }
}
