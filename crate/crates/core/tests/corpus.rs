use std::collections::HashSet;
use std::path::Path;

use oppmodel::corpus::casino::{parse_casino, FieldMap};
use oppmodel::corpus::folds::dialogue_keys;
use oppmodel::corpus::synthetic::{generate_synthetic, SynthConfig};
use oppmodel::corpus::{extract_perspectives, FoldPlan, FoldSpec};
use oppmodel::{Author, PriorityOrder};

const CHATS: &str = r#"[
  {
    "dialogue_id": 7,
    "chat_logs": [
      {"text": "Hello there!", "id": "mturk_agent_1"},
      {"text": "Hi. I really need water.", "id": "mturk_agent_2"},
      {"text": "We are short on firewood too.", "id": "mturk_agent_2"},
      {"text": "I could use food.", "id": "mturk_agent_1"},
      {"text": "Submit-Deal", "id": "mturk_agent_1"},
      {"text": "Accept-Deal", "id": "mturk_agent_2"}
    ],
    "participant_info": {
      "mturk_agent_1": {"value2issue": {"High": "Food", "Medium": "Water", "Low": "Firewood"}},
      "mturk_agent_2": {"value2issue": {"High": "Water", "Medium": "Firewood", "Low": "Food"}}
    },
    "annotations": [
      ["Hello there!", "small-talk"],
      ["Hi. I really need water.", "small-talk,self-need"],
      ["We are short on firewood too.", "other-need"],
      ["I could use food.", "self-need"]
    ]
  },
  {
    "dialogue_id": 8,
    "chat_logs": [{"text": "hi", "id": "a"}],
    "participant_info": {}
  }
]"#;

#[test]
fn chat_records_become_two_perspectives() {
    let load = parse_casino(CHATS, Path::new("chats.json"), &FieldMap::default()).unwrap();
    assert_eq!(load.skipped, 1);
    assert_eq!(load.dialogues.len(), 1);

    let (a, b) = extract_perspectives(&load.dialogues[0]).unwrap();
    assert_eq!(a.dialogue_key(), b.dialogue_key());
    // The two water/firewood turns merge into one; deal actions are dropped.
    assert_eq!(a.utterances.len(), 3);
    assert_eq!(
        a.utterances[1].text,
        "Hi. I really need water. We are short on firewood too."
    );
    assert!(a.utterances[1].has_tag("self-need") && a.utterances[1].has_tag("other-need"));

    let (one, two) = if a.id.ends_with("mturk_agent_1") {
        (a, b)
    } else {
        (b, a)
    };
    assert_eq!(one.label, PriorityOrder::from_indices(&[1, 2, 0]).unwrap());
    assert_eq!(two.label, PriorityOrder::from_indices(&[0, 1, 2]).unwrap());
    assert_eq!(one.utterances[0].author, Author::SelfParty);
    assert_eq!(two.utterances[0].author, Author::Opponent);
}

#[test]
fn folds_never_share_a_dialogue() {
    let config = SynthConfig {
        count: 300,
        ..SynthConfig::default()
    };
    let data = generate_synthetic(&config, 9).unwrap();
    let keys = dialogue_keys(&data);
    let plan = FoldPlan::build(&keys, &FoldSpec::default(), 4).unwrap();
    let mut evaluated = HashSet::new();
    for fold in 0..plan.folds.len() {
        let (train, tune, eval) = plan.split(fold, &data).unwrap();
        let set = |v: &[&oppmodel::Instance]| -> HashSet<String> {
            v.iter().map(|i| i.dialogue_key().to_string()).collect()
        };
        let (tr, tu, ev) = (set(&train), set(&tune), set(&eval));
        assert!(tr.is_disjoint(&tu) && tr.is_disjoint(&ev) && tu.is_disjoint(&ev));
        assert_eq!(train.len() + tune.len() + eval.len(), data.len());
        for k in ev {
            assert!(evaluated.insert(k), "dialogue evaluated twice");
        }
    }
    assert_eq!(evaluated.len(), keys.len());
}
