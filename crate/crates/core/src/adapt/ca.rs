//! Two-argument template dialogues with one known pairwise relation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{Author, Instance, RawDialogue, Source, Utterance};
use crate::error::{Error, Result};
use crate::issue::{Issue, PriorityOrder};

/// One participant's arguments for its High, Medium and Low issues.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArgumentSet {
    pub participant_id: String,
    pub args: [String; 3],
    pub issues: [Issue; 3],
}

impl ArgumentSet {
    pub fn validate(&self) -> Result<()> {
        let [a, b, c] = self.issues;
        if a == b || b == c || a == c {
            return Err(Error::Validation(format!(
                "argument set {} repeats an issue",
                self.participant_id
            )));
        }
        if self.args.iter().any(|t| t.trim().is_empty()) {
            return Err(Error::Validation(format!(
                "argument set {} has a blank argument",
                self.participant_id
            )));
        }
        Ok(())
    }
}

/// Argument sets of every participant that has arguments. Ids are
/// `{dialogue}:{participant}` so the dialogue key matches the source dialogue.
pub fn argument_sets(raw: &[RawDialogue]) -> Vec<ArgumentSet> {
    let mut out = Vec::new();
    for d in raw {
        for p in &d.participants {
            let (Some(args), [h, m, l]) = (&p.arguments, p.order.issues()) else {
                continue;
            };
            out.push(ArgumentSet {
                participant_id: format!("{}:{}", d.id, p.id),
                args: args.clone(),
                issues: [*h, *m, *l],
            });
        }
    }
    out
}

/// Fixed text of the self turns; arguments fill the two opponent turns.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaTemplate {
    pub opener: String,
    pub acknowledgement: String,
}

impl Default for CaTemplate {
    fn default() -> Self {
        Self {
            opener: "hello!".into(),
            acknowledgement: "i see. what else?".into(),
        }
    }
}

/// Builds the (High, Low) and (Medium, Low) instances. The slot order of
/// the two arguments is drawn from a generator keyed on `seed` and the
/// instance id; the third issue is placed last in the label.
pub fn build_ca_instances(
    set: &ArgumentSet,
    template: &CaTemplate,
    seed: u64,
) -> Result<Vec<Instance>> {
    set.validate()?;
    let [hi, mid, lo] = set.issues;
    let pairs = [("ca-hl", 0usize, hi, mid), ("ca-ml", 1usize, mid, hi)];
    let mut out = Vec::with_capacity(2);
    for (suffix, first_arg, better, third) in pairs {
        let id = format!("{}:{}", set.participant_id, suffix);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ id_hash(&id));
        let (a, b) = (&set.args[first_arg], &set.args[2]);
        let (first, second) = if rng.gen_bool(0.5) { (a, b) } else { (b, a) };
        let utterances = vec![
            Utterance::new(Author::SelfParty, template.opener.clone()),
            Utterance::new(Author::Opponent, first.clone()),
            Utterance::new(Author::SelfParty, template.acknowledgement.clone()),
            Utterance::new(Author::Opponent, second.clone()),
        ];
        let inst = Instance {
            id,
            source: Source::Ca,
            utterances,
            label: PriorityOrder::new(vec![better, lo, third])?,
            pair_mask: Some(vec![(better, lo)]),
            scenario: None,
        };
        inst.validate()?;
        out.push(inst);
    }
    Ok(out)
}

fn id_hash(id: &str) -> u64 {
    let digest = Sha256::digest(id.as_bytes());
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}
