//! Dialogue-level cross-validation plans.

use std::collections::{BTreeSet, HashSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Instance;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldSpec {
    pub fold_count: usize,
    /// Dialogues taken from each fold's training portion for tuning.
    pub tune_dialogues: usize,
    /// Held-out share when `fold_count` is 1.
    pub single_eval_fraction: f64,
}

impl Default for FoldSpec {
    fn default() -> Self {
        Self {
            fold_count: 5,
            tune_dialogues: 50,
            single_eval_fraction: 0.2,
        }
    }
}

/// Dialogue keys per split for one fold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldSplit {
    pub train: Vec<String>,
    pub tune: Vec<String>,
    pub eval: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub fold_count: usize,
    pub folds: Vec<FoldSplit>,
}

impl FoldPlan {
    /// Shuffles the distinct dialogue keys under `seed` and deals them into
    /// `fold_count` evaluation chunks; the remainder of each fold is split
    /// into tune and train.
    pub fn build(dialogue_keys: &[String], spec: &FoldSpec, seed: u64) -> Result<Self> {
        if spec.fold_count == 0 {
            return Err(Error::Argument("fold_count must be positive".into()));
        }
        let mut keys: Vec<String> = dialogue_keys
            .iter()
            .cloned()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        keys.shuffle(&mut rng);
        let n = keys.len();
        if n < spec.fold_count.max(2) {
            return Err(Error::Argument(format!(
                "{n} dialogues cannot fill {} folds",
                spec.fold_count
            )));
        }

        let chunks: Vec<(usize, usize)> = if spec.fold_count == 1 {
            if !(spec.single_eval_fraction > 0.0 && spec.single_eval_fraction < 1.0) {
                return Err(Error::Argument(format!(
                    "single_eval_fraction {} outside (0, 1)",
                    spec.single_eval_fraction
                )));
            }
            let e = ((n as f64 * spec.single_eval_fraction).round() as usize).clamp(1, n - 1);
            vec![(0, e)]
        } else {
            let base = n / spec.fold_count;
            let extra = n % spec.fold_count;
            let mut start = 0;
            (0..spec.fold_count)
                .map(|f| {
                    let len = base + usize::from(f < extra);
                    let c = (start, start + len);
                    start += len;
                    c
                })
                .collect()
        };

        let mut folds = Vec::with_capacity(chunks.len());
        for (f, &(lo, hi)) in chunks.iter().enumerate() {
            let eval: Vec<String> = keys[lo..hi].to_vec();
            let mut rest: Vec<String> = keys[..lo].iter().chain(&keys[hi..]).cloned().collect();
            let mut fold_rng = ChaCha8Rng::seed_from_u64(seed ^ (0x9e37_79b9 + f as u64));
            rest.shuffle(&mut fold_rng);
            if spec.tune_dialogues >= rest.len() {
                return Err(Error::Argument(format!(
                    "tune size {} leaves no training dialogues in fold {f}",
                    spec.tune_dialogues
                )));
            }
            let tune = rest[..spec.tune_dialogues].to_vec();
            let train = rest[spec.tune_dialogues..].to_vec();
            folds.push(FoldSplit { train, tune, eval });
        }
        let plan = Self {
            fold_count: spec.fold_count,
            folds,
        };
        plan.validate()?;
        Ok(plan)
    }

    /// Splits must be disjoint inside a fold and evaluation sets disjoint
    /// across folds.
    pub fn validate(&self) -> Result<()> {
        if self.folds.len() != self.fold_count {
            return Err(Error::Validation(format!(
                "plan declares {} folds but holds {}",
                self.fold_count,
                self.folds.len()
            )));
        }
        let mut seen_eval: HashSet<&str> = HashSet::new();
        for (f, fold) in self.folds.iter().enumerate() {
            let mut inside: HashSet<&str> = HashSet::new();
            for key in fold.train.iter().chain(&fold.tune).chain(&fold.eval) {
                if !inside.insert(key) {
                    return Err(Error::Validation(format!(
                        "dialogue {key} appears twice in fold {f}"
                    )));
                }
            }
            for key in &fold.eval {
                if !seen_eval.insert(key) {
                    return Err(Error::Validation(format!(
                        "dialogue {key} is evaluated in more than one fold"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Instances of `fold` split into (train, tune, eval) by dialogue key.
    /// Instances whose dialogue is in no split are dropped.
    pub fn split<'a>(
        &self,
        fold: usize,
        instances: &'a [Instance],
    ) -> Result<(Vec<&'a Instance>, Vec<&'a Instance>, Vec<&'a Instance>)> {
        let split = self
            .folds
            .get(fold)
            .ok_or_else(|| Error::Argument(format!("fold {fold} out of range")))?;
        let train: HashSet<&str> = split.train.iter().map(String::as_str).collect();
        let tune: HashSet<&str> = split.tune.iter().map(String::as_str).collect();
        let eval: HashSet<&str> = split.eval.iter().map(String::as_str).collect();
        let (mut a, mut b, mut c) = (Vec::new(), Vec::new(), Vec::new());
        for inst in instances {
            let key = inst.dialogue_key();
            if train.contains(key) {
                a.push(inst);
            } else if tune.contains(key) {
                b.push(inst);
            } else if eval.contains(key) {
                c.push(inst);
            }
        }
        Ok((a, b, c))
    }
}

/// Distinct dialogue keys in first-seen order.
pub fn dialogue_keys(instances: &[Instance]) -> Vec<String> {
    let mut seen = HashSet::new();
    instances
        .iter()
        .map(|i| i.dialogue_key())
        .filter(|k| seen.insert(*k))
        .map(str::to_string)
        .collect()
}
