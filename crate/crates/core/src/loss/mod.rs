//! Pairwise margin ranking loss over per-k score rows.
//!
//! For every supervised k the score row at the k-th opponent utterance is
//! penalised by `max(0, -y (o1 - o2) + c)` for each known issue pair. Per-k
//! losses are averaged over the k values kept by loss dropout.

use rand::Rng;
use serde::{Deserialize, Serialize};

use oppmodel_neural::HingeTerm;

use crate::corpus::{Instance, Source};
use crate::error::{Error, Result};
use crate::issue::Issue;

/// The known relation between two issues: `y = 1` iff `q1` ranks above `q2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairTruth {
    pub q1: Issue,
    pub q2: Issue,
    pub y: i8,
}

impl PairTruth {
    /// (higher, lower) issue of the pair.
    pub fn ordered(&self) -> (Issue, Issue) {
        if self.y > 0 {
            (self.q1, self.q2)
        } else {
            (self.q2, self.q1)
        }
    }

    pub fn reversed(&self) -> Self {
        Self {
            y: -self.y,
            ..*self
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossConfig {
    pub margin: f64,
    pub loss_dropout: f64,
    pub k_max: usize,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            margin: 0.3,
            loss_dropout: 0.15,
            k_max: 5,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.margin >= 0.0 && self.margin.is_finite()) {
            return Err(Error::Argument(format!(
                "margin {} must be >= 0",
                self.margin
            )));
        }
        if !(0.0..1.0).contains(&self.loss_dropout) {
            return Err(Error::Argument(format!(
                "loss_dropout {} outside [0, 1)",
                self.loss_dropout
            )));
        }
        if self.k_max == 0 {
            return Err(Error::Argument("k_max must be at least 1".into()));
        }
        Ok(())
    }
}

pub fn pair_loss(o1: f64, o2: f64, y: i8, c: f64) -> f64 {
    (-f64::from(y) * (o1 - o2) + c).max(0.0)
}

/// Supervised pairs: the pair mask when present, else all pairs of the label
/// in canonical order.
pub fn truths(instance: &Instance) -> Vec<PairTruth> {
    if let Some(mask) = &instance.pair_mask {
        return mask
            .iter()
            .map(|&(q1, q2)| PairTruth { q1, q2, y: 1 })
            .collect();
    }
    let m = instance.issue_count();
    let mut out = Vec::with_capacity(m * (m - 1) / 2);
    for a in 0..m {
        for b in a + 1..m {
            let (q1, q2) = (Issue(a), Issue(b));
            let y = if instance.label.prefers(q1, q2) {
                1
            } else {
                -1
            };
            out.push(PairTruth { q1, q2, y });
        }
    }
    out
}

pub fn loss_at_k(row: &[f64], truths: &[PairTruth], c: f64) -> Result<f64> {
    if truths.is_empty() {
        return Err(Error::Argument("no pair truths to score".into()));
    }
    let mut total = 0.0;
    for t in truths {
        let (o1, o2) = match (row.get(t.q1.0), row.get(t.q2.0)) {
            (Some(a), Some(b)) => (*a, *b),
            _ => {
                return Err(Error::Argument(format!(
                    "pair ({}, {}) outside a score row of {}",
                    t.q1,
                    t.q2,
                    row.len()
                )))
            }
        };
        total += pair_loss(o1, o2, t.y, c);
    }
    Ok(total)
}

/// k values contributing to the loss. Template dialogues use only k = 2.
/// Otherwise each k in 1..=min(#opp, k_max) is kept with probability
/// `1 - loss_dropout`, redrawing while nothing is kept.
pub fn select_ks<R: Rng + ?Sized>(
    instance: &Instance,
    config: &LossConfig,
    rng: &mut R,
) -> Result<Vec<usize>> {
    let n_opp = instance.opponent_count();
    if n_opp == 0 {
        return Err(Error::Input(format!(
            "instance {} has no opponent utterance",
            instance.id
        )));
    }
    if instance.source == Source::Ca {
        if n_opp < 2 {
            return Err(Error::Input(format!(
                "template instance {} needs two opponent turns",
                instance.id
            )));
        }
        return Ok(vec![2]);
    }
    let kk = n_opp.min(config.k_max);
    if config.loss_dropout == 0.0 {
        return Ok((1..=kk).collect());
    }
    loop {
        let kept: Vec<usize> = (1..=kk)
            .filter(|_| !rng.gen_bool(config.loss_dropout))
            .collect();
        if !kept.is_empty() {
            return Ok(kept);
        }
    }
}

/// Hinge terms over a full-dialogue score matrix, weighted so that their sum
/// is the mean per-k loss.
pub fn hinge_terms<R: Rng + ?Sized>(
    instance: &Instance,
    config: &LossConfig,
    rng: &mut R,
) -> Result<Vec<HingeTerm>> {
    let ks = select_ks(instance, config, rng)?;
    let positions = instance.opponent_positions();
    let pairs = truths(instance);
    let weight = 1.0 / ks.len() as f64;
    let mut out = Vec::with_capacity(ks.len() * pairs.len());
    for k in ks {
        for t in &pairs {
            let (hi, lo) = t.ordered();
            out.push(HingeTerm {
                row: positions[k - 1],
                hi: hi.0,
                lo: lo.0,
                weight,
            });
        }
    }
    Ok(out)
}

/// Loss of a score matrix whose rows align with the instance's utterances.
pub fn total_loss<R: Rng + ?Sized>(
    scores: &ndarray::Array2<f64>,
    instance: &Instance,
    config: &LossConfig,
    rng: &mut R,
) -> Result<f64> {
    config.validate()?;
    if scores.nrows() != instance.utterances.len() {
        return Err(Error::Argument(format!(
            "{} score rows for {} utterances",
            scores.nrows(),
            instance.utterances.len()
        )));
    }
    let ks = select_ks(instance, config, rng)?;
    let positions = instance.opponent_positions();
    let pairs = truths(instance);
    let mut sum = 0.0;
    for &k in &ks {
        let row = scores.row(positions[k - 1]).to_vec();
        sum += loss_at_k(&row, &pairs, config.margin)?;
    }
    Ok(sum / ks.len() as f64)
}
