//! Template-argument accuracy, attention by utterance category and the
//! integrative-potential split.

use serde::{Deserialize, Serialize};

use crate::adapt::offer::{tag_utterance_category, Category};
use crate::corpus::Instance;
use crate::error::{Error, Result};
use crate::metrics::PriorityModel;
use crate::ranker::RankerModel;

/// Share (percent) of instances whose k = 2 scores order the known pair
/// strictly correctly.
pub fn ca_argument_accuracy<M: PriorityModel + ?Sized>(
    instances: &[&Instance],
    model: &M,
) -> Result<f64> {
    if instances.is_empty() {
        return Err(Error::Argument("no template instances".into()));
    }
    let mut correct = 0usize;
    for inst in instances {
        let (hi, lo) = match inst.pair_mask.as_deref() {
            Some([pair]) => *pair,
            _ => {
                return Err(Error::Argument(format!(
                    "instance {} does not carry exactly one known pair",
                    inst.id
                )))
            }
        };
        let s = model.scores_at_k(inst, 2)?;
        if s[hi.0] > s[lo.0] {
            correct += 1;
        }
    }
    Ok(100.0 * correct as f64 / instances.len() as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttentionReport {
    /// Mean over queries of the total attention each category receives,
    /// indexed like [`Category::ALL`]. Sums to 1.
    pub mass: [f64; 3],
    /// Mean attention weight received by one visible utterance of each
    /// category.
    pub mean_weight: [f64; 3],
    pub queries: usize,
    /// Largest deviation from 1 of a per-query category sum.
    pub max_sum_error: f64,
}

/// Last utterance-level layer, heads averaged.
pub fn attention_mass_report(
    instances: &[&Instance],
    model: &RankerModel,
) -> Result<AttentionReport> {
    let mut mass = [0.0; 3];
    let mut weight_sum = [0.0; 3];
    let mut weight_count = [0usize; 3];
    let mut queries = 0usize;
    let mut max_sum_error: f64 = 0.0;
    for inst in instances {
        let heads = model.level2_attention(&inst.utterances)?;
        let cats: Vec<Category> = inst.utterances.iter().map(tag_utterance_category).collect();
        let n = cats.len();
        for q in 0..n {
            let mut per_cat = [0.0; 3];
            for (key, cat) in cats.iter().enumerate().take(q + 1) {
                let w = heads.iter().map(|a| a[[q, key]]).sum::<f64>() / heads.len() as f64;
                per_cat[cat.index()] += w;
                weight_sum[cat.index()] += w;
                weight_count[cat.index()] += 1;
            }
            max_sum_error = max_sum_error.max((per_cat.iter().sum::<f64>() - 1.0).abs());
            for c in 0..3 {
                mass[c] += per_cat[c];
            }
            queries += 1;
        }
    }
    if queries == 0 {
        return Err(Error::Argument("no utterances to analyse".into()));
    }
    let mean_weight = [0, 1, 2].map(|c| {
        if weight_count[c] == 0 {
            0.0
        } else {
            weight_sum[c] / weight_count[c] as f64
        }
    });
    Ok(AttentionReport {
        mass: mass.map(|m| m / queries as f64),
        mean_weight,
        queries,
        max_sum_error,
    })
}

#[derive(Clone, Debug, Default)]
pub struct IntegrativeSplit<'a> {
    /// Kendall distance at most 1 between the two orders.
    pub low: Vec<&'a Instance>,
    pub high: Vec<&'a Instance>,
    /// Instances without both orders.
    pub skipped: usize,
}

pub fn split_by_integrative_potential<'a>(
    instances: &[&'a Instance],
) -> Result<IntegrativeSplit<'a>> {
    let mut out = IntegrativeSplit::default();
    for inst in instances {
        let Some(s) = &inst.scenario else {
            out.skipped += 1;
            continue;
        };
        if s.self_order.kendall_distance(&s.opp_order)? <= 1 {
            out.low.push(inst);
        } else {
            out.high.push(inst);
        }
    }
    Ok(out)
}
