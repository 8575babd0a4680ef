//! Ranking metrics, per-k evaluation and fold aggregation.

pub mod analysis;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::Instance;
use crate::error::{Error, Result};
use crate::issue::PriorityOrder;
use crate::ranker::{predict_ranking, RankerModel};

pub use analysis::{
    attention_mass_report, ca_argument_accuracy, split_by_integrative_potential, AttentionReport,
    IntegrativeSplit,
};

/// Anything that scores issues after the k-th opponent utterance.
pub trait PriorityModel: Sync {
    fn name(&self) -> &str;

    /// m scores read after the k-th opponent utterance (clamped).
    fn scores_at_k(&self, instance: &Instance, k: usize) -> Result<Vec<f64>>;

    fn predict_at_k(&self, instance: &Instance, k: usize) -> Result<PriorityOrder> {
        predict_ranking(&self.scores_at_k(instance, k)?)
    }
}

impl PriorityModel for RankerModel {
    fn name(&self) -> &str {
        "ranker"
    }

    fn scores_at_k(&self, instance: &Instance, k: usize) -> Result<Vec<f64>> {
        Ok(RankerModel::predict_at_k(self, instance, k)?.scores)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gain {
    /// `rel`
    #[default]
    Linear,
    /// `2^rel - 1`
    Exponential,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricConfig {
    /// Relevance of the truth's rank positions, highest first.
    pub relevance: Vec<f64>,
    pub k_max: usize,
    pub gain: Gain,
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self {
            relevance: vec![5.0, 4.0, 3.0],
            k_max: 5,
            gain: Gain::Linear,
        }
    }
}

impl MetricConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k_max == 0 {
            return Err(Error::Argument("k_max must be at least 1".into()));
        }
        if self.relevance.is_empty() || self.relevance.windows(2).any(|w| w[0] <= w[1]) {
            return Err(Error::Argument(format!(
                "relevance {:?} must be strictly decreasing",
                self.relevance
            )));
        }
        Ok(())
    }

    /// Weights `(k_max + 1 - k) / sum`, k = 1..=k_max.
    pub fn k_penalty_weights(&self) -> Vec<f64> {
        let total: usize = (1..=self.k_max).sum();
        (1..=self.k_max)
            .map(|k| (self.k_max + 1 - k) as f64 / total as f64)
            .collect()
    }
}

fn check_same_issues(predicted: &PriorityOrder, truth: &PriorityOrder) -> Result<()> {
    if predicted.len() != truth.len() {
        return Err(Error::Argument(format!(
            "orders over {} and {} issues",
            predicted.len(),
            truth.len()
        )));
    }
    Ok(())
}

pub fn ema(predicted: &PriorityOrder, truth: &PriorityOrder) -> Result<f64> {
    check_same_issues(predicted, truth)?;
    Ok(f64::from(u8::from(predicted == truth)))
}

pub fn top1(predicted: &PriorityOrder, truth: &PriorityOrder) -> Result<f64> {
    check_same_issues(predicted, truth)?;
    Ok(f64::from(u8::from(predicted.top() == truth.top())))
}

fn dcg(predicted: &PriorityOrder, truth: &PriorityOrder, config: &MetricConfig) -> f64 {
    predicted
        .issues()
        .iter()
        .enumerate()
        .map(|(i, &issue)| {
            let rel = config.relevance[truth.rank_of(issue)];
            let gain = match config.gain {
                Gain::Linear => rel,
                Gain::Exponential => rel.exp2() - 1.0,
            };
            gain / ((i + 2) as f64).log2()
        })
        .sum()
}

pub fn ndcg3(
    predicted: &PriorityOrder,
    truth: &PriorityOrder,
    config: &MetricConfig,
) -> Result<f64> {
    check_same_issues(predicted, truth)?;
    if config.relevance.len() != truth.len() {
        return Err(Error::Argument(format!(
            "{} relevance values for {} issues",
            config.relevance.len(),
            truth.len()
        )));
    }
    Ok(dcg(predicted, truth, config) / dcg(truth, truth, config))
}

/// The smallest NDCG any permutation reaches for this relevance vector.
pub fn ndcg_min(m: usize, config: &MetricConfig) -> Result<f64> {
    let truth = PriorityOrder::canonical(m);
    let mut worst = f64::INFINITY;
    for p in PriorityOrder::all_orders(m) {
        worst = worst.min(ndcg3(&p, &truth, config)?);
    }
    Ok(worst)
}

/// NDCG min-max rescaled to 0..100 over the permutation range.
pub fn ndcg3_scaled(
    predicted: &PriorityOrder,
    truth: &PriorityOrder,
    config: &MetricConfig,
) -> Result<f64> {
    let raw = ndcg3(predicted, truth, config)?;
    let lo = ndcg_min(truth.len(), config)?;
    Ok((100.0 * (raw - lo) / (1.0 - lo)).clamp(0.0, 100.0))
}

pub fn k_penalty(values_by_k: &[f64], config: &MetricConfig) -> Result<f64> {
    if values_by_k.len() != config.k_max {
        return Err(Error::Argument(format!(
            "{} values for k_max={}",
            values_by_k.len(),
            config.k_max
        )));
    }
    Ok(config
        .k_penalty_weights()
        .iter()
        .zip(values_by_k)
        .map(|(w, v)| w * v)
        .sum())
}

/// Metrics at one k, EMA/Top-1/scaled NDCG as percentages.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KMetrics {
    pub k: usize,
    pub ema: f64,
    pub top1: f64,
    pub ndcg_raw: f64,
    pub ndcg_scaled: f64,
    pub n: usize,
    /// Instances with fewer than k opponent utterances.
    pub clamped: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PenaltyMetrics {
    pub ema: f64,
    pub top1: f64,
    pub ndcg_raw: f64,
    pub ndcg_scaled: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Sample standard deviation; 0 for a single value.
    pub std: f64,
    pub values: Vec<f64>,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Self {
            mean,
            std,
            values: values.to_vec(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub model: String,
    pub instances: usize,
    /// Pair-masked instances left out of the report.
    pub excluded: usize,
    pub per_k: Vec<KMetrics>,
    pub k_penalty: PenaltyMetrics,
    /// Mean and std over folds, keyed like `ema@5` or `ema_kp`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub folds: Option<BTreeMap<String, MeanStd>>,
}

impl MetricReport {
    pub fn at_k(&self, k: usize) -> Option<&KMetrics> {
        self.per_k.iter().find(|m| m.k == k)
    }

    /// Flat metric map used for fold statistics.
    pub fn flat(&self) -> BTreeMap<String, f64> {
        let mut out = BTreeMap::new();
        for m in &self.per_k {
            out.insert(format!("ema@{}", m.k), m.ema);
            out.insert(format!("top1@{}", m.k), m.top1);
            out.insert(format!("ndcg_raw@{}", m.k), m.ndcg_raw);
            out.insert(format!("ndcg_scaled@{}", m.k), m.ndcg_scaled);
        }
        out.insert("ema_kp".into(), self.k_penalty.ema);
        out.insert("top1_kp".into(), self.k_penalty.top1);
        out.insert("ndcg_raw_kp".into(), self.k_penalty.ndcg_raw);
        out.insert("ndcg_scaled_kp".into(), self.k_penalty.ndcg_scaled);
        out
    }

    /// Pools per-fold reports: per-k values are instance-weighted, and
    /// `folds` holds the mean and std of each metric across folds.
    pub fn combine_folds(reports: &[MetricReport], config: &MetricConfig) -> Result<Self> {
        let first = reports
            .first()
            .ok_or_else(|| Error::Argument("no fold reports to combine".into()))?;
        let mut per_k = Vec::with_capacity(first.per_k.len());
        for (i, m) in first.per_k.iter().enumerate() {
            let n: usize = reports.iter().map(|r| r.per_k[i].n).sum();
            let w = |f: fn(&KMetrics) -> f64| {
                reports
                    .iter()
                    .map(|r| f(&r.per_k[i]) * r.per_k[i].n as f64)
                    .sum::<f64>()
                    / n as f64
            };
            per_k.push(KMetrics {
                k: m.k,
                ema: w(|x| x.ema),
                top1: w(|x| x.top1),
                ndcg_raw: w(|x| x.ndcg_raw),
                ndcg_scaled: w(|x| x.ndcg_scaled),
                n,
                clamped: reports.iter().map(|r| r.per_k[i].clamped).sum(),
            });
        }
        let k_penalty = penalties(&per_k, config)?;
        let flats: Vec<BTreeMap<String, f64>> = reports.iter().map(MetricReport::flat).collect();
        let folds = flats[0]
            .keys()
            .map(|key| {
                let values: Vec<f64> = flats.iter().map(|f| f[key]).collect();
                (key.clone(), MeanStd::of(&values))
            })
            .collect();
        Ok(Self {
            model: first.model.clone(),
            instances: reports.iter().map(|r| r.instances).sum(),
            excluded: reports.iter().map(|r| r.excluded).sum(),
            per_k,
            k_penalty,
            folds: Some(folds),
        })
    }
}

fn penalties(per_k: &[KMetrics], config: &MetricConfig) -> Result<PenaltyMetrics> {
    let col = |f: fn(&KMetrics) -> f64| per_k.iter().map(f).collect::<Vec<_>>();
    Ok(PenaltyMetrics {
        ema: k_penalty(&col(|m| m.ema), config)?,
        top1: k_penalty(&col(|m| m.top1), config)?,
        ndcg_raw: k_penalty(&col(|m| m.ndcg_raw), config)?,
        ndcg_scaled: k_penalty(&col(|m| m.ndcg_scaled), config)?,
    })
}

/// Per-k metrics over instances with full labels.
pub fn evaluate<M: PriorityModel + ?Sized>(
    instances: &[&Instance],
    model: &M,
    config: &MetricConfig,
) -> Result<MetricReport> {
    config.validate()?;
    let full: Vec<&Instance> = instances
        .iter()
        .copied()
        .filter(|i| i.has_full_label())
        .collect();
    if full.is_empty() {
        return Err(Error::Argument(
            "no fully labelled instances to evaluate".into(),
        ));
    }
    let lo = ndcg_min(full[0].issue_count(), config)?;
    // per instance, per k: (ema, top1, ndcg, clamped)
    let rows: Vec<Vec<(f64, f64, f64, bool)>> = full
        .par_iter()
        .map(|inst| {
            (1..=config.k_max)
                .map(|k| {
                    let pred = model.predict_at_k(inst, k)?;
                    let n_opp = inst.opponent_count();
                    Ok((
                        ema(&pred, &inst.label)?,
                        top1(&pred, &inst.label)?,
                        ndcg3(&pred, &inst.label, config)?,
                        k > n_opp,
                    ))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let n = full.len();
    let per_k: Vec<KMetrics> = (0..config.k_max)
        .map(|i| {
            let mean = |f: fn(&(f64, f64, f64, bool)) -> f64| {
                rows.iter().map(|r| f(&r[i])).sum::<f64>() / n as f64
            };
            let raw = mean(|r| r.2);
            KMetrics {
                k: i + 1,
                ema: 100.0 * mean(|r| r.0),
                top1: 100.0 * mean(|r| r.1),
                ndcg_raw: raw,
                ndcg_scaled: 100.0 * (raw - lo) / (1.0 - lo),
                n,
                clamped: rows.iter().filter(|r| r[i].3).count(),
            }
        })
        .collect();
    let k_penalty = penalties(&per_k, config)?;
    Ok(MetricReport {
        model: model.name().to_string(),
        instances: n,
        excluded: instances.len() - n,
        per_k,
        k_penalty,
        folds: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn o(v: &[usize]) -> PriorityOrder {
        PriorityOrder::from_indices(v).unwrap()
    }

    #[test]
    fn ema_and_top1() {
        let t = o(&[0, 1, 2]);
        assert_eq!(ema(&t, &t).unwrap(), 1.0);
        assert_eq!(ema(&o(&[1, 0, 2]), &t).unwrap(), 0.0);
        assert_eq!(top1(&o(&[0, 2, 1]), &t).unwrap(), 1.0);
        assert!(ema(&o(&[0, 1]), &t).is_err());
    }

    #[test]
    fn ndcg_fixtures() {
        let c = MetricConfig::default();
        let t = o(&[0, 1, 2]);
        assert!((ndcg3(&t, &t, &c).unwrap() - 1.0).abs() < 1e-15);
        let l3 = 3f64.log2();
        let rev = (3.0 + 4.0 / l3 + 2.5) / (5.0 + 4.0 / l3 + 1.5);
        assert!((ndcg3(&o(&[2, 1, 0]), &t, &c).unwrap() - rev).abs() < 1e-12);
        assert_eq!(ndcg3_scaled(&o(&[2, 1, 0]), &t, &c).unwrap(), 0.0);
        assert_eq!(ndcg3_scaled(&t, &t, &c).unwrap(), 100.0);
        let bad = MetricConfig {
            relevance: vec![2.0, 1.0],
            ..c
        };
        assert!(ndcg3(&t, &t, &bad).is_err());
    }

    #[test]
    fn penalty_weights() {
        let c = MetricConfig::default();
        assert!((k_penalty(&[1.0, 0.0, 0.0, 0.0, 0.0], &c).unwrap() - 5.0 / 15.0).abs() < 1e-15);
        assert!((k_penalty(&[0.0, 0.0, 0.0, 0.0, 1.0], &c).unwrap() - 1.0 / 15.0).abs() < 1e-15);
        assert!((k_penalty(&[0.7; 5], &c).unwrap() - 0.7).abs() < 1e-12);
        assert!(k_penalty(&[0.7; 4], &c).is_err());
        let w = c.k_penalty_weights();
        assert!(w.windows(2).all(|p| p[0] > p[1]) && w[4] > 0.0);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn fold_statistics() {
        let v = MeanStd::of(&[1.0, 2.0, 3.0]);
        assert_eq!(v.mean, 2.0);
        assert_eq!(v.std, 1.0);
        assert_eq!(MeanStd::of(&[4.0]).std, 0.0);
    }

    fn perm() -> impl Strategy<Value = PriorityOrder> {
        (0usize..6).prop_map(|i| PriorityOrder::all_orders(3)[i].clone())
    }

    proptest! {
        #[test]
        fn ema_implies_top1(p in perm(), t in perm()) {
            if ema(&p, &t).unwrap() == 1.0 {
                prop_assert_eq!(top1(&p, &t).unwrap(), 1.0);
            }
        }

        #[test]
        fn ndcg_bounds_and_relabel_invariance(p in perm(), t in perm(), r in perm()) {
            let c = MetricConfig::default();
            let lo = ndcg_min(3, &c).unwrap();
            let v = ndcg3(&p, &t, &c).unwrap();
            prop_assert!(v >= lo - 1e-15 && v <= 1.0 + 1e-15);
            let s = ndcg3_scaled(&p, &t, &c).unwrap();
            prop_assert!((0.0..=100.0).contains(&s));
            let relabel = |o: &PriorityOrder| {
                PriorityOrder::new(o.issues().iter().map(|i| r.issues()[i.0]).collect()).unwrap()
            };
            let v2 = ndcg3(&relabel(&p), &relabel(&t), &c).unwrap();
            prop_assert!((v - v2).abs() < 1e-12);
        }
    }
}
