//! Cross-validation and training-data fraction sweeps.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{FoldPlan, Instance, Source};
use crate::error::{Error, Result};
use crate::metrics::{evaluate, MeanStd, MetricConfig, MetricReport};
use crate::train::config::{derive_seed, TrainConfig};
use crate::train::{train_model, EpochRecord};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub train_instances: usize,
    pub tune_instances: usize,
    pub eval_instances: usize,
    pub epoch: usize,
    pub history: Vec<EpochRecord>,
    pub report: MetricReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossvalResult {
    pub report: MetricReport,
    pub folds: Vec<FoldResult>,
}

/// Adjunct instances usable for training in a fold: those whose dialogue
/// is neither tuned nor evaluated on.
fn admissible<'a>(adjuncts: &'a [Instance], blocked: &HashSet<&str>) -> Vec<&'a Instance> {
    adjuncts
        .iter()
        .filter(|i| !blocked.contains(i.dialogue_key()))
        .collect()
}

fn run_fold(
    config: &TrainConfig,
    plan: &FoldPlan,
    fold: usize,
    primary: &[Instance],
    adjuncts: &[Instance],
    fraction: f64,
    metrics: &MetricConfig,
) -> Result<FoldResult> {
    let (train, tune, eval) = plan.split(fold, primary)?;
    let split = &plan.folds[fold];
    let blocked: HashSet<&str> = split
        .tune
        .iter()
        .chain(&split.eval)
        .map(String::as_str)
        .collect();
    let train = subsample(
        &train,
        fraction,
        derive_seed(&[config.seed, fold as u64, 7]),
    )?;
    let mut train_set = train;
    train_set.extend(admissible(adjuncts, &blocked));
    let outcome = train_model(config, &train_set, &tune)?;
    let report = evaluate(&eval, &outcome.model, metrics)?;
    Ok(FoldResult {
        fold,
        train_instances: train_set
            .iter()
            .filter(|i| config.mixture.contains(&i.source))
            .count(),
        tune_instances: tune.len(),
        eval_instances: eval.len(),
        epoch: outcome.checkpoint.epoch,
        history: outcome.history,
        report,
    })
}

/// Keeps a seeded share of the dialogues (at least one).
fn subsample<'a>(
    instances: &[&'a Instance],
    fraction: f64,
    seed: u64,
) -> Result<Vec<&'a Instance>> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::Argument(format!(
            "fraction {fraction} outside (0, 1]"
        )));
    }
    if fraction == 1.0 {
        return Ok(instances.to_vec());
    }
    let mut keys: Vec<&str> = instances.iter().map(|i| i.dialogue_key()).collect();
    keys.sort_unstable();
    keys.dedup();
    keys.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let keep = ((keys.len() as f64 * fraction).round() as usize).max(1);
    let kept: HashSet<&str> = keys[..keep].iter().copied().collect();
    Ok(instances
        .iter()
        .copied()
        .filter(|i| kept.contains(i.dialogue_key()))
        .collect())
}

/// Trains and evaluates every fold. Primary instances are split by the
/// plan; adjuncts (template or remapped data) only ever join training.
pub fn crossval(
    config: &TrainConfig,
    plan: &FoldPlan,
    primary: &[Instance],
    adjuncts: &[Instance],
    metrics: &MetricConfig,
) -> Result<CrossvalResult> {
    plan.validate()?;
    let folds = (0..plan.fold_count)
        .map(|f| run_fold(config, plan, f, primary, adjuncts, 1.0, metrics))
        .collect::<Result<Vec<_>>>()?;
    let reports: Vec<MetricReport> = folds.iter().map(|f| f.report.clone()).collect();
    Ok(CrossvalResult {
        report: MetricReport::combine_folds(&reports, metrics)?,
        folds,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub fraction: f64,
    pub mixture: Vec<Source>,
    /// EMA@5 over folds.
    pub ema_at_5: MeanStd,
}

/// EMA@5 for each share of primary training dialogues under each mixture.
pub fn data_fraction_sweep(
    config: &TrainConfig,
    plan: &FoldPlan,
    primary: &[Instance],
    adjuncts: &[Instance],
    fractions: &[f64],
    mixtures: &[Vec<Source>],
    metrics: &MetricConfig,
) -> Result<Vec<SweepPoint>> {
    plan.validate()?;
    if let Some(f) = fractions.iter().find(|f| !(**f > 0.0 && **f <= 1.0)) {
        return Err(Error::Argument(format!("fraction {f} outside (0, 1]")));
    }
    let mut out = Vec::new();
    for &fraction in fractions {
        for mixture in mixtures {
            let cfg = TrainConfig {
                mixture: mixture.clone(),
                ..config.clone()
            };
            let values = (0..plan.fold_count)
                .map(|f| {
                    let r = run_fold(&cfg, plan, f, primary, adjuncts, fraction, metrics)?;
                    Ok(r.report.at_k(5).map_or(f64::NAN, |m| m.ema))
                })
                .collect::<Result<Vec<f64>>>()?;
            out.push(SweepPoint {
                fraction,
                mixture: mixture.clone(),
                ema_at_5: MeanStd::of(&values),
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::fixtures::dialogue;

    #[test]
    fn subsample_is_dialogue_level_and_seeded() {
        let insts: Vec<Instance> = (0..40)
            .map(|i| {
                let mut d = dialogue(4, true);
                d.id = format!("d{}:{}", i / 2, i % 2);
                d
            })
            .collect();
        let refs: Vec<&Instance> = insts.iter().collect();
        let half = subsample(&refs, 0.5, 3).unwrap();
        assert_eq!(half.len(), 20);
        let keys: HashSet<&str> = half.iter().map(|i| i.dialogue_key()).collect();
        assert_eq!(keys.len(), 10);
        let again = subsample(&refs, 0.5, 3).unwrap();
        assert_eq!(
            half.iter().map(|i| &i.id).collect::<Vec<_>>(),
            again.iter().map(|i| &i.id).collect::<Vec<_>>()
        );
        assert!(subsample(&refs, 0.0, 3).is_err());
        assert_eq!(subsample(&refs, 1.0, 3).unwrap().len(), 40);
    }
}
