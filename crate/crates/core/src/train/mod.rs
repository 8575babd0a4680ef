//! Training loop with per-epoch model selection, checkpoints and the
//! cross-validation harness.
//!
//! Gradients are computed per instance (in parallel) and summed in a fixed
//! order, so a run is bit-reproducible for a given seed regardless of the
//! thread count.

pub mod checkpoint;
pub mod config;
pub mod crossval;
pub mod model;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use oppmodel_neural::{Adam, AdamConfig, Gradients, Graph, ParamStore};

use crate::corpus::Instance;
use crate::error::{Error, Result};
use crate::loss::hinge_terms;
use crate::metrics::{ema, PriorityModel};

pub use checkpoint::{Checkpoint, ModelState};
pub use config::{derive_seed, ModelKind, Precision, TrainConfig};
pub use crossval::{crossval, data_fraction_sweep, CrossvalResult, FoldResult, SweepPoint};
pub use model::{AnyModel, Trainable};

/// The k at which tuning EMA is measured.
pub const SELECTION_K: usize = 5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    /// Percent; absent when there is no tuning data.
    pub tune_ema_at_5: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub model: AnyModel,
    pub checkpoint: Checkpoint,
    pub history: Vec<EpochRecord>,
}

/// EMA (percent) at `k` over fully labelled instances; `None` when there
/// are none.
pub fn ema_at_k<M: PriorityModel + ?Sized>(
    instances: &[&Instance],
    model: &M,
    k: usize,
) -> Result<Option<f64>> {
    let full: Vec<&Instance> = instances
        .iter()
        .copied()
        .filter(|i| i.has_full_label())
        .collect();
    if full.is_empty() {
        return Ok(None);
    }
    let hits = full
        .par_iter()
        .map(|inst| ema(&model.predict_at_k(inst, k)?, &inst.label))
        .collect::<Result<Vec<f64>>>()?;
    Ok(Some(100.0 * hits.iter().sum::<f64>() / full.len() as f64))
}

/// Loss and gradients of one instance.
pub fn instance_gradients<T: Trainable + ?Sized>(
    model: &T,
    instance: &Instance,
    config: &TrainConfig,
    seed: u64,
) -> Result<(f64, Gradients)> {
    let mut g = if config.dropout > 0.0 {
        Graph::training(model.params(), config.dropout, seed)?
    } else {
        Graph::new(model.params())
    };
    let scores = model.score_node(&mut g, instance)?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(&[seed, 1]));
    let terms = hinge_terms(instance, &config.loss, &mut rng)?;
    let loss = g.pair_hinge(scores, &terms, config.loss.margin)?;
    let value = g.value(loss)[[0, 0]];
    if !value.is_finite() {
        return Err(Error::Numeric(format!(
            "loss {value} on instance {}",
            instance.id
        )));
    }
    Ok((value, g.backward(loss)?))
}

/// Mean loss and summed-then-averaged gradients over a batch.
pub fn batch_gradients<T: Trainable + ?Sized>(
    model: &T,
    batch: &[(&Instance, u64)],
    config: &TrainConfig,
) -> Result<(f64, Gradients)> {
    let parts = batch
        .par_iter()
        .map(|(inst, seed)| instance_gradients(model, inst, config, *seed))
        .collect::<Result<Vec<_>>>()?;
    let mut total = Gradients::empty(model.params().len());
    let mut loss = 0.0;
    for (l, g) in &parts {
        loss += l;
        total.accumulate(g);
    }
    let n = batch.len() as f64;
    total.scale(1.0 / n);
    Ok((loss / n, total))
}

struct Fit {
    best: ParamStore,
    best_epoch: usize,
    best_ema: Option<f64>,
    history: Vec<EpochRecord>,
}

fn fit<T: Trainable>(
    model: &mut T,
    config: &TrainConfig,
    train: &[&Instance],
    tune: &[&Instance],
) -> Result<Fit> {
    let mut adam = Adam::new(model.params(), AdamConfig::with_lr(config.learning_rate()));
    let mut best: Option<(usize, Option<f64>, ParamStore)> = None;
    let mut history = Vec::with_capacity(config.epochs);
    let mut order: Vec<usize> = (0..train.len()).collect();
    for epoch in 1..=config.epochs {
        let mut shuffle_rng =
            ChaCha8Rng::seed_from_u64(derive_seed(&[config.seed, epoch as u64, 0]));
        order.shuffle(&mut shuffle_rng);
        let mut loss_sum = 0.0;
        for chunk in order.chunks(config.batch) {
            let batch: Vec<(&Instance, u64)> = chunk
                .iter()
                .map(|&i| {
                    (
                        train[i],
                        derive_seed(&[config.seed, epoch as u64, 1, i as u64]),
                    )
                })
                .collect();
            let (loss, grads) = batch_gradients(&*model, &batch, config).map_err(|e| match e {
                Error::Numeric(msg) => Error::Numeric(format!("epoch {epoch}: {msg}")),
                other => other,
            })?;
            loss_sum += loss * chunk.len() as f64;
            adam.step(model.params_mut(), &grads)?;
        }
        let train_loss = loss_sum / train.len() as f64;
        let tune_ema = ema_at_k(tune, &*model, SELECTION_K)?;
        log::info!(
            "epoch {epoch}: train loss {train_loss:.5}, tune EMA@{SELECTION_K} {}",
            tune_ema.map_or("n/a".to_string(), |v| format!("{v:.2}"))
        );
        history.push(EpochRecord {
            epoch,
            train_loss,
            tune_ema_at_5: tune_ema,
        });
        let better = match (&best, tune_ema) {
            (None, _) => true,
            (Some((_, Some(b), _)), Some(v)) => v > *b,
            // without tuning data the last epoch is kept
            (Some(_), None) => true,
            (Some((_, None, _)), Some(_)) => true,
        };
        if better {
            best = Some((epoch, tune_ema, model.params().clone()));
        }
    }
    let (best_epoch, best_ema, best) = best.expect("at least one epoch");
    Ok(Fit {
        best,
        best_epoch,
        best_ema,
        history,
    })
}

/// Trains on the instances whose source is in the mixture and returns the
/// epoch with the highest tuning EMA@5 (earliest on ties).
pub fn train_model(
    config: &TrainConfig,
    train: &[&Instance],
    tune: &[&Instance],
) -> Result<TrainOutcome> {
    config.validate()?;
    let train: Vec<&Instance> = train
        .iter()
        .copied()
        .filter(|i| config.mixture.contains(&i.source))
        .collect();
    if train.is_empty() {
        return Err(Error::Argument(
            "no training instances match the mixture".into(),
        ));
    }
    let mut model = AnyModel::initialise(config, &train)?;
    let (epoch, tune_ema, history) = match &mut model {
        AnyModel::Ranker(m) => {
            let f = fit(m, config, &train, tune)?;
            m.store_mut().load_values_from(&f.best)?;
            (f.best_epoch, f.best_ema, f.history)
        }
        AnyModel::Bow(m) => {
            let f = fit(m, config, &train, tune)?;
            m.store_mut().load_values_from(&f.best)?;
            (f.best_epoch, f.best_ema, f.history)
        }
        AnyModel::Random(m) => (0, ema_at_k(tune, m, SELECTION_K)?, Vec::new()),
    };
    let checkpoint = Checkpoint::new(config, &model, epoch, tune_ema);
    Ok(TrainOutcome {
        model,
        checkpoint,
        history,
    })
}
