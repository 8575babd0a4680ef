//! Central-difference gradient checking.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{NeuralError, Result};
use crate::graph::Gradients;
use crate::params::{ParamId, ParamStore};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckOptions {
    pub epsilon: f64,
    /// Number of coordinates to probe; every tensor gets at least one.
    pub samples: usize,
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self {
            epsilon: 1e-5,
            samples: 200,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub checked: usize,
    /// Parameter name and flat index of the worst coordinate.
    pub worst: Option<(String, usize)>,
}

/// Compares `analytic` against `(f(p + ε) − f(p − ε)) / 2ε` on sampled
/// coordinates. The relative error of one coordinate is
/// `|a − n| / max(|a|, |n|, 1e-8)`.
pub fn grad_check<F>(
    store: &ParamStore,
    f: F,
    analytic: &Gradients,
    opts: &GradCheckOptions,
) -> Result<GradCheckReport>
where
    F: Fn(&ParamStore) -> Result<f64>,
{
    if !(opts.epsilon > 0.0) || !opts.epsilon.is_finite() {
        return Err(NeuralError::Argument(format!(
            "epsilon must be positive, got {}",
            opts.epsilon
        )));
    }
    let coords = sample_coordinates(store, opts.samples, opts.seed);
    let mut probe = store.clone();
    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        checked: 0,
        worst: None,
    };
    for (id, flat) in coords {
        let cols = store.get(id).ncols();
        let (r, c) = (flat / cols, flat % cols);
        let original = store.get(id)[[r, c]];

        probe.get_mut(id)[[r, c]] = original + opts.epsilon;
        let plus = f(&probe)?;
        probe.get_mut(id)[[r, c]] = original - opts.epsilon;
        let minus = f(&probe)?;
        probe.get_mut(id)[[r, c]] = original;

        let numeric = (plus - minus) / (2.0 * opts.epsilon);
        let a = analytic.coordinate(id, r, c);
        let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
        if !err.is_finite() {
            return Err(NeuralError::Numeric(format!(
                "gradient check of {} produced {err}",
                store.name(id)
            )));
        }
        report.checked += 1;
        if report.worst.is_none() || err > report.max_relative_error {
            report.max_relative_error = err;
            report.worst = Some((store.name(id).to_string(), flat));
        }
    }
    Ok(report)
}

fn sample_coordinates(store: &ParamStore, samples: usize, seed: u64) -> Vec<(ParamId, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut all: Vec<(ParamId, usize)> = store
        .ids()
        .flat_map(|id| (0..store.get(id).len()).map(move |i| (id, i)))
        .collect();
    if all.len() <= samples {
        return all;
    }
    let mut picked: Vec<(ParamId, usize)> = Vec::with_capacity(samples);
    for id in store.ids() {
        let n = store.get(id).len();
        if n > 0 {
            picked.push((id, rand::Rng::gen_range(&mut rng, 0..n)));
        }
    }
    all.retain(|c| !picked.contains(c));
    all.shuffle(&mut rng);
    let rest = samples.saturating_sub(picked.len());
    picked.extend(all.into_iter().take(rest));
    picked
}
