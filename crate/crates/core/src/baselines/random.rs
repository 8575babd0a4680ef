//! Uniformly random rankings.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::corpus::Instance;
use crate::error::Result;
use crate::issue::{Issue, PriorityOrder};
use crate::metrics::PriorityModel;

pub fn random_rank<R: Rng + ?Sized>(m: usize, rng: &mut R) -> PriorityOrder {
    let mut issues: Vec<Issue> = Issue::all(m).collect();
    issues.shuffle(rng);
    PriorityOrder::new(issues).expect("shuffled permutation")
}

/// Draws a fresh ranking per (instance, k), reproducibly under `seed`.
#[derive(Clone, Debug, PartialEq)]
pub struct RandomModel {
    pub seed: u64,
    pub issues: usize,
}

impl RandomModel {
    pub fn new(seed: u64, issues: usize) -> Self {
        Self { seed, issues }
    }

    fn rng_for(&self, id: &str, k: usize) -> ChaCha8Rng {
        let mut h = Sha256::new();
        h.update(self.seed.to_le_bytes());
        h.update((k as u64).to_le_bytes());
        h.update(id.as_bytes());
        let digest = h.finalize();
        ChaCha8Rng::from_seed(digest.into())
    }
}

impl PriorityModel for RandomModel {
    fn name(&self) -> &str {
        "random"
    }

    /// Scores `(m - rank) / (m + 1)` of a uniformly drawn order.
    fn scores_at_k(&self, instance: &Instance, k: usize) -> Result<Vec<f64>> {
        let order = random_rank(self.issues, &mut self.rng_for(&instance.id, k));
        let m = self.issues as f64;
        Ok(Issue::all(self.issues)
            .map(|i| (m - order.rank_of(i) as f64) / (m + 1.0))
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::fixtures::dialogue;

    #[test]
    fn permutation_frequencies_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let orders = PriorityOrder::all_orders(3);
        let mut counts = vec![0usize; 6];
        let draws = 60_000;
        for _ in 0..draws {
            let o = random_rank(3, &mut rng);
            counts[orders.iter().position(|p| *p == o).unwrap()] += 1;
        }
        for c in counts {
            assert!((c as f64 / draws as f64 - 1.0 / 6.0).abs() <= 0.01);
        }
    }

    #[test]
    fn reproducible() {
        let a: Vec<_> = {
            let mut r = ChaCha8Rng::seed_from_u64(5);
            (0..20).map(|_| random_rank(3, &mut r)).collect()
        };
        let b: Vec<_> = {
            let mut r = ChaCha8Rng::seed_from_u64(5);
            (0..20).map(|_| random_rank(3, &mut r)).collect()
        };
        assert_eq!(a, b);
        let m = RandomModel::new(3, 3);
        let d = dialogue(6, true);
        assert_eq!(m.scores_at_k(&d, 2).unwrap(), m.scores_at_k(&d, 2).unwrap());
        let p = m.predict_at_k(&d, 2).unwrap();
        assert_eq!(p.len(), 3);
    }
}
