//! Seeded synthetic ranking data with a known scoring direction.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::QueryGroup;
use crate::features::{FeatureVector, FEATURE_COUNT};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticSpec {
    pub groups: usize,
    pub items_per_group: usize,
    /// Gaussian noise added to the true score, as a fraction of the true
    /// score's standard deviation.
    pub noise: f64,
    pub seed: u64,
    /// Shifts every item of grade `g` by `(g - 1) * separation` along
    /// `sign(w*)`, opening a margin between grade levels. 0 leaves the
    /// uniform features untouched.
    pub separation: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            groups: 10,
            items_per_group: 100,
            noise: 0.02,
            seed: 2014,
            separation: 0.0,
        }
    }
}

/// Draws a standard-normal `w*` and features uniform on [0, 1]. Within each
/// group, items are graded 1..=5 by quintile of `w*·x + noise`.
pub fn generate(spec: &SyntheticSpec) -> (Vec<QueryGroup>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let truth: Vec<f64> = (0..FEATURE_COUNT).map(|_| StandardNormal.sample(&mut rng)).collect();
    // w*·x with x ~ U[0,1]^d has variance Σ w_k² / 12.
    let score_sd = (truth.iter().map(|w| w * w).sum::<f64>() / 12.0).sqrt();
    let groups = (0..spec.groups)
        .map(|g| generate_group(&mut rng, &truth, score_sd, g, spec))
        .collect();
    (groups, truth)
}

/// A fresh draw from the same `w*` as [`generate`] with `spec`, using a
/// different item seed. Useful as held-out data.
pub fn generate_holdout(spec: &SyntheticSpec, item_seed: u64) -> Vec<QueryGroup> {
    let (_, truth) = generate(spec);
    let score_sd = (truth.iter().map(|w| w * w).sum::<f64>() / 12.0).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(item_seed);
    (0..spec.groups)
        .map(|g| generate_group(&mut rng, &truth, score_sd, g, spec))
        .collect()
}

fn generate_group(
    rng: &mut ChaCha8Rng,
    truth: &[f64],
    score_sd: f64,
    index: usize,
    spec: &SyntheticSpec,
) -> QueryGroup {
    let n = spec.items_per_group;
    let mut items = Vec::with_capacity(n);
    let mut noisy = Vec::with_capacity(n);
    for _ in 0..n {
        let x: Vec<f64> = (0..FEATURE_COUNT).map(|_| rng.random::<f64>()).collect();
        let eps: f64 = StandardNormal.sample(rng);
        let s: f64 = x.iter().zip(truth).map(|(a, b)| a * b).sum::<f64>() + spec.noise * score_sd * eps;
        noisy.push(s);
        items.push(FeatureVector::new(x).expect("finite"));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| noisy[a].total_cmp(&noisy[b]));
    let mut grades = vec![0u8; n];
    for (rank, &i) in order.iter().enumerate() {
        grades[i] = 1 + (rank * 5 / n.max(1)) as u8;
    }
    if spec.separation != 0.0 {
        for (x, &g) in items.iter_mut().zip(&grades) {
            let shift = f64::from(g - 1) * spec.separation;
            let moved = x.values().iter().zip(truth).map(|(v, w)| v + shift * w.signum()).collect();
            *x = FeatureVector::new(moved).expect("finite");
        }
    }
    QueryGroup::new(format!("event-{index:02}"), items, grades)
}
