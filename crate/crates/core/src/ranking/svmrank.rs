//! Pairwise ranking SVM trained by averaged stochastic subgradient descent.
//!
//! Minimizes
//!
//! ```text
//! ½‖w‖² + (c/|P|) Σ_{(i,j)∈P} max(0, 1 − w·(x_i − x_j))
//! ```
//!
//! where `P` holds every within-group pair with `grade_i > grade_j`.
//! Dividing by `c` gives the Pegasos form `(λ/2)‖w‖² + mean hinge` with
//! `λ = 1/c`, which is what the update loop works on. The iterate is kept as
//! `scale · v` so the per-step shrink is O(1), and each epoch's averaged
//! iterate is compared with the best seen so far.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{LinearModel, QueryGroup, RankError, TrainerTag};
use crate::features::FEATURE_COUNT;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmRankOptions {
    pub c: f64,
    pub max_epochs: usize,
    /// Stop once the best objective improves by less than this fraction
    /// for a few epochs in a row.
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for SvmRankOptions {
    fn default() -> Self {
        Self {
            // The hinge term is a mean over pairs, so c needs to be large
            // for the data term to outweigh the regularizer.
            c: 100.0,
            max_epochs: 200,
            tolerance: 1e-6,
            seed: 42,
        }
    }
}

/// Consecutive epochs under the tolerance before stopping.
const PATIENCE: usize = 3;

/// `(better, worse)` flat item indices for every within-group pair with
/// unequal grades. Flat indices count items across `groups` in order.
pub fn pairs(groups: &[QueryGroup]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut offset = 0;
    for g in groups {
        for i in 0..g.len() {
            for j in 0..g.len() {
                if g.grades[i] > g.grades[j] {
                    out.push((offset + i, offset + j));
                }
            }
        }
        offset += g.len();
    }
    out
}

fn flatten(groups: &[QueryGroup]) -> Vec<&[f64]> {
    groups
        .iter()
        .flat_map(|g| g.items.iter().map(|x| x.values()))
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// The training objective at `w`.
pub fn svm_objective(groups: &[QueryGroup], w: &[f64], c: f64) -> Result<f64, RankError> {
    let p = pairs(groups);
    if p.is_empty() {
        return Err(RankError::NoPairs);
    }
    Ok(objective(&flatten(groups), &p, w, c))
}

fn objective(rows: &[&[f64]], pairs: &[(usize, usize)], w: &[f64], c: f64) -> f64 {
    let hinge: f64 = pairs
        .iter()
        .map(|&(i, j)| (1.0 - (dot(w, rows[i]) - dot(w, rows[j]))).max(0.0))
        .sum();
    0.5 * dot(w, w) + c * hinge / pairs.len() as f64
}

pub fn train_svmrank(groups: &[QueryGroup], opts: &SvmRankOptions) -> Result<LinearModel, RankError> {
    assert!(opts.c > 0.0, "c must be positive");
    let started = Instant::now();
    let schema = groups
        .iter()
        .flat_map(|g| g.items.first())
        .next()
        .map(|x| x.schema_version().to_string())
        .ok_or(RankError::EmptyInput)?;
    for g in groups {
        for x in &g.items {
            x.check_schema(&schema)?;
        }
    }

    let rows = flatten(groups);
    let mut order = pairs(groups);
    if order.is_empty() {
        return Err(RankError::NoPairs);
    }
    let n_pairs = order.len();
    let lambda = 1.0 / opts.c;
    // The optimum satisfies (λ/2)‖w‖² ≤ F(0) = 1.
    let radius = (2.0 / lambda).sqrt();

    let d = FEATURE_COUNT;
    let mut v = vec![0.0; d];
    let mut scale = 1.0;
    let mut v_norm2 = 0.0;
    let mut z = vec![0.0; d];
    let mut t: u64 = 0;

    let zero = vec![0.0; d];
    let mut best_w = zero.clone();
    let mut best_obj = objective(&rows, &order, &zero, opts.c);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut converged = false;
    let mut epochs = 0;
    let mut stalled = 0;

    for _ in 0..opts.max_epochs {
        epochs += 1;
        order.shuffle(&mut rng);
        // Σ_t scale_t·v_t over the epoch, accumulated lazily: `pending` is the
        // sum of scales since v last changed.
        let mut avg = vec![0.0; d];
        let mut pending = 0.0;

        for &(i, j) in &order {
            t += 1;
            let eta = 1.0 / (lambda * t as f64);
            let (xi, xj) = (rows[i], rows[j]);
            let mut vz = 0.0;
            let mut zz = 0.0;
            for k in 0..d {
                let zk = xi[k] - xj[k];
                z[k] = zk;
                vz += v[k] * zk;
                zz += zk * zk;
            }
            let margin = scale * vz;

            if t == 1 {
                v.iter_mut().for_each(|x| *x = 0.0);
                scale = 1.0;
                v_norm2 = 0.0;
            } else {
                scale *= 1.0 - 1.0 / t as f64;
            }

            if margin < 1.0 {
                for k in 0..d {
                    avg[k] += pending * v[k];
                }
                pending = 0.0;
                let a = eta / scale;
                // vz is still v·z: v was only rescaled (or zeroed at t = 1)
                let vz_now = if t == 1 { 0.0 } else { vz };
                for k in 0..d {
                    v[k] += a * z[k];
                }
                v_norm2 += 2.0 * a * vz_now + a * a * zz;
            }

            let norm = scale * v_norm2.max(0.0).sqrt();
            if norm > radius {
                scale *= radius / norm;
            }
            if scale < 1e-9 {
                for k in 0..d {
                    avg[k] += pending * v[k];
                    v[k] *= scale;
                }
                pending = 0.0;
                v_norm2 *= scale * scale;
                scale = 1.0;
            }
            pending += scale;
        }
        for k in 0..d {
            avg[k] += pending * v[k];
            avg[k] /= n_pairs as f64;
        }

        let last: Vec<f64> = v.iter().map(|x| x * scale).collect();
        let prev_best = best_obj;
        for cand in [avg, last] {
            let obj = objective(&rows, &order, &cand, opts.c);
            if obj < best_obj {
                best_obj = obj;
                best_w = cand;
            }
        }
        if (prev_best - best_obj) <= opts.tolerance * prev_best.abs().max(f64::MIN_POSITIVE) {
            stalled += 1;
            if stalled >= PATIENCE {
                converged = true;
                break;
            }
        } else {
            stalled = 0;
        }
    }

    if !converged {
        tracing::warn!(epochs, best_obj, "svmrank stopped at max_epochs before converging");
    }
    let mut model = LinearModel::new(best_w, schema, TrainerTag::Svmrank)?;
    let m = &mut model.metadata;
    m.hyperparameters.insert("c".into(), opts.c);
    m.hyperparameters.insert("max_epochs".into(), opts.max_epochs as f64);
    m.hyperparameters.insert("tolerance".into(), opts.tolerance);
    m.seed = opts.seed;
    m.iterations = epochs;
    m.converged = converged;
    m.pair_count = Some(n_pairs);
    m.final_objective = Some(best_obj);
    m.wall_time_secs = started.elapsed().as_secs_f64();
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FeatureVector;
    use crate::ranking::synthetic::{generate, SyntheticSpec};
    use crate::ranking::{order_by_score, pairwise_accuracy};

    fn one_feature_group(grades: &[u8]) -> QueryGroup {
        let items = grades
            .iter()
            .map(|&g| {
                let mut v = vec![0.0; FEATURE_COUNT];
                v[0] = f64::from(g);
                FeatureVector::new(v).unwrap()
            })
            .collect();
        QueryGroup::new("g", items, grades.to_vec())
    }

    /// Independent 1-D oracle: grid search of the objective over w[0].
    fn grid_minimizer(group: &QueryGroup, c: f64) -> f64 {
        let mut best = (f64::INFINITY, 0.0);
        for step in 0..=40_000 {
            let w0 = -2.0 + step as f64 * 1e-4;
            let grades = &group.grades;
            let mut hinge = 0.0;
            let mut n = 0.0;
            for i in 0..grades.len() {
                for j in 0..grades.len() {
                    if grades[i] > grades[j] {
                        hinge += (1.0 - w0 * f64::from(grades[i] - grades[j])).max(0.0);
                        n += 1.0;
                    }
                }
            }
            let obj = 0.5 * w0 * w0 + c * hinge / n;
            if obj < best.0 {
                best = (obj, w0);
            }
        }
        best.1
    }

    #[test]
    fn recovers_unit_weight_on_grade_feature() {
        let group = one_feature_group(&[1, 2, 3, 4, 5, 3, 2]);
        let c = 100.0;
        let oracle = grid_minimizer(&group, c);
        assert!((oracle - 1.0).abs() < 1e-3, "oracle {oracle}");
        let model = train_svmrank(std::slice::from_ref(&group), &SvmRankOptions { c, ..Default::default() }).unwrap();
        assert!((model.weights[0] - oracle).abs() < 1e-2, "w0 = {}", model.weights[0]);
        assert!(model.weights[1..].iter().all(|w| w.abs() < 1e-9));
    }

    #[test]
    fn all_equal_grades_have_no_pairs() {
        let group = one_feature_group(&[3, 3, 3]);
        assert_eq!(
            train_svmrank(&[group], &SvmRankOptions::default()).unwrap_err(),
            RankError::NoPairs
        );
        assert_eq!(train_svmrank(&[], &SvmRankOptions::default()).unwrap_err(), RankError::EmptyInput);
    }

    #[test]
    fn pairs_stay_within_groups() {
        let a = one_feature_group(&[1, 2]);
        let b = one_feature_group(&[2, 1, 1]);
        assert_eq!(pairs(&[a, b]), vec![(1, 0), (2, 3), (2, 4)]);
    }

    #[test]
    fn separable_data_recovers_true_order() {
        let spec = SyntheticSpec {
            groups: 4,
            items_per_group: 40,
            noise: 0.0,
            seed: 7,
            separation: 0.0,
        };
        let (groups, truth) = generate(&spec);
        let opts = SvmRankOptions::default();
        let model = train_svmrank(&groups, &opts).unwrap();
        assert!(pairwise_accuracy(&model, &groups).unwrap() >= 0.98);

        // Oracle: explicit sort by w*·x reproduces the grade order.
        for g in &groups {
            let truth_scores: Vec<f64> = g.items.iter().map(|x| x.dot(&truth)).collect();
            let by_truth = order_by_score(&truth_scores);
            let graded: Vec<u8> = by_truth.iter().map(|&i| g.grades[i]).collect();
            assert!(graded.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn beats_zero_and_is_deterministic() {
        let (groups, _) = generate(&SyntheticSpec {
            groups: 3,
            items_per_group: 30,
            noise: 0.3,
            seed: 11,
            separation: 0.0,
        });
        let opts = SvmRankOptions { c: 3.0, seed: 5, ..Default::default() };
        let a = train_svmrank(&groups, &opts).unwrap();
        let b = train_svmrank(&groups, &opts).unwrap();
        assert_eq!(a.weights, b.weights);
        let at_zero = svm_objective(&groups, &vec![0.0; FEATURE_COUNT], opts.c).unwrap();
        assert!((at_zero - opts.c).abs() < 1e-12);
        let at_w = svm_objective(&groups, &a.weights, opts.c).unwrap();
        assert!(at_w <= at_zero);
        assert!((a.metadata.final_objective.unwrap() - at_w).abs() < 1e-9 * at_w);
        assert_eq!(a.metadata.pair_count, Some(pairs(&groups).len()));
    }
}
