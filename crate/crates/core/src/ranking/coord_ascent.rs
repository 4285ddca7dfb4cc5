//! Coordinate ascent on mean NDCG@k.
//!
//! Each sweep visits every coordinate once and tries every offset in the
//! line-search grid, keeping the offset with the best mean NDCG if it
//! strictly improves. Weights are rescaled to unit L1 after a sweep (the
//! ranking does not change). The best of `n_restarts` runs wins.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{dcg_at_n, ideal_dcg_at_n, LinearModel, QueryGroup, RankError, TrainerTag};
use crate::features::FEATURE_COUNT;

/// Additive line-search offsets: 0 and ±{0.001 … 1} in a 1-2-5 ladder.
pub const DEFAULT_GRID: [f64; 21] = [
    -1.0, -0.5, -0.2, -0.1, -0.05, -0.02, -0.01, -0.005, -0.002, -0.001, 0.0, 0.001, 0.002, 0.005, 0.01, 0.02,
    0.05, 0.1, 0.2, 0.5, 1.0,
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoordinateAscentOptions {
    pub n_restarts: usize,
    pub grid: Vec<f64>,
    /// A sweep that improves mean NDCG by less than this ends a restart.
    pub epsilon: f64,
    pub seed: u64,
    pub target_cutoff: usize,
    /// Upper bound on sweeps per restart; 0 returns the initialization.
    pub max_sweeps: usize,
}

impl Default for CoordinateAscentOptions {
    fn default() -> Self {
        Self {
            n_restarts: 5,
            grid: DEFAULT_GRID.to_vec(),
            epsilon: 1e-4,
            seed: 42,
            target_cutoff: 50,
            max_sweeps: 25,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CoordinateAscentRun {
    pub model: LinearModel,
    /// Mean NDCG after initialization and after each accepted step, one
    /// trace per restart.
    pub traces: Vec<Vec<f64>>,
}

struct Data<'a> {
    rows: Vec<&'a [f64]>,
    /// Flat index ranges per group.
    spans: Vec<(usize, usize)>,
    grades: Vec<u8>,
    ideal: Vec<f64>,
    cutoff: usize,
}

impl<'a> Data<'a> {
    fn new(groups: &'a [QueryGroup], cutoff: usize) -> Result<Self, RankError> {
        let mut rows = Vec::new();
        let mut spans = Vec::new();
        let mut grades = Vec::new();
        let mut ideal = Vec::new();
        for g in groups {
            let start = rows.len();
            rows.extend(g.items.iter().map(|x| x.values()));
            grades.extend_from_slice(&g.grades);
            spans.push((start, rows.len()));
            ideal.push(ideal_dcg_at_n(&g.grades, cutoff)?);
        }
        Ok(Self {
            rows,
            spans,
            grades,
            ideal,
            cutoff,
        })
    }

    fn scores(&self, w: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|r| r.iter().zip(w).map(|(x, y)| x * y).sum())
            .collect()
    }

    /// Mean NDCG@cutoff for the given item scores. Ties rank by input
    /// position, matching [`super::rank`].
    fn mean_ndcg(&self, scores: &[f64], scratch: &mut Vec<usize>, ranked: &mut Vec<u8>) -> f64 {
        let mut total = 0.0;
        for (gi, &(start, end)) in self.spans.iter().enumerate() {
            if self.ideal[gi] == 0.0 {
                total += 1.0;
                continue;
            }
            scratch.clear();
            scratch.extend(start..end);
            let cmp = |a: &usize, b: &usize| scores[*b].total_cmp(&scores[*a]).then(a.cmp(b));
            let k = self.cutoff.min(scratch.len());
            if k < scratch.len() {
                scratch.select_nth_unstable_by(k - 1, cmp);
                scratch.truncate(k);
            }
            scratch.sort_unstable_by(cmp);
            ranked.clear();
            ranked.extend(scratch.iter().map(|&i| self.grades[i]));
            total += dcg_at_n(ranked, self.cutoff).expect("cutoff validated") / self.ideal[gi];
        }
        total / self.spans.len() as f64
    }
}

fn l1_normalize(w: &mut [f64]) -> f64 {
    let norm: f64 = w.iter().map(|x| x.abs()).sum();
    if norm > 0.0 {
        w.iter_mut().for_each(|x| *x /= norm);
    }
    norm
}

pub fn train_coordinate_ascent(
    groups: &[QueryGroup],
    opts: &CoordinateAscentOptions,
) -> Result<LinearModel, RankError> {
    train_coordinate_ascent_traced(groups, opts).map(|run| run.model)
}

pub fn train_coordinate_ascent_traced(
    groups: &[QueryGroup],
    opts: &CoordinateAscentOptions,
) -> Result<CoordinateAscentRun, RankError> {
    let started = Instant::now();
    if opts.target_cutoff < 1 {
        return Err(RankError::InvalidCutoff(opts.target_cutoff));
    }
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
    let data = Data::new(groups, opts.target_cutoff)?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut scratch = Vec::new();
    let mut ranked = Vec::new();

    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut traces = Vec::new();
    let mut total_sweeps = 0;
    let mut all_converged = true;

    for restart in 0..opts.n_restarts.max(1) {
        let mut w: Vec<f64> = if restart == 0 {
            vec![1.0 / FEATURE_COUNT as f64; FEATURE_COUNT]
        } else {
            let mut w: Vec<f64> = (0..FEATURE_COUNT).map(|_| rng.random_range(-1.0..1.0)).collect();
            l1_normalize(&mut w);
            w
        };
        let mut scores = data.scores(&w);
        let mut current = data.mean_ndcg(&scores, &mut scratch, &mut ranked);
        let mut trace = vec![current];
        let mut coords: Vec<usize> = (0..FEATURE_COUNT).collect();
        let mut converged = opts.max_sweeps == 0;
        let mut candidate = vec![0.0; scores.len()];

        for _ in 0..opts.max_sweeps {
            total_sweeps += 1;
            let sweep_start = current;
            coords.shuffle(&mut rng);
            for &j in &coords {
                let mut best_step: Option<(f64, f64)> = None;
                for &step in &opts.grid {
                    if step == 0.0 {
                        continue;
                    }
                    for (c, (s, row)) in candidate.iter_mut().zip(scores.iter().zip(&data.rows)) {
                        *c = s + step * row[j];
                    }
                    let value = data.mean_ndcg(&candidate, &mut scratch, &mut ranked);
                    if value > best_step.map_or(current, |b| b.0) {
                        best_step = Some((value, step));
                    }
                }
                if let Some((value, step)) = best_step {
                    w[j] += step;
                    for (s, row) in scores.iter_mut().zip(&data.rows) {
                        *s += step * row[j];
                    }
                    current = value;
                    trace.push(current);
                }
            }
            let norm = l1_normalize(&mut w);
            if norm > 0.0 {
                scores.iter_mut().for_each(|s| *s /= norm);
            }
            if current - sweep_start < opts.epsilon {
                converged = true;
                break;
            }
        }
        all_converged &= converged;
        traces.push(trace);
        if best.as_ref().is_none_or(|(b, _)| current > *b) {
            best = Some((current, w));
        }
    }

    let (ndcg, weights) = best.expect("at least one restart");
    let mut model = LinearModel::new(weights, schema, TrainerTag::CoordinateAscent)?;
    let m = &mut model.metadata;
    m.hyperparameters.insert("n_restarts".into(), opts.n_restarts as f64);
    m.hyperparameters.insert("grid_points".into(), opts.grid.len() as f64);
    m.hyperparameters.insert("epsilon".into(), opts.epsilon);
    m.hyperparameters.insert("target_cutoff".into(), opts.target_cutoff as f64);
    m.hyperparameters.insert("max_sweeps".into(), opts.max_sweeps as f64);
    m.seed = opts.seed;
    m.iterations = total_sweeps;
    m.converged = all_converged;
    m.final_ndcg = Some(ndcg);
    m.wall_time_secs = started.elapsed().as_secs_f64();
    Ok(CoordinateAscentRun { model, traces })
}
