use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    ndcg_at_n, rank, train_coordinate_ascent, train_svmrank, CoordinateAscentOptions, LinearModel, QueryGroup,
    RankError, SvmRankOptions, TrainerTag,
};
use crate::features::{fit_scaler, FeatureVector};

pub const DEFAULT_CUTOFFS: [usize; 4] = [25, 50, 75, 100];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Trainer {
    Svmrank(SvmRankOptions),
    CoordinateAscent(CoordinateAscentOptions),
}

impl Trainer {
    pub fn tag(&self) -> TrainerTag {
        match self {
            Trainer::Svmrank(_) => TrainerTag::Svmrank,
            Trainer::CoordinateAscent(_) => TrainerTag::CoordinateAscent,
        }
    }

    pub fn train(&self, groups: &[QueryGroup]) -> Result<LinearModel, RankError> {
        match self {
            Trainer::Svmrank(o) => train_svmrank(groups, o),
            Trainer::CoordinateAscent(o) => train_coordinate_ascent(groups, o),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FoldUnit {
    /// Whole query groups are assigned to folds.
    Group,
    /// Fewer groups than folds: each group is split by grade-stratified
    /// round robin and every fold tests on a slice of every group.
    StratifiedWithinGroup,
}

#[derive(Debug, Clone)]
pub struct Folds {
    pub unit: FoldUnit,
    /// `(train, test)` per fold.
    pub splits: Vec<(Vec<QueryGroup>, Vec<QueryGroup>)>,
}

/// Deterministic k-fold assignment.
pub fn make_folds(groups: &[QueryGroup], k: usize, seed: u64) -> Result<Folds, RankError> {
    if k < 2 {
        return Err(RankError::InsufficientData(format!("k must be >= 2, got {k}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if groups.len() >= k {
        let mut idx: Vec<usize> = (0..groups.len()).collect();
        idx.shuffle(&mut rng);
        let splits = (0..k)
            .map(|f| {
                let (mut train, mut test) = (Vec::new(), Vec::new());
                for (pos, &g) in idx.iter().enumerate() {
                    if pos % k == f {
                        test.push(groups[g].clone());
                    } else {
                        train.push(groups[g].clone());
                    }
                }
                (train, test)
            })
            .collect();
        return Ok(Folds {
            unit: FoldUnit::Group,
            splits,
        });
    }

    if groups.is_empty() {
        return Err(RankError::InsufficientData("no groups".into()));
    }
    // fold id per item, per group
    let mut assignment: Vec<Vec<usize>> = Vec::with_capacity(groups.len());
    for g in groups {
        if g.len() < 2 * k {
            return Err(RankError::InsufficientData(format!(
                "group {} has {} items; within-group folds need at least {}",
                g.event_id,
                g.len(),
                2 * k
            )));
        }
        let mut idx: Vec<usize> = (0..g.len()).collect();
        idx.shuffle(&mut rng);
        // stable sort keeps the shuffle inside each grade
        idx.sort_by_key(|&i| std::cmp::Reverse(g.grades[i]));
        let mut fold_of = vec![0; g.len()];
        for (pos, &i) in idx.iter().enumerate() {
            fold_of[i] = pos % k;
        }
        assignment.push(fold_of);
    }
    let splits = (0..k)
        .map(|f| {
            let (mut train, mut test) = (Vec::new(), Vec::new());
            for (g, fold_of) in groups.iter().zip(&assignment) {
                let (te, tr): (Vec<usize>, Vec<usize>) = (0..g.len()).partition(|&i| fold_of[i] == f);
                train.push(g.subset(&tr));
                test.push(g.subset(&te));
            }
            (train, test)
        })
        .collect();
    Ok(Folds {
        unit: FoldUnit::StratifiedWithinGroup,
        splits,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub train_groups: usize,
    pub test_groups: usize,
    pub train_examples: usize,
    pub test_examples: usize,
    pub ndcg: BTreeMap<usize, f64>,
    pub train_secs: f64,
    pub test_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub trainer: TrainerTag,
    pub k: usize,
    pub seed: u64,
    pub fold_unit: FoldUnit,
    pub cutoffs: Vec<usize>,
    pub folds: Vec<FoldReport>,
    pub mean_ndcg: BTreeMap<usize, f64>,
    pub mean_train_secs: f64,
    pub mean_test_secs: f64,
}

fn scale_groups(groups: &[QueryGroup], scaler: &crate::features::ScalerParams) -> Result<Vec<QueryGroup>, RankError> {
    groups
        .iter()
        .map(|g| {
            let items = g
                .items
                .iter()
                .map(|x| scaler.apply(x))
                .collect::<Result<Vec<FeatureVector>, _>>()?;
            Ok(QueryGroup::new(g.event_id.clone(), items, g.grades.clone()))
        })
        .collect()
}

fn run_fold(
    fold: usize,
    train: &[QueryGroup],
    test: &[QueryGroup],
    trainer: &Trainer,
    cutoffs: &[usize],
) -> Result<FoldReport, RankError> {
    // Scaling is part of training: fitted on the training side only.
    let started = Instant::now();
    let rows: Vec<FeatureVector> = train.iter().flat_map(|g| g.items.iter().cloned()).collect();
    let scaler = fit_scaler(&rows)?;
    let train_scaled = scale_groups(train, &scaler)?;
    let model = trainer.train(&train_scaled)?;
    let train_secs = started.elapsed().as_secs_f64();

    let started = Instant::now();
    let test_scaled = scale_groups(test, &scaler)?;
    let mut sums: BTreeMap<usize, f64> = cutoffs.iter().map(|&c| (c, 0.0)).collect();
    for g in &test_scaled {
        let r = rank(&model, &g.items)?;
        let ranked: Vec<u8> = r.ordering.iter().map(|&i| g.grades[i]).collect();
        for &c in cutoffs {
            *sums.get_mut(&c).unwrap() += ndcg_at_n(&ranked, c)?;
        }
    }
    let test_secs = started.elapsed().as_secs_f64();
    let n_test = test.len().max(1) as f64;
    Ok(FoldReport {
        fold,
        train_groups: train.len(),
        test_groups: test.len(),
        train_examples: train.iter().map(QueryGroup::len).sum(),
        test_examples: test.iter().map(QueryGroup::len).sum(),
        ndcg: sums.into_iter().map(|(c, s)| (c, s / n_test)).collect(),
        train_secs,
        test_secs,
    })
}

fn summarize(trainer: TrainerTag, k: usize, seed: u64, unit: FoldUnit, cutoffs: &[usize], folds: Vec<FoldReport>) -> CvReport {
    let n = folds.len() as f64;
    let mean_ndcg = cutoffs
        .iter()
        .map(|&c| (c, folds.iter().map(|f| f.ndcg[&c]).sum::<f64>() / n))
        .collect();
    CvReport {
        trainer,
        k,
        seed,
        fold_unit: unit,
        cutoffs: cutoffs.to_vec(),
        mean_ndcg,
        mean_train_secs: folds.iter().map(|f| f.train_secs).sum::<f64>() / n,
        mean_test_secs: folds.iter().map(|f| f.test_secs).sum::<f64>() / n,
        folds,
    }
}

pub fn cross_validate(
    groups: &[QueryGroup],
    k: usize,
    trainer: &Trainer,
    cutoffs: &[usize],
    seed: u64,
) -> Result<CvReport, RankError> {
    let mut all = cross_validate_all(groups, k, std::slice::from_ref(trainer), cutoffs, seed)?;
    Ok(all.remove(0))
}

/// Runs every trainer on the same folds.
pub fn cross_validate_all(
    groups: &[QueryGroup],
    k: usize,
    trainers: &[Trainer],
    cutoffs: &[usize],
    seed: u64,
) -> Result<Vec<CvReport>, RankError> {
    if let Some(&bad) = cutoffs.iter().find(|&&c| c < 1) {
        return Err(RankError::InvalidCutoff(bad));
    }
    let folds = make_folds(groups, k, seed)?;
    trainers
        .iter()
        .map(|trainer| {
            let reports = folds
                .splits
                .iter()
                .enumerate()
                .map(|(f, (train, test))| run_fold(f, train, test, trainer, cutoffs))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(summarize(trainer.tag(), k, seed, folds.unit, cutoffs, reports))
        })
        .collect()
}

/// Plain-text comparison table: NDCG rows, then training and testing time.
pub fn render_table(reports: &[CvReport]) -> String {
    let mut out = String::new();
    let width = 20;
    let _ = write!(out, "{:<14}", "");
    for r in reports {
        let _ = write!(out, "{:>width$}", r.trainer.to_string());
    }
    out.push('\n');
    let cutoffs = reports.first().map(|r| r.cutoffs.clone()).unwrap_or_default();
    for c in cutoffs {
        let _ = write!(out, "{:<14}", format!("NDCG@{c}"));
        for r in reports {
            let _ = write!(out, "{:>width$.4}", r.mean_ndcg.get(&c).copied().unwrap_or(f64::NAN));
        }
        out.push('\n');
    }
    let _ = write!(out, "{:<14}", "Time (train)");
    for r in reports {
        let _ = write!(out, "{:>width$}", format!("{:.3} s", r.mean_train_secs));
    }
    out.push('\n');
    let _ = write!(out, "{:<14}", "Time (test)");
    for r in reports {
        let _ = write!(out, "{:>width$}", format!("{:.3} s", r.mean_test_secs));
    }
    out.push('\n');
    if let Some(r) = reports.first() {
        let unit = match r.fold_unit {
            FoldUnit::Group => "folds by query group",
            FoldUnit::StratifiedWithinGroup => "fewer groups than folds: grade-stratified split within each group",
        };
        let _ = writeln!(out, "{}-fold cross-validation, seed {}, {unit}", r.k, r.seed);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ranking::synthetic::{generate, SyntheticSpec};

    fn small(groups: usize, items: usize) -> Vec<QueryGroup> {
        generate(&SyntheticSpec {
            groups,
            items_per_group: items,
            noise: 0.0,
            seed: 1,
            separation: 0.0,
        })
        .0
    }

    #[test]
    fn group_folds_partition_groups() {
        let groups = small(8, 10);
        let folds = make_folds(&groups, 4, 3).unwrap();
        assert_eq!(folds.unit, FoldUnit::Group);
        assert_eq!(folds.splits.len(), 4);
        let mut seen = Vec::new();
        for (train, test) in &folds.splits {
            assert_eq!(test.len(), 2);
            assert_eq!(train.len(), 6);
            seen.extend(test.iter().map(|g| g.event_id.clone()));
        }
        seen.sort();
        seen.dedup();
        assert_eq!(seen.len(), 8);
        // same seed, same folds
        let again = make_folds(&groups, 4, 3).unwrap();
        for (a, b) in folds.splits.iter().zip(&again.splits) {
            assert_eq!(a.1, b.1);
        }
    }

    #[test]
    fn single_group_falls_back_to_stratified_split() {
        let groups = small(1, 40);
        let folds = make_folds(&groups, 4, 3).unwrap();
        assert_eq!(folds.unit, FoldUnit::StratifiedWithinGroup);
        for (train, test) in &folds.splits {
            assert_eq!(test[0].len(), 10);
            assert_eq!(train[0].len(), 30);
            // 8 items per grade → 2 per fold
            for grade in 1..=5u8 {
                assert_eq!(test[0].grades.iter().filter(|&&g| g == grade).count(), 2);
            }
        }
        assert!(make_folds(&small(1, 7), 4, 3).is_err());
    }

    #[test]
    fn separable_data_scores_one() {
        let (groups, _) = generate(&SyntheticSpec {
            groups: 8,
            items_per_group: 30,
            noise: 0.0,
            seed: 1,
            separation: 1.0,
        });
        let trainer = Trainer::Svmrank(SvmRankOptions::default());
        let report = cross_validate(&groups, 4, &trainer, &[25], 1).unwrap();
        assert_eq!(report.folds.len(), 4);
        assert_eq!(report.mean_ndcg[&25], 1.0, "{:?}", report.mean_ndcg);
        let table = render_table(&[report]);
        assert!(table.contains("NDCG@25"));
        assert!(table.contains("Time (train)"));
    }
}
