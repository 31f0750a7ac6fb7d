//! Hyperparameter selection by K-fold cross-validation on held-out likelihood
//! risk, and split-gain variable importance with bootstrap intervals.

use log::{debug, warn};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::boosting::{fit, BoostedHazardModel, Booster, FitConfig, DEFAULT_LEARNING_RATE};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::grid::{build_grid, QuantileWeighting, SplitCandidateGrid, DEFAULT_QUANTILES};
use crate::numeric::{interpolated_percentile, CompensatedSum};
use crate::tree::axis_names;
use crate::boosting::HeldOutTracker;

const MAX_REDRAWS: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct CvConfig {
    pub max_splits: Vec<usize>,
    pub trees: Vec<usize>,
    pub folds: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub num_quantiles: usize,
    pub weighting: QuantileWeighting,
}

impl Default for CvConfig {
    fn default() -> Self {
        Self {
            max_splits: vec![1, 2, 3, 4],
            trees: vec![100, 150, 200, 250, 300],
            folds: 5,
            learning_rate: DEFAULT_LEARNING_RATE,
            seed: 7,
            num_quantiles: DEFAULT_QUANTILES,
            weighting: QuantileWeighting::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvCell {
    pub max_splits: usize,
    pub trees: usize,
    /// Held-out risk per fold; `None` for skipped folds.
    pub fold_risks: Vec<Option<f64>>,
    /// Mean over valid folds, `None` when fewer than half the folds are valid.
    pub mean_risk: Option<f64>,
}

impl CvCell {
    pub fn valid_folds(&self) -> usize {
        self.fold_risks.iter().flatten().count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvReport {
    /// Ordered by `max_splits`, then `trees`.
    pub cells: Vec<CvCell>,
    /// Fold of each subject.
    pub fold_of: Vec<usize>,
    pub selected: (usize, usize),
}

impl CvReport {
    pub fn selected_cell(&self) -> &CvCell {
        self.cells
            .iter()
            .find(|c| (c.max_splits, c.trees) == self.selected)
            .expect("selected cell is in the grid")
    }
}

/// Seeded subject-level fold labels: a shuffled order dealt round-robin.
pub fn fold_assignment(n: usize, folds: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut fold_of = vec![0; n];
    for (pos, &subject) in order.iter().enumerate() {
        fold_of[subject] = pos % folds;
    }
    fold_of
}

fn sorted_unique(values: &[usize]) -> Vec<usize> {
    let mut v = values.to_vec();
    v.sort_unstable();
    v.dedup();
    v
}

struct Fold {
    train: Dataset,
    test: Dataset,
    grid: SplitCandidateGrid,
}

/// Held-out risk of the `M`-tree prefix for every `M` in `trees` (sorted),
/// from a single fit of `max(trees)` trees.
fn path_risks(fold: &Fold, max_splits: usize, trees: &[usize], nu: f64) -> Result<Vec<f64>> {
    let max_m = *trees.last().expect("nonempty");
    let mut booster = Booster::new(&fold.train, &fold.grid, FitConfig::new(max_m, max_splits).with_learning_rate(nu))?;
    let mut tracker = HeldOutTracker::new(&fold.test, &fold.grid, booster.f0(), nu);
    let mut out = Vec::with_capacity(trees.len());
    let mut next = 0;
    for m in 0..=max_m {
        if m > 0 {
            let grown = booster.step();
            tracker.push(&grown.tree);
        }
        while next < trees.len() && trees[next] == m {
            out.push(tracker.risk());
            next += 1;
        }
    }
    Ok(out)
}

/// K-fold cross-validation over `(L, M)`. For each fold and `L` one fit of
/// `max(M)` trees is grown and scored on the held-out fold after every
/// candidate `M`. The grid and `F0` come from each training part.
pub fn kfold_cv(dataset: &Dataset, config: &CvConfig) -> Result<CvReport> {
    let ls = sorted_unique(&config.max_splits);
    let ms = sorted_unique(&config.trees);
    if ls.is_empty() || ms.is_empty() {
        return Err(Error::InvalidParameter("empty hyperparameter grid".into()));
    }
    if config.folds < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 folds, got {}", config.folds)));
    }
    if dataset.n() < config.folds {
        return Err(Error::InvalidParameter(format!(
            "{} subjects cannot fill {} folds",
            dataset.n(),
            config.folds
        )));
    }
    let report = dataset.validate();
    if !report.is_empty() {
        return Err(Error::InvalidDataset(report));
    }
    let k = config.folds;
    let fold_of = fold_assignment(dataset.n(), k, config.seed);
    let folds: Vec<Option<Fold>> = (0..k)
        .map(|f| {
            let (test_idx, train_idx): (Vec<usize>, Vec<usize>) = (0..dataset.n()).partition(|&i| fold_of[i] == f);
            let train = dataset.subset(&train_idx);
            if train.event_count() == 0 {
                warn!("fold {f}: training part has no events; fold skipped");
                return None;
            }
            let grid = build_grid(&train, config.num_quantiles, config.weighting);
            Some(Fold {
                train,
                test: dataset.subset(&test_idx),
                grid,
            })
        })
        .collect();

    let tasks: Vec<(usize, usize)> = (0..k).flat_map(|f| ls.iter().map(move |&l| (f, l))).collect();
    let results: Vec<Option<Vec<f64>>> = tasks
        .par_iter()
        .map(|&(f, l)| {
            folds[f]
                .as_ref()
                .map(|fold| path_risks(fold, l, &ms, config.learning_rate))
                .transpose()
        })
        .collect::<Result<_>>()?;

    let mut cells = Vec::with_capacity(ls.len() * ms.len());
    for (li, &l) in ls.iter().enumerate() {
        for (mi, &m) in ms.iter().enumerate() {
            let fold_risks: Vec<Option<f64>> = (0..k)
                .map(|f| results[f * ls.len() + li].as_ref().map(|r| r[mi]))
                .collect();
            let valid: Vec<f64> = fold_risks.iter().flatten().copied().collect();
            let mean_risk = (2 * valid.len() >= k)
                .then(|| valid.iter().copied().collect::<CompensatedSum>().value() / valid.len() as f64);
            debug!("cv L={l} M={m}: mean risk {mean_risk:?} over {} folds", valid.len());
            cells.push(CvCell {
                max_splits: l,
                trees: m,
                fold_risks,
                mean_risk,
            });
        }
    }
    // cells are ordered by (L, M), so strict improvement keeps the simpler pair on ties
    let mut best: Option<(&CvCell, f64)> = None;
    for cell in &cells {
        if let Some(r) = cell.mean_risk {
            if best.is_none_or(|(_, b)| r < b) {
                best = Some((cell, r));
            }
        }
    }
    let selected = best
        .map(|(c, _)| (c.max_splits, c.trees))
        .ok_or_else(|| Error::InvalidParameter("no hyperparameter cell has enough valid folds".into()))?;
    Ok(CvReport {
        cells,
        fold_of,
        selected,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImportanceReport {
    /// `time` followed by the covariate names.
    pub names: Vec<String>,
    /// Total risk reduction `sum(-d)` of the splits on each variable.
    pub raw: Vec<f64>,
    /// `100 * raw / max(raw)`.
    pub relative: Vec<f64>,
    /// Set when no split was accepted; relative scores are then all 0.
    pub degenerate: bool,
    /// Bootstrap 2.5% / 97.5% percentile bounds on the relative scores.
    pub intervals: Option<Vec<(f64, f64)>>,
}

fn relative_scores(raw: &[f64]) -> (Vec<f64>, bool) {
    let max = raw.iter().copied().fold(0.0, f64::max);
    if max <= 0.0 {
        return (vec![0.0; raw.len()], true);
    }
    let rel = raw
        .iter()
        .map(|&r| if r == max { 100.0 } else { 100.0 * r / max })
        .collect();
    (rel, false)
}

/// Importance from the split records kept in the model's trees.
pub fn variable_importance(model: &BoostedHazardModel) -> ImportanceReport {
    let names = axis_names(&model.schema);
    let mut sums = vec![CompensatedSum::new(); names.len()];
    for (_, axis, score) in model.split_records() {
        sums[axis.index()].add(-score);
    }
    let raw: Vec<f64> = sums.iter().map(|s| s.value().max(0.0)).collect();
    let (relative, degenerate) = relative_scores(&raw);
    ImportanceReport {
        names,
        raw,
        relative,
        degenerate,
        intervals: None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BootstrapConfig {
    pub fit: FitConfig,
    pub resamples: usize,
    pub seed: u64,
    pub num_quantiles: usize,
    pub weighting: QuantileWeighting,
}

impl BootstrapConfig {
    pub fn new(fit: FitConfig, resamples: usize, seed: u64) -> Self {
        Self {
            fit,
            resamples,
            seed,
            num_quantiles: DEFAULT_QUANTILES,
            weighting: QuantileWeighting::default(),
        }
    }
}

/// Subject indices of bootstrap resample `b`, redrawn while it has no events.
pub fn bootstrap_indices(dataset: &Dataset, seed: u64, b: usize) -> Result<Vec<usize>> {
    let n = dataset.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(b as u64);
    for _ in 0..MAX_REDRAWS {
        let idx: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
        if idx.iter().any(|&i| dataset.samples[i].event) {
            return Ok(idx);
        }
    }
    Err(Error::BootstrapExhausted { attempts: MAX_REDRAWS })
}

/// Importance of a fit on the full data, with percentile intervals from
/// `resamples` subject-level bootstrap refits (grid rebuilt per resample).
pub fn bootstrap_importance(dataset: &Dataset, config: &BootstrapConfig) -> Result<ImportanceReport> {
    if config.resamples < 2 {
        return Err(Error::InvalidParameter(format!(
            "need at least 2 bootstrap resamples, got {}",
            config.resamples
        )));
    }
    let grid = build_grid(dataset, config.num_quantiles, config.weighting);
    let mut report = variable_importance(&fit(dataset, &grid, config.fit)?);
    let draws: Vec<Vec<f64>> = (0..config.resamples)
        .into_par_iter()
        .map(|b| {
            let resample = dataset.subset(&bootstrap_indices(dataset, config.seed, b)?);
            let grid = build_grid(&resample, config.num_quantiles, config.weighting);
            Ok(variable_importance(&fit(&resample, &grid, config.fit)?).relative)
        })
        .collect::<Result<_>>()?;
    let intervals = (0..report.names.len())
        .map(|k| {
            let mut v: Vec<f64> = draws.iter().map(|d| d[k]).collect();
            v.sort_by(f64::total_cmp);
            (interpolated_percentile(&v, 0.025), interpolated_percentile(&v, 0.975))
        })
        .collect();
    report.intervals = Some(intervals);
    Ok(report)
}
