//! The boosting loop: `F_{m+1} = F_m - nu * g_m`, starting from the best
//! constant log-hazard, plus hazard and survival prediction.

use log::{debug, warn};

use crate::data::{Dataset, FunctionalSample, Schema};
use crate::error::{Error, Result};
use crate::exposure::ExposureTable;
use crate::grid::SplitCandidateGrid;
use crate::numeric::CompensatedSum;
use crate::tree::{for_each_piece, GrownTree, LogHazard, RegressionTree, SearchScope, TreeGrower};

pub const DEFAULT_LEARNING_RATE: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitConfig {
    /// Boosting iterations `M`.
    pub trees: usize,
    /// Maximum splits per tree `L`.
    pub max_splits: usize,
    /// Learning rate `nu` in `(0, 1]`.
    pub learning_rate: f64,
    pub scope: SearchScope,
}

impl FitConfig {
    pub fn new(trees: usize, max_splits: usize) -> Self {
        Self {
            trees,
            max_splits,
            learning_rate: DEFAULT_LEARNING_RATE,
            scope: SearchScope::NewLeaves,
        }
    }

    pub fn with_learning_rate(mut self, nu: f64) -> Self {
        self.learning_rate = nu;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.trees == 0 {
            return Err(Error::InvalidParameter("M must be at least 1".into()));
        }
        if self.max_splits == 0 {
            return Err(Error::InvalidParameter("L must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "learning rate {} outside (0, 1]",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

/// `log(total events / total follow-up)`, the risk-minimizing constant.
pub fn init_f0(dataset: &Dataset) -> Result<f64> {
    let events = dataset.event_count();
    if events == 0 {
        return Err(Error::NoEvents);
    }
    Ok((events as f64 / dataset.total_followup()).ln())
}

/// Fitted ensemble; `lambda(t, x) = exp(f0 - nu * sum_m g_m(t, x))`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoostedHazardModel {
    pub f0: f64,
    pub learning_rate: f64,
    pub max_splits: usize,
    pub trees: Vec<RegressionTree>,
    pub schema: Schema,
    pub grid: SplitCandidateGrid,
    /// Training risk before the first tree and after each tree.
    pub risk_trace: Vec<f64>,
}

impl BoostedHazardModel {
    /// Ensemble with no trees.
    pub fn constant(f0: f64, schema: Schema, grid: SplitCandidateGrid) -> Self {
        Self {
            f0,
            learning_rate: DEFAULT_LEARNING_RATE,
            max_splits: 1,
            trees: Vec::new(),
            schema,
            grid,
            risk_trace: Vec::new(),
        }
    }

    /// Model built from the first `m` trees.
    pub fn truncated(&self, m: usize) -> Self {
        let mut out = self.clone();
        out.trees.truncate(m);
        out.risk_trace.truncate(m + 1);
        out
    }

    /// `F_M(t, x)` without schema checks.
    pub fn log_hazard_at(&self, t: f64, x: &[f64]) -> f64 {
        let mut f = self.f0;
        for tree in &self.trees {
            f -= self.learning_rate * tree.evaluate(t, x);
        }
        f
    }

    pub fn predict_log_hazard(&self, t: f64, x: &[f64]) -> Result<f64> {
        self.schema.check_point(x)?;
        Ok(self.log_hazard_at(t, x))
    }

    pub fn predict_hazard(&self, t: f64, x: &[f64]) -> Result<f64> {
        Ok(self.predict_log_hazard(t, x)?.exp())
    }

    /// `integral_0^t lambda(u, X(u)) du` along the sample's trajectory.
    pub fn cumulative_hazard(&self, sample: &FunctionalSample, t: f64) -> Result<f64> {
        let covered = sample.covered_until();
        if t > covered {
            return Err(Error::TrajectoryTooShort { t, covered });
        }
        let mut total = CompensatedSum::new();
        for_each_piece(&sample.epochs, &self.grid.time_cuts, t, |end, dt, x| {
            total.add(self.log_hazard_at(end, x).exp() * dt);
        });
        Ok(total.value())
    }

    pub fn predict_survival(&self, sample: &FunctionalSample, t: f64) -> Result<f64> {
        Ok((-self.cumulative_hazard(sample, t)?).exp())
    }

    /// The same model with its hazard multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.f0 += factor.ln();
        out
    }

    /// Accepted splits of every tree as `(tree index, axis, score)`.
    pub fn split_records(&self) -> impl Iterator<Item = (usize, crate::tree::Axis, f64)> + '_ {
        self.trees
            .iter()
            .enumerate()
            .flat_map(|(m, tree)| tree.splits().map(move |(axis, score)| (m, axis, score)))
    }
}

impl LogHazard for BoostedHazardModel {
    fn log_hazard(&self, t: f64, x: &[f64]) -> f64 {
        self.log_hazard_at(t, x)
    }
}

/// Incremental boosting state over a fixed training table. Exposed so cross
/// validation can observe the ensemble after every tree.
pub struct Booster<'a> {
    table: ExposureTable,
    grid: &'a SplitCandidateGrid,
    config: FitConfig,
    f0: f64,
    log_hazard: Vec<f64>,
    trees: Vec<RegressionTree>,
    risk_trace: Vec<f64>,
    schema: Schema,
}

impl<'a> Booster<'a> {
    pub fn new(dataset: &Dataset, grid: &'a SplitCandidateGrid, config: FitConfig) -> Result<Self> {
        config.validate()?;
        let report = dataset.validate();
        if !report.is_empty() {
            return Err(Error::InvalidDataset(report));
        }
        if grid.p() != dataset.p() {
            return Err(Error::InvalidParameter(format!(
                "grid has {} covariates, dataset has {}",
                grid.p(),
                dataset.p()
            )));
        }
        let f0 = init_f0(dataset)?;
        let table = ExposureTable::new(dataset, grid);
        let log_hazard = vec![f0; table.len()];
        let risk = table.risk(&log_hazard);
        Ok(Self {
            table,
            grid,
            config,
            f0,
            log_hazard,
            trees: Vec::with_capacity(config.trees),
            risk_trace: vec![risk],
            schema: dataset.schema.clone(),
        })
    }

    pub fn f0(&self) -> f64 {
        self.f0
    }

    pub fn iterations(&self) -> usize {
        self.trees.len()
    }

    pub fn table(&self) -> &ExposureTable {
        &self.table
    }

    /// Current `F_m` on every training piece.
    pub fn log_hazard(&self) -> &[f64] {
        &self.log_hazard
    }

    pub fn current_risk(&self) -> f64 {
        *self.risk_trace.last().expect("trace starts with F0 risk")
    }

    /// Grows `g_m`, applies `F <- F - nu g_m` and returns the grown tree.
    pub fn step(&mut self) -> GrownTree {
        let grown = TreeGrower::new(&self.table, self.grid, &self.log_hazard)
            .grow(self.config.max_splits, self.config.scope);
        if grown.splits.is_empty() {
            debug!("iteration {}: no admissible split, zero tree", self.trees.len());
        }
        grown.apply(&mut self.log_hazard, self.config.learning_rate);
        let risk = self.table.risk(&self.log_hazard);
        let previous = self.current_risk();
        if risk > previous + 1e-12 * previous.abs().max(1.0) {
            warn!(
                "iteration {}: training risk rose from {previous} to {risk}",
                self.trees.len()
            );
        }
        self.risk_trace.push(risk);
        self.trees.push(grown.tree.clone());
        grown
    }

    pub fn into_model(self) -> BoostedHazardModel {
        BoostedHazardModel {
            f0: self.f0,
            learning_rate: self.config.learning_rate,
            max_splits: self.config.max_splits,
            trees: self.trees,
            schema: self.schema,
            grid: self.grid.clone(),
            risk_trace: self.risk_trace,
        }
    }
}

/// Fits `M` trees. Deterministic in its inputs.
pub fn fit(dataset: &Dataset, grid: &SplitCandidateGrid, config: FitConfig) -> Result<BoostedHazardModel> {
    let mut booster = Booster::new(dataset, grid, config)?;
    for _ in 0..config.trees {
        booster.step();
    }
    let model = booster.into_model();
    debug!(
        "fit M={} L={} nu={}: risk {} -> {}",
        config.trees,
        config.max_splits,
        config.learning_rate,
        model.risk_trace[0],
        model.risk_trace.last().copied().unwrap_or(f64::NAN)
    );
    Ok(model)
}

/// Likelihood risk of a fitted model on (possibly held-out) data.
pub fn model_risk(model: &BoostedHazardModel, dataset: &Dataset) -> f64 {
    crate::tree::likelihood_risk(dataset, model, &model.grid.time_cuts)
}

/// Tracks `F` of a growing ensemble on a held-out dataset, one tree at a time.
pub struct HeldOutTracker {
    table: ExposureTable,
    log_hazard: Vec<f64>,
    learning_rate: f64,
}

impl HeldOutTracker {
    pub fn new(dataset: &Dataset, grid: &SplitCandidateGrid, f0: f64, learning_rate: f64) -> Self {
        let table = ExposureTable::new(dataset, grid);
        let log_hazard = vec![f0; table.len()];
        Self {
            table,
            log_hazard,
            learning_rate,
        }
    }

    pub fn push(&mut self, tree: &RegressionTree) {
        if tree.is_zero() {
            return;
        }
        for (p, f) in self.log_hazard.iter_mut().enumerate() {
            *f -= self.learning_rate * tree.evaluate_binned(self.table.row(p));
        }
    }

    pub fn risk(&self) -> f64 {
        self.table.risk(&self.log_hazard)
    }
}
