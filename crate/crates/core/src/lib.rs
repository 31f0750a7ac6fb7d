//! Gradient-boosted nonparametric hazard estimation for time-to-event data
//! with time-dependent covariates.
//!
//! The log-hazard `F(t, x)` is fitted by boosting regression trees on the
//! likelihood risk
//!
//! ```text
//! R(F) = (1/n) sum_i [ integral_0^T_i exp F(t, X_i(t)) dt - Delta_i F(T_i, X_i(T_i)) ]
//! ```
//!
//! over subjects observed on `(0, T_i]` with event indicator `Delta_i` and
//! piecewise-constant covariate paths `X_i`.
//!
//! ```no_run
//! use hazardboost::{build_grid, fit, simulate, FitConfig, HazardFamily, QuantileWeighting, SimulationSpec};
//!
//! let train = simulate(&SimulationSpec::new(HazardFamily::Beta2, 1000, 1)).dataset;
//! let grid = build_grid(&train, 10, QuantileWeighting::Duration);
//! let model = fit(&train, &grid, FitConfig::new(200, 2)).unwrap();
//! println!("{}", model.predict_hazard(0.5, &[0.5]).unwrap());
//! ```

pub mod boosting;
pub mod data;
pub mod error;
pub mod exposure;
pub mod grid;
pub mod metrics;
pub mod model_io;
pub mod numeric;
pub mod selection;
pub mod simulation;
pub mod tree;

pub use boosting::{fit, init_f0, model_risk, BoostedHazardModel, Booster, FitConfig, HeldOutTracker};
pub use data::{
    impute_terminal_jump, load_dataset, read_dataset, write_dataset, write_dataset_file, Column, ColumnKind, Dataset,
    Epoch, FunctionalSample, Schema, SchemaSpec, ValidationReport,
};
pub use error::{Error, Result};
pub use grid::{build_grid, AxisCuts, QuantileWeighting, SplitCandidateGrid};
pub use metrics::{
    auc_curve, auc_t, auc_time_grid, l2_error, model_l2_error, sample_evaluation_points, AucEstimate,
    CumulativeHazard, EvaluationPoint,
};
pub use model_io::{model_from_text, model_to_text, read_model, write_model};
pub use selection::{
    bootstrap_importance, kfold_cv, variable_importance, BootstrapConfig, CvConfig, CvReport, ImportanceReport,
};
pub use simulation::{simulate, Censoring, HazardFamily, SimulatedData, SimulationSpec};
pub use tree::{grow_tree, Axis, LogHazard, RegressionTree, SearchScope, TimeCovariateCube};
