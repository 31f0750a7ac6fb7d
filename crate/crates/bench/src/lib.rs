//! Shared fixtures for the benchmarks.

use hazardboost::{build_grid, simulate, Dataset, HazardFamily, QuantileWeighting, SimulationSpec, SplitCandidateGrid};

/// A simulated `lambda1` training set with `irrelevant` noise covariates and
/// its default decile grid.
pub fn fixture(n: usize, irrelevant: usize) -> (Dataset, SplitCandidateGrid) {
    let data = simulate(&SimulationSpec::new(HazardFamily::Beta2, n, 11).with_irrelevant(irrelevant)).dataset;
    let grid = build_grid(&data, 10, QuantileWeighting::Duration);
    (data, grid)
}
