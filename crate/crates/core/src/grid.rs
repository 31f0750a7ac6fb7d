//! Global candidate split thresholds for the time axis and every covariate.

use std::fmt::Write as _;

use crate::data::{ColumnKind, Dataset};
use crate::numeric::{fnv1a64, weighted_lower_quantiles};

pub const DEFAULT_QUANTILES: usize = 10;

/// How covariate readings are weighted when taking quantiles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum QuantileWeighting {
    /// Each epoch's reading weighted by the epoch's length.
    #[default]
    Duration,
    /// Each epoch's reading counted once.
    Count,
}

#[derive(Debug, Clone, PartialEq)]
pub enum AxisCuts {
    /// Sorted, strictly increasing thresholds; a split at `c` sends
    /// `x <= c` left.
    Continuous(Vec<f64>),
    /// Number of labels in the column's dictionary.
    Categorical(usize),
}

impl AxisCuts {
    pub fn bin_count(&self) -> usize {
        match self {
            AxisCuts::Continuous(cuts) => cuts.len() + 1,
            AxisCuts::Categorical(labels) => *labels,
        }
    }
}

/// Candidate thresholds, computed once per training set.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitCandidateGrid {
    pub time_cuts: Vec<f64>,
    pub covariates: Vec<AxisCuts>,
}

impl SplitCandidateGrid {
    pub fn p(&self) -> usize {
        self.covariates.len()
    }

    /// Number of split axes: time plus every covariate.
    pub fn axis_count(&self) -> usize {
        1 + self.covariates.len()
    }

    /// Index of the time interval `(cut[b-1], cut[b]]` containing `t`.
    #[inline]
    pub fn time_bin(&self, t: f64) -> usize {
        self.time_cuts.partition_point(|&c| c < t)
    }

    #[inline]
    pub fn covariate_bin(&self, j: usize, value: f64) -> usize {
        match &self.covariates[j] {
            AxisCuts::Continuous(cuts) => cuts.partition_point(|&c| c < value),
            AxisCuts::Categorical(_) => value as usize,
        }
    }

    /// Bins per axis, time first.
    pub fn bin_counts(&self) -> Vec<usize> {
        std::iter::once(self.time_cuts.len() + 1)
            .chain(self.covariates.iter().map(AxisCuts::bin_count))
            .collect()
    }

    /// Threshold of cut `k` on a continuous or time axis.
    pub fn threshold(&self, axis: usize, k: usize) -> f64 {
        if axis == 0 {
            self.time_cuts[k]
        } else {
            match &self.covariates[axis - 1] {
                AxisCuts::Continuous(cuts) => cuts[k],
                AxisCuts::Categorical(_) => k as f64,
            }
        }
    }

    /// Position of `threshold` among the cuts of a continuous or time axis.
    pub fn cut_index(&self, axis: usize, threshold: f64) -> Option<usize> {
        let cuts = if axis == 0 {
            &self.time_cuts
        } else {
            match &self.covariates[axis - 1] {
                AxisCuts::Continuous(cuts) => cuts,
                AxisCuts::Categorical(_) => return None,
            }
        };
        cuts.iter().position(|&c| c == threshold)
    }

    pub fn fingerprint(&self) -> u64 {
        let mut bytes = Vec::new();
        for c in &self.time_cuts {
            bytes.extend_from_slice(&c.to_bits().to_le_bytes());
        }
        for axis in &self.covariates {
            bytes.push(0xff);
            match axis {
                AxisCuts::Continuous(cuts) => {
                    for c in cuts {
                        bytes.extend_from_slice(&c.to_bits().to_le_bytes());
                    }
                }
                AxisCuts::Categorical(n) => {
                    bytes.push(0xfe);
                    bytes.extend_from_slice(&(*n as u64).to_le_bytes());
                }
            }
        }
        fnv1a64(bytes)
    }

    /// Human-readable dump, one axis per line.
    pub fn dump(&self, names: &[String]) -> String {
        let mut out = String::new();
        let join = |cuts: &[f64]| cuts.iter().map(|c| format!("{c}")).collect::<Vec<_>>().join(",");
        let _ = writeln!(out, "time: {}", join(&self.time_cuts));
        for (j, axis) in self.covariates.iter().enumerate() {
            let name = names.get(j).map_or_else(|| format!("x{}", j + 1), Clone::clone);
            match axis {
                AxisCuts::Continuous(cuts) => {
                    let _ = writeln!(out, "{name}: {}", join(cuts));
                }
                AxisCuts::Categorical(n) => {
                    let _ = writeln!(out, "{name}: categorical ({n} labels)");
                }
            }
        }
        out
    }
}

/// Builds candidate cuts at the `k / num_quantiles` quantiles of each axis.
///
/// Covariate quantiles pool every epoch reading (weighted per `weighting`);
/// time quantiles pool all epoch end points, which include the follow-up
/// times. Repeated quantiles collapse and a cut equal to the axis maximum is
/// dropped, so both sides of every cut hold observed data.
pub fn build_grid(dataset: &Dataset, num_quantiles: usize, weighting: QuantileWeighting) -> SplitCandidateGrid {
    let boundaries: Vec<(f64, f64)> = dataset
        .samples
        .iter()
        .flat_map(|s| s.epochs.iter().map(|e| (e.end, 1.0)))
        .collect();
    let time_cuts = clean_cuts(weighted_lower_quantiles(&boundaries, num_quantiles), &boundaries);

    let covariates = dataset
        .schema
        .columns
        .iter()
        .enumerate()
        .map(|(j, column)| match &column.kind {
            ColumnKind::Categorical(labels) => AxisCuts::Categorical(labels.len()),
            ColumnKind::Continuous => {
                let values: Vec<(f64, f64)> = dataset
                    .samples
                    .iter()
                    .flat_map(|s| s.epochs.iter())
                    .map(|e| {
                        let w = match weighting {
                            QuantileWeighting::Duration => e.duration(),
                            QuantileWeighting::Count => 1.0,
                        };
                        (e.values[j], w)
                    })
                    .collect();
                AxisCuts::Continuous(clean_cuts(weighted_lower_quantiles(&values, num_quantiles), &values))
            }
        })
        .collect();
    SplitCandidateGrid { time_cuts, covariates }
}

fn clean_cuts(mut cuts: Vec<f64>, values: &[(f64, f64)]) -> Vec<f64> {
    let max = values
        .iter()
        .filter(|v| v.1 > 0.0)
        .map(|v| v.0)
        .fold(f64::NEG_INFINITY, f64::max);
    cuts.dedup();
    cuts.retain(|&c| c < max);
    cuts
}
