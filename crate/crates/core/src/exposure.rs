//! Trajectories pre-cut into pieces on which any fitted log-hazard is constant.
//!
//! Every epoch is cut at the grid's time thresholds. A tree only splits time
//! at those thresholds and covariates are constant within an epoch, so the
//! ensemble is constant on each piece and every exposure integral becomes an
//! exact finite sum. Each piece carries its bin index on every axis.

use crate::data::Dataset;
use crate::grid::SplitCandidateGrid;
use crate::numeric::CompensatedSum;

#[derive(Debug, Clone)]
pub struct ExposureTable {
    n_subjects: usize,
    axes: usize,
    /// Row-major `pieces x axes` bin indices; axis 0 is time.
    bins: Vec<u16>,
    duration: Vec<f64>,
    /// Right end of each piece, `(start, end]`.
    end: Vec<f64>,
    /// True on the final piece of a subject whose event was observed.
    event: Vec<bool>,
    /// (subject, epoch) each piece was cut from.
    origin: Vec<(u32, u32)>,
}

impl ExposureTable {
    pub fn new(dataset: &Dataset, grid: &SplitCandidateGrid) -> Self {
        let axes = grid.axis_count();
        assert!(
            grid.bin_counts().iter().all(|&b| b <= u16::MAX as usize + 1),
            "too many bins for a u16 index"
        );
        let mut table = ExposureTable {
            n_subjects: dataset.n(),
            axes,
            bins: Vec::new(),
            duration: Vec::new(),
            end: Vec::new(),
            event: Vec::new(),
            origin: Vec::new(),
        };
        let mut covariate_bins = vec![0u16; axes - 1];
        for (i, sample) in dataset.samples.iter().enumerate() {
            let last_epoch = sample.epochs.len() - 1;
            for (k, epoch) in sample.epochs.iter().enumerate() {
                for (j, &v) in epoch.values.iter().enumerate() {
                    covariate_bins[j] = grid.covariate_bin(j, v) as u16;
                }
                let first_cut = grid.time_cuts.partition_point(|&c| c <= epoch.start);
                let mut start = epoch.start;
                let inner = grid.time_cuts[first_cut..]
                    .iter()
                    .copied()
                    .take_while(|&c| c < epoch.end);
                for stop in inner.chain(std::iter::once(epoch.end)) {
                    if stop <= start {
                        continue;
                    }
                    table.bins.push(grid.time_bin(stop) as u16);
                    table.bins.extend_from_slice(&covariate_bins);
                    table.duration.push(stop - start);
                    table.end.push(stop);
                    table.event.push(false);
                    table.origin.push((i as u32, k as u32));
                    start = stop;
                }
                if k == last_epoch && sample.event {
                    if let Some(flag) = table.event.last_mut() {
                        *flag = true;
                    }
                }
            }
        }
        table
    }

    pub fn len(&self) -> usize {
        self.duration.len()
    }

    pub fn is_empty(&self) -> bool {
        self.duration.is_empty()
    }

    pub fn n_subjects(&self) -> usize {
        self.n_subjects
    }

    pub fn axes(&self) -> usize {
        self.axes
    }

    #[inline]
    pub fn row(&self, piece: usize) -> &[u16] {
        &self.bins[piece * self.axes..(piece + 1) * self.axes]
    }

    #[inline]
    pub fn bin(&self, piece: usize, axis: usize) -> usize {
        self.bins[piece * self.axes + axis] as usize
    }

    pub fn durations(&self) -> &[f64] {
        &self.duration
    }

    pub fn ends(&self) -> &[f64] {
        &self.end
    }

    pub fn events(&self) -> &[bool] {
        &self.event
    }

    pub fn origin(&self, piece: usize) -> (usize, usize) {
        let (i, k) = self.origin[piece];
        (i as usize, k as usize)
    }

    /// Likelihood risk of a log-hazard given by its value on every piece.
    pub fn risk(&self, log_hazard: &[f64]) -> f64 {
        debug_assert_eq!(log_hazard.len(), self.len());
        let mut exposure = CompensatedSum::new();
        let mut events = CompensatedSum::new();
        for ((&f, &dt), &ev) in log_hazard.iter().zip(&self.duration).zip(&self.event) {
            exposure.add(f.exp() * dt);
            if ev {
                events.add(f);
            }
        }
        (exposure.value() - events.value()) / self.n_subjects as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Epoch, FunctionalSample, Schema};
    use crate::grid::AxisCuts;

    #[test]
    fn pieces_cover_trajectory_and_mark_event() {
        let ds = Dataset::new(
            Schema::continuous(1),
            vec![
                FunctionalSample::new(
                    "a",
                    vec![Epoch::new(0.0, 1.0, vec![0.2]), Epoch::new(1.0, 2.5, vec![0.9])],
                    2.5,
                    true,
                ),
                FunctionalSample::new("b", vec![Epoch::new(0.0, 0.5, vec![0.7])], 0.5, false),
            ],
        );
        let grid = SplitCandidateGrid {
            time_cuts: vec![0.5, 1.0, 2.0],
            covariates: vec![AxisCuts::Continuous(vec![0.5])],
        };
        let table = ExposureTable::new(&ds, &grid);
        assert_eq!(table.durations(), &[0.5, 0.5, 1.0, 0.5, 0.5]);
        assert_eq!(table.ends(), &[0.5, 1.0, 2.0, 2.5, 0.5]);
        assert_eq!(table.events(), &[false, false, false, true, false]);
        assert_eq!(table.row(0), &[0, 0]);
        assert_eq!(table.row(1), &[1, 0]);
        assert_eq!(table.row(2), &[2, 1]);
        assert_eq!(table.row(3), &[3, 1]);
        assert_eq!(table.row(4), &[0, 1]);
        // F = 0: total exposure 3.0 over two subjects
        assert!((table.risk(&[0.0; 5]) - 1.5).abs() < 1e-15);
    }
}
