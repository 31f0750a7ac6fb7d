//! Test-set metrics: L2 distance to a known hazard and time-dependent AUC.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::boosting::BoostedHazardModel;
use crate::data::{Dataset, FunctionalSample};
use crate::error::{Error, Result};
use crate::numeric::{lower_quantile, stable_sum};
use crate::simulation::HazardFamily;

pub const DEFAULT_AUC_GRID: usize = 20;

/// Relative gap below which two cumulative hazards compare as tied in AUC.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// `sqrt(mean((a - b)^2))`.
pub fn l2_error(predictions: &[f64], truths: &[f64]) -> Result<f64> {
    if predictions.len() != truths.len() {
        return Err(Error::LengthMismatch {
            left: predictions.len(),
            right: truths.len(),
        });
    }
    if predictions.is_empty() {
        return Err(Error::NoSamples);
    }
    let sq = stable_sum(predictions.iter().zip(truths).map(|(a, b)| (a - b) * (a - b)));
    Ok((sq / predictions.len() as f64).sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationPoint {
    pub subject: usize,
    pub t: f64,
    pub x: Vec<f64>,
    pub true_hazard: f64,
}

/// Draws `per_subject` times uniformly on `(0, T_i]` for every subject and
/// attaches the covariates in force and the true hazard there. The relevant
/// covariate is column 0.
pub fn sample_evaluation_points(
    dataset: &Dataset,
    family: &HazardFamily,
    per_subject: usize,
    seed: u64,
) -> Vec<EvaluationPoint> {
    let mut points = Vec::with_capacity(dataset.n() * per_subject);
    for (i, sample) in dataset.samples.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        for _ in 0..per_subject {
            let t = (1.0 - rng.gen::<f64>()) * sample.followup;
            let x = sample.covariates_at(t).to_vec();
            let true_hazard = family.rate(t, x[0]);
            points.push(EvaluationPoint {
                subject: i,
                t,
                x,
                true_hazard,
            });
        }
    }
    points
}

/// L2 error of a model's hazard on evaluation points.
pub fn model_l2_error(model: &BoostedHazardModel, points: &[EvaluationPoint]) -> Result<f64> {
    let predicted: Vec<f64> = points
        .par_iter()
        .map(|p| model.predict_hazard(p.t, &p.x))
        .collect::<Result<_>>()?;
    let truth: Vec<f64> = points.iter().map(|p| p.true_hazard).collect();
    l2_error(&predicted, &truth)
}

/// Anything that assigns a cumulative hazard `Lambda_i(t)` to a trajectory.
/// `S_i(t) = exp(-Lambda_i(t))`, so ranking by `Lambda` is ranking by `S`.
pub trait CumulativeHazard: Sync {
    fn cumulative_hazard(&self, sample: &FunctionalSample, t: f64) -> Result<f64>;
}

impl CumulativeHazard for BoostedHazardModel {
    fn cumulative_hazard(&self, sample: &FunctionalSample, t: f64) -> Result<f64> {
        BoostedHazardModel::cumulative_hazard(self, sample, t)
    }
}

/// The true hazard, relevant covariate in column 0.
impl CumulativeHazard for HazardFamily {
    fn cumulative_hazard(&self, sample: &FunctionalSample, t: f64) -> Result<f64> {
        Ok(HazardFamily::cumulative_hazard(self, &sample.epochs, 0, t))
    }
}

/// `c * Lambda` for a positive constant `c`.
pub struct ScaledHazard<'a, H: ?Sized> {
    pub inner: &'a H,
    pub factor: f64,
}

impl<H: CumulativeHazard + ?Sized> CumulativeHazard for ScaledHazard<'_, H> {
    fn cumulative_hazard(&self, sample: &FunctionalSample, t: f64) -> Result<f64> {
        Ok(self.factor * self.inner.cumulative_hazard(sample, t)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AucEstimate {
    pub t: f64,
    pub auc: f64,
    pub pairs: u64,
}

/// Unweighted empirical `AUC_t`: over pairs with `i` an observed event
/// before `t` and `j` still followed after `t`, the share with
/// `S_i(t) < S_j(t)`, ties counting one half. Cumulative hazards within a
/// relative [`TIE_TOLERANCE`] of each other are ties, so rounding noise
/// between equal hazards cannot order a pair. Cases' trajectories are
/// carried forward past their event.
pub fn auc_t<H: CumulativeHazard + ?Sized>(hazard: &H, dataset: &Dataset, t: f64) -> Result<AucEstimate> {
    let score = |s: &FunctionalSample| -> Result<f64> {
        if s.covered_until() < t {
            hazard.cumulative_hazard(&s.extended_to(t), t)
        } else {
            hazard.cumulative_hazard(s, t)
        }
    };
    let cases: Vec<f64> = dataset
        .samples
        .par_iter()
        .filter(|s| s.event && s.followup < t)
        .map(score)
        .collect::<Result<_>>()?;
    let mut controls: Vec<f64> = dataset
        .samples
        .par_iter()
        .filter(|s| s.followup > t)
        .map(score)
        .collect::<Result<_>>()?;
    let pairs = cases.len() as u64 * controls.len() as u64;
    if pairs == 0 {
        return Err(Error::AucUndefined { t });
    }
    controls.sort_by(f64::total_cmp);
    // twice the concordance count keeps ties exact
    let mut doubled = 0u64;
    for &c in &cases {
        let tol = TIE_TOLERANCE * c.abs();
        let below = controls.partition_point(|&v| v < c - tol) as u64;
        let tied = controls.partition_point(|&v| v <= c + tol) as u64 - below;
        doubled += 2 * below + tied;
    }
    Ok(AucEstimate {
        t,
        auc: doubled as f64 / (2 * pairs) as f64,
        pairs,
    })
}

/// `points` lower quantiles of observed event times at levels
/// `k / (points + 1)`. Every grid time has a case at or before it and lies
/// below the last event, so censoring at a common horizon leaves no point
/// without controls.
pub fn auc_time_grid(dataset: &Dataset, points: usize) -> Vec<f64> {
    let times: Vec<f64> = dataset.samples.iter().filter(|s| s.event).map(|s| s.followup).collect();
    (1..=points)
        .filter_map(|k| lower_quantile(&times, k as f64 / (points + 1) as f64))
        .collect()
}

/// `AUC_t` on each grid time; times without comparable pairs are skipped.
pub fn auc_curve<H: CumulativeHazard + ?Sized>(hazard: &H, dataset: &Dataset, times: &[f64]) -> Result<Vec<AucEstimate>> {
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        match auc_t(hazard, dataset, t) {
            Ok(est) => out.push(est),
            Err(Error::AucUndefined { t }) => log::warn!("AUC undefined at t = {t}; skipped"),
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}
