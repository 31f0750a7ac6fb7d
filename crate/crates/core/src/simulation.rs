//! Synthetic benchmark data: piecewise-constant covariate paths, event times
//! drawn by inverting the cumulative hazard, irrelevant noise covariates and
//! administrative censoring at the family's horizon.

use std::f64::consts::{PI, SQRT_2};
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use statrs::function::erf::erfc;

use crate::data::{Column, Dataset, Epoch, FunctionalSample, Schema};
use crate::error::{Error, Result};
use crate::numeric::adaptive_simpson;

pub const DEFAULT_EPOCH_RATE: f64 = 10.0;
const QUADRATURE_TOL: f64 = 1e-10;
const INVERSION_TOL: f64 = 1e-10;

/// Known hazards `lambda(t, x)` with `x` the relevant covariate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HazardFamily {
    /// `Beta(t; 2, 2) * Beta(x; 2, 2)` on `(0, 1]`.
    Beta2,
    /// `Beta(t; 4, 4) * Beta(x; 4, 4)` on `(0, 1]`.
    Beta4,
    /// Log-normal hazard with log-scale mean `x`, unit variance, on `(0, 5]`.
    LogNormal,
    /// `1.5 sqrt(t) exp(-cos(2 pi x) / 2 - 3 / 2)` on `(0, 5]`.
    Cosine,
    Constant { rate: f64, horizon: f64 },
}

fn std_normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / SQRT_2)
}

impl HazardFamily {
    pub fn horizon(&self) -> f64 {
        match self {
            HazardFamily::Beta2 | HazardFamily::Beta4 => 1.0,
            HazardFamily::LogNormal | HazardFamily::Cosine => 5.0,
            HazardFamily::Constant { horizon, .. } => *horizon,
        }
    }

    /// Pointwise hazard without the support check; continuous extension at
    /// `t = 0`.
    #[inline]
    pub fn rate(&self, t: f64, x: f64) -> f64 {
        match *self {
            HazardFamily::Beta2 => {
                let b = |u: f64| 6.0 * u * (1.0 - u);
                b(t) * b(x)
            }
            HazardFamily::Beta4 => {
                let b = |u: f64| 140.0 * (u * (1.0 - u)).powi(3);
                b(t) * b(x)
            }
            HazardFamily::LogNormal => {
                if t <= 0.0 {
                    return 0.0;
                }
                let z = t.ln() - x;
                std_normal_pdf(z) / (t * std_normal_cdf(-z))
            }
            HazardFamily::Cosine => {
                1.5 * t.max(0.0).sqrt() * (-0.5 * (2.0 * PI * x).cos() - 1.5).exp()
            }
            HazardFamily::Constant { rate, .. } => rate,
        }
    }

    pub fn hazard_value(&self, t: f64, x: f64) -> Result<f64> {
        let horizon = self.horizon();
        if !(t > 0.0 && t <= horizon) {
            return Err(Error::OutOfSupport { t, horizon });
        }
        Ok(self.rate(t, x))
    }

    /// `integral_a^b lambda(s, x) ds` by adaptive Simpson.
    pub fn integrate(&self, x: f64, a: f64, b: f64) -> f64 {
        adaptive_simpson(&|s: f64| self.rate(s, x), a, b, QUADRATURE_TOL)
    }

    /// Cumulative hazard along a trajectory whose relevant covariate is
    /// column `column`, up to `t` (readings carried forward past the end).
    pub fn cumulative_hazard(&self, epochs: &[Epoch], column: usize, t: f64) -> f64 {
        let mut total = 0.0;
        let last = epochs.len().saturating_sub(1);
        for (k, epoch) in epochs.iter().enumerate() {
            if epoch.start >= t {
                break;
            }
            let end = if k == last { t } else { epoch.end.min(t) };
            total += self.integrate(epoch.values[column], epoch.start, end);
        }
        total
    }
}

impl fmt::Display for HazardFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HazardFamily::Beta2 => write!(f, "lambda1"),
            HazardFamily::Beta4 => write!(f, "lambda2"),
            HazardFamily::LogNormal => write!(f, "lambda3"),
            HazardFamily::Cosine => write!(f, "lambda4"),
            HazardFamily::Constant { rate, horizon } => write!(f, "constant:{rate}:{horizon}"),
        }
    }
}

impl FromStr for HazardFamily {
    type Err = Error;

    /// `lambda1`..`lambda4`, or `constant:<rate>[:<horizon>]` (horizon 1 by
    /// default).
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lambda1" => Ok(HazardFamily::Beta2),
            "lambda2" => Ok(HazardFamily::Beta4),
            "lambda3" => Ok(HazardFamily::LogNormal),
            "lambda4" => Ok(HazardFamily::Cosine),
            other => {
                let bad = || Error::InvalidParameter(format!("unknown hazard family `{other}`"));
                let rest = other.strip_prefix("constant:").ok_or_else(bad)?;
                let mut parts = rest.split(':');
                let rate: f64 = parts.next().and_then(|r| r.parse().ok()).ok_or_else(bad)?;
                let horizon: f64 = match parts.next() {
                    Some(h) => h.parse().map_err(|_| bad())?,
                    None => 1.0,
                };
                if parts.next().is_some() || !(rate > 0.0) || !(horizon > 0.0) {
                    return Err(bad());
                }
                Ok(HazardFamily::Constant { rate, horizon })
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Censoring {
    /// Censor only at the horizon.
    #[default]
    Administrative,
    /// Additionally censor at an independent `U(0, horizon)` time.
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationSpec {
    pub family: HazardFamily,
    pub n: usize,
    pub irrelevant: usize,
    /// Mean covariate jumps per unit time.
    pub epoch_rate: f64,
    pub seed: u64,
    pub censoring: Censoring,
}

impl SimulationSpec {
    pub fn new(family: HazardFamily, n: usize, seed: u64) -> Self {
        Self {
            family,
            n,
            irrelevant: 0,
            epoch_rate: DEFAULT_EPOCH_RATE,
            seed,
            censoring: Censoring::Administrative,
        }
    }

    pub fn with_irrelevant(mut self, irrelevant: usize) -> Self {
        self.irrelevant = irrelevant;
        self
    }

    pub fn with_epoch_rate(mut self, rate: f64) -> Self {
        self.epoch_rate = rate;
        self
    }

    pub fn schema(&self) -> Schema {
        let mut columns = vec![Column::continuous("x")];
        columns.extend((1..=self.irrelevant).map(|k| Column::continuous(format!("noise{k}"))));
        Schema::new(columns)
    }

    /// Independent stream for subject `index`.
    pub fn subject_rng(&self, index: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index as u64);
        rng
    }

    pub fn to_text(&self) -> String {
        let censoring = match self.censoring {
            Censoring::Administrative => "administrative",
            Censoring::Uniform => "uniform",
        };
        format!(
            "family={}\nn={}\nirrelevant={}\nrate={}\nseed={}\ncensoring={censoring}\n",
            self.family, self.n, self.irrelevant, self.epoch_rate, self.seed
        )
    }

    /// Parses the truth-file format written by [`SimulationSpec::to_text`].
    pub fn from_text(text: &str) -> Result<Self> {
        let mut spec = SimulationSpec::new(HazardFamily::Beta2, 0, 0);
        let mut family = None;
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::InvalidParameter(format!("bad truth line `{line}`")))?;
            let bad = || Error::InvalidParameter(format!("bad value for `{k}`: `{v}`"));
            match k {
                "family" => family = Some(v.parse::<HazardFamily>()?),
                "n" => spec.n = v.parse().map_err(|_| bad())?,
                "irrelevant" => spec.irrelevant = v.parse().map_err(|_| bad())?,
                "rate" => spec.epoch_rate = v.parse().map_err(|_| bad())?,
                "seed" => spec.seed = v.parse().map_err(|_| bad())?,
                "censoring" => {
                    spec.censoring = match v {
                        "administrative" => Censoring::Administrative,
                        "uniform" => Censoring::Uniform,
                        _ => return Err(bad()),
                    }
                }
                _ => return Err(Error::InvalidParameter(format!("unknown truth key `{k}`"))),
            }
        }
        spec.family = family.ok_or_else(|| Error::InvalidParameter("truth file lacks `family`".into()))?;
        Ok(spec)
    }
}

/// Draws a covariate path on `(0, horizon]`: Poisson jump times, the
/// relevant covariate `U(0, 1]` and each irrelevant one `N(0, 1)` per epoch.
pub fn sample_trajectory<R: Rng>(spec: &SimulationSpec, rng: &mut R) -> Vec<Epoch> {
    let horizon = spec.family.horizon();
    let mut boundaries = vec![0.0];
    if spec.epoch_rate > 0.0 {
        let mut t = 0.0;
        loop {
            let gap = -(1.0 - rng.gen::<f64>()).ln() / spec.epoch_rate;
            t += gap;
            if t >= horizon {
                break;
            }
            if t > *boundaries.last().expect("nonempty") {
                boundaries.push(t);
            }
        }
    }
    boundaries.push(horizon);
    boundaries
        .windows(2)
        .map(|w| {
            let mut values = Vec::with_capacity(1 + spec.irrelevant);
            values.push(1.0 - rng.gen::<f64>());
            values.extend((0..spec.irrelevant).map(|_| rng.sample::<f64, _>(StandardNormal)));
            Epoch::new(w[0], w[1], values)
        })
        .collect()
}

/// Solves `Lambda(T) = -log u` along the trajectory (relevant covariate in
/// column 0). Returns `(horizon, false)` when the path's total hazard falls
/// short of the target.
pub fn sample_event_time<R: Rng>(epochs: &[Epoch], family: &HazardFamily, rng: &mut R) -> (f64, bool) {
    let u = 1.0 - rng.gen::<f64>();
    invert_cumulative_hazard(epochs, family, -u.ln())
}

/// Time at which the cumulative hazard reaches `target`.
pub fn invert_cumulative_hazard(epochs: &[Epoch], family: &HazardFamily, target: f64) -> (f64, bool) {
    let horizon = family.horizon();
    let mut cumulative = 0.0;
    for epoch in epochs {
        let x = epoch.values[0];
        let whole = family.integrate(x, epoch.start, epoch.end);
        if cumulative + whole >= target {
            return (solve_in_epoch(family, x, epoch.start, epoch.end, cumulative, target), true);
        }
        cumulative += whole;
    }
    (horizon, false)
}

/// Safeguarded Newton on `G(t) = base + integral_start^t lambda`, bracketed
/// in `[start, end]`.
fn solve_in_epoch(family: &HazardFamily, x: f64, start: f64, end: f64, base: f64, target: f64) -> f64 {
    let mut lo = start;
    let mut g_lo = base;
    let mut hi = end;
    let mut t = start;
    let mut g_t = base;
    for _ in 0..200 {
        let slope = family.rate(t, x);
        let mut next = if slope > 0.0 { t + (target - g_t) / slope } else { f64::NAN };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        let g_next = g_lo + family.integrate(x, lo, next);
        if (g_next - target).abs() <= 1e-13 * target.max(1.0) {
            return next;
        }
        if g_next < target {
            lo = next;
            g_lo = g_next;
        } else {
            hi = next;
        }
        t = next;
        g_t = g_next;
        if hi - lo <= INVERSION_TOL {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Simulated data plus the specification needed to recompute the truth.
#[derive(Debug, Clone)]
pub struct SimulatedData {
    pub dataset: Dataset,
    pub spec: SimulationSpec,
}

impl SimulatedData {
    /// True hazard at `(t, x)`; `x` is a full covariate vector.
    pub fn true_hazard(&self, t: f64, x: &[f64]) -> f64 {
        self.spec.family.rate(t, x[0])
    }
}

/// Simulates one subject; identical for a given `(spec, index)` regardless
/// of how subjects are scheduled.
pub fn simulate_subject(spec: &SimulationSpec, index: usize) -> FunctionalSample {
    let mut rng = spec.subject_rng(index);
    let trajectory = sample_trajectory(spec, &mut rng);
    let (mut time, mut event) = sample_event_time(&trajectory, &spec.family, &mut rng);
    if spec.censoring == Censoring::Uniform {
        let c = (1.0 - rng.gen::<f64>()) * spec.family.horizon();
        if c < time {
            time = c;
            event = false;
        }
    }
    let mut epochs: Vec<Epoch> = trajectory.into_iter().filter(|e| e.start < time).collect();
    if let Some(last) = epochs.last_mut() {
        last.end = time;
    }
    FunctionalSample::new(format!("{index}"), epochs, time, event)
}

pub fn simulate(spec: &SimulationSpec) -> SimulatedData {
    let samples: Vec<FunctionalSample> = (0..spec.n)
        .into_par_iter()
        .map(|i| simulate_subject(spec, i))
        .collect();
    SimulatedData {
        dataset: Dataset::new(spec.schema(), samples),
        spec: *spec,
    }
}
