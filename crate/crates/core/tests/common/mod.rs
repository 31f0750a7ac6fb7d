//! Random small datasets and brute-force oracles shared by the integration
//! tests. Nothing here goes through the exposure table or the histograms.

#![allow(dead_code)]

use hazardboost::{BoostedHazardModel, Column, Dataset, Epoch, FunctionalSample, HazardFamily, Schema};
use rand::rngs::StdRng;
use rand::Rng;
use statrs::distribution::{ContinuousCDF, Normal};

/// Up to `max_n` subjects with 1 to 4 epochs each and `p` covariates drawn
/// from a coarse lattice so ties are common. Column `p - 1` is categorical
/// with three labels when `categorical` is set. At least one event.
pub fn random_dataset(rng: &mut StdRng, max_n: usize, p: usize, categorical: bool) -> Dataset {
    let n = rng.gen_range(2..=max_n);
    let mut columns: Vec<Column> = (0..p).map(|j| Column::continuous(format!("x{}", j + 1))).collect();
    if categorical {
        columns[p - 1] = Column::categorical(format!("x{p}"), vec!["a".into(), "b".into(), "c".into()]);
    }
    let samples: Vec<FunctionalSample> = (0..n)
        .map(|i| {
            let k = rng.gen_range(1..=4);
            let mut bounds: Vec<f64> = (0..k).map(|_| rng.gen_range(1..=40) as f64 / 10.0).collect();
            bounds.sort_by(f64::total_cmp);
            bounds.dedup();
            let mut start = 0.0;
            let epochs = bounds
                .iter()
                .map(|&end| {
                    let values = (0..p)
                        .map(|j| {
                            if categorical && j == p - 1 {
                                rng.gen_range(0..3) as f64
                            } else {
                                rng.gen_range(0..8) as f64 / 4.0
                            }
                        })
                        .collect();
                    let e = Epoch::new(start, end, values);
                    start = end;
                    e
                })
                .collect();
            let followup = *bounds.last().unwrap();
            FunctionalSample::new(format!("s{i}"), epochs, followup, rng.gen_bool(0.6))
        })
        .collect();
    let mut ds = Dataset::new(Schema::new(columns), samples);
    if ds.event_count() == 0 {
        ds.samples[0].event = true;
    }
    ds
}

/// Risk by brute force: every trajectory is cut at its own epoch bounds and
/// at every time threshold any tree uses, and `exp F` is evaluated at the
/// midpoint of each sub-interval.
pub fn oracle_risk(model: &BoostedHazardModel, dataset: &Dataset) -> f64 {
    let mut thresholds: Vec<f64> = model.trees.iter().flat_map(|t| t.time_thresholds()).collect();
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup();
    let mut total = 0.0;
    for s in &dataset.samples {
        for e in &s.epochs {
            let mut points = vec![e.start, e.end];
            points.extend(thresholds.iter().copied().filter(|&c| c > e.start && c < e.end));
            points.sort_by(f64::total_cmp);
            for w in points.windows(2) {
                let mid = 0.5 * (w[0] + w[1]);
                total += model.log_hazard_at(mid, &e.values).exp() * (w[1] - w[0]);
            }
        }
        if s.event {
            total -= model.log_hazard_at(s.followup, &s.epochs.last().unwrap().values);
        }
    }
    total / dataset.n() as f64
}

/// `AUC_t` by enumerating every comparable pair, with the library's
/// relative tie rule.
pub fn naive_auc(cases: &[f64], controls: &[f64]) -> Option<f64> {
    if cases.is_empty() || controls.is_empty() {
        return None;
    }
    let mut score = 0.0;
    for &c in cases {
        let tol = hazardboost::metrics::TIE_TOLERANCE * c.abs();
        for &d in controls {
            if d < c - tol {
                score += 1.0;
            } else if d <= c + tol {
                score += 0.5;
            }
        }
    }
    Some(score / (cases.len() * controls.len()) as f64)
}

/// Closed-form `integral_a^b lambda(s, x) ds` for each benchmark hazard.
pub fn closed_form_integral(family: &HazardFamily, x: f64, a: f64, b: f64) -> f64 {
    match *family {
        HazardFamily::Beta2 => {
            let cdf = |t: f64| 3.0 * t * t - 2.0 * t * t * t;
            6.0 * x * (1.0 - x) * (cdf(b) - cdf(a))
        }
        HazardFamily::Beta4 => {
            let cdf = |t: f64| 140.0 * (t.powi(4) / 4.0 - 3.0 * t.powi(5) / 5.0 + t.powi(6) / 2.0 - t.powi(7) / 7.0);
            140.0 * (x * (1.0 - x)).powi(3) * (cdf(b) - cdf(a))
        }
        HazardFamily::LogNormal => {
            let z = Normal::new(0.0, 1.0).unwrap();
            let log_surv = |t: f64| if t <= 0.0 { 0.0 } else { z.cdf(x - t.ln()).ln() };
            log_surv(a) - log_surv(b)
        }
        HazardFamily::Cosine => {
            (-0.5 * (2.0 * std::f64::consts::PI * x).cos() - 1.5).exp() * (b.powf(1.5) - a.powf(1.5))
        }
        HazardFamily::Constant { rate, .. } => rate * (b - a),
    }
}

pub fn closed_form_cumulative(family: &HazardFamily, epochs: &[Epoch], t: f64) -> f64 {
    epochs
        .iter()
        .filter(|e| e.start < t)
        .map(|e| closed_form_integral(family, e.values[0], e.start, e.end.min(t)))
        .sum()
}

/// One-sample Kolmogorov-Smirnov distance to `U(0, 1)`.
pub fn ks_uniform(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len() as f64;
    values
        .iter()
        .enumerate()
        .map(|(i, &v)| ((i + 1) as f64 / n - v).max(v - i as f64 / n))
        .fold(0.0, f64::max)
}

/// Asymptotic 1% critical value of the KS distance.
pub fn ks_critical_1pct(n: usize) -> f64 {
    1.6276 / (n as f64).sqrt()
}
