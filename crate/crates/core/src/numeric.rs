//! Small numerical building blocks shared across modules.

use std::ops::AddAssign;

/// Neumaier compensated accumulator.
///
/// Exposure integrals sum many small exponentiated terms, so every
/// U statistic and every risk evaluation goes through this type.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub const fn new() -> Self {
        Self {
            sum: 0.0,
            compensation: 0.0,
        }
    }

    #[inline]
    pub fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.compensation += (self.sum - t) + value;
        } else {
            self.compensation += (value - t) + self.sum;
        }
        self.sum = t;
    }

    /// Folds another accumulator into this one, keeping both error terms.
    #[inline]
    pub fn merge(&mut self, other: &CompensatedSum) {
        self.add(other.sum);
        self.add(other.compensation);
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl AddAssign<f64> for CompensatedSum {
    #[inline]
    fn add_assign(&mut self, rhs: f64) {
        self.add(rhs);
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = CompensatedSum::new();
        for v in iter {
            acc.add(v);
        }
        acc
    }
}

/// Compensated sum of an iterator of floats.
pub fn stable_sum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    iter.into_iter().collect::<CompensatedSum>().value()
}

/// Lowest-value weighted quantiles.
///
/// For each `k` in `1..parts` returns the smallest value `v` whose weighted
/// empirical CDF reaches `k / parts`. The comparison is done as
/// `cum * parts >= k * total` so integer-weighted inputs hit exact
/// breakpoints. `values` need not be sorted. Duplicates in the output are
/// kept; callers collapse them.
pub fn weighted_lower_quantiles(values: &[(f64, f64)], parts: usize) -> Vec<f64> {
    if values.is_empty() || parts < 2 {
        return Vec::new();
    }
    let mut sorted: Vec<(f64, f64)> = values
        .iter()
        .copied()
        .filter(|&(v, w)| v.is_finite() && w > 0.0)
        .collect();
    if sorted.is_empty() {
        return Vec::new();
    }
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));

    // Aggregate weight per distinct value.
    let mut distinct: Vec<(f64, f64)> = Vec::with_capacity(sorted.len());
    let mut acc = CompensatedSum::new();
    let mut current = sorted[0].0;
    for &(v, w) in &sorted {
        if v != current {
            distinct.push((current, acc.value()));
            acc = CompensatedSum::new();
            current = v;
        }
        acc.add(w);
    }
    distinct.push((current, acc.value()));

    let total = stable_sum(distinct.iter().map(|d| d.1));
    let q = parts as f64;
    let mut out = Vec::with_capacity(parts - 1);
    let mut cum = CompensatedSum::new();
    let mut idx = 0;
    cum.add(distinct[0].1);
    for k in 1..parts {
        let target = k as f64 * total;
        while cum.value() * q < target && idx + 1 < distinct.len() {
            idx += 1;
            cum.add(distinct[idx].1);
        }
        out.push(distinct[idx].0);
    }
    out
}

/// Lowest-value quantile of an unweighted sample at probability `p`.
pub fn lower_quantile(values: &[f64], p: f64) -> Option<f64> {
    let mut sorted: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    if sorted.is_empty() {
        return None;
    }
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let rank = (p * n as f64).ceil() as usize;
    Some(sorted[rank.clamp(1, n) - 1])
}

/// Percentile by linear interpolation between order statistics.
pub fn interpolated_percentile(sorted: &[f64], p: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    if sorted.len() == 1 {
        return sorted[0];
    }
    let pos = p.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// 64-bit FNV-1a, used to fingerprint split grids stored with models.
pub fn fnv1a64(bytes: impl IntoIterator<Item = u8>) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Adaptive Simpson quadrature to absolute tolerance `tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, 50)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut acc = CompensatedSum::new();
        acc.add(1.0);
        for _ in 0..1_000_000 {
            acc.add(1e-16);
        }
        assert!((acc.value() - (1.0 + 1e-10)).abs() < 1e-20);
    }

    #[test]
    fn deciles_of_one_to_hundred() {
        let values: Vec<(f64, f64)> = (1..=100).map(|v| (v as f64, 1.0)).collect();
        let cuts = weighted_lower_quantiles(&values, 10);
        let expected: Vec<f64> = (1..10).map(|k| (k * 10) as f64).collect();
        assert_eq!(cuts, expected);
    }

    #[test]
    fn simpson_matches_polynomial() {
        let v = adaptive_simpson(&|x: f64| x * x * x, 0.0, 2.0, 1e-12);
        assert!((v - 4.0).abs() < 1e-12);
        let s = adaptive_simpson(&|x: f64| x.sqrt(), 0.0, 1.0, 1e-10);
        assert!((s - 2.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn lower_quantile_picks_observed_value() {
        assert_eq!(lower_quantile(&[3.0, 1.0, 2.0, 4.0], 0.5), Some(2.0));
        assert_eq!(lower_quantile(&[], 0.5), None);
    }
}
