//! Symmetric doubling grids and the heuristics that turn sampled values into
//! finiteness, limit and infimum verdicts.
//!
//! A grid is organised in shells: shell 0 is `|x| <= 1`, shell `k >= 1` is
//! `2^{k-1} < |x| <= 2^k` (the last shell is cut at `x_max`). All verdicts
//! look only at per-shell extrema, so the order of evaluation never matters.

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Finiteness {
    FiniteStable,
    GrowingUnbounded,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LimitVerdict {
    Zero,
    Infinity,
    NonzeroFinite,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum InfimumTrend {
    Stabilized,
    Vanishing,
    Inconclusive,
}

/// Relative change of the running sup over the last two doublings below
/// which a sup counts as settled.
pub const SUP_SETTLE: f64 = 0.01;
const ZERO_LEVEL: f64 = 1e-6;
const INFINITY_LEVEL: f64 = 1e6;
/// Values this far below the typical value near the origin count as exact zeros.
const NEGLIGIBLE: f64 = 1e-12;

/// Symmetric grid on `[-x_max, x_max]` with `n` log-spaced samples per
/// doubling of `|x|`, `2n + 1` uniform samples on `[-1, 1]`, and the
/// `extra` points that fall inside the range.
pub fn doubling_grid(x_max: f64, n: usize, extra: &[f64]) -> Vec<f64> {
    let n = n.max(1);
    let mut xs = Vec::new();
    let inner = x_max.min(1.0);
    for j in -(n as i64)..=(n as i64) {
        xs.push(inner * j as f64 / n as f64);
    }
    let mut lo = 1.0;
    while lo < x_max {
        let hi = (2.0 * lo).min(x_max);
        for j in 1..=n {
            let t = lo * (hi / lo).powf(j as f64 / n as f64);
            xs.push(t);
            xs.push(-t);
        }
        lo = hi;
    }
    xs.extend(extra.iter().copied().filter(|t| t.abs() <= x_max));
    xs.sort_by(f64::total_cmp);
    xs.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * a.abs().max(1.0));
    xs
}

pub fn shell_of(x: f64) -> usize {
    let a = x.abs();
    if a <= 1.0 {
        0
    } else {
        (a.log2().ceil() as usize).max(1)
    }
}

/// Per-shell extrema of the finite-or-infinite values (NaN means "not
/// evaluated" and is skipped).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Shell {
    pub index: usize,
    /// Largest `|x|` sampled in the shell.
    pub reach: f64,
    pub max: f64,
    pub min: f64,
    pub count: usize,
}

pub fn shells(xs: &[f64], values: &[f64]) -> Vec<Shell> {
    let top = xs.iter().map(|x| shell_of(*x)).max().unwrap_or(0);
    let mut out: Vec<Shell> = (0..=top)
        .map(|index| Shell {
            index,
            reach: 0.0,
            max: f64::NEG_INFINITY,
            min: f64::INFINITY,
            count: 0,
        })
        .collect();
    for (&x, &v) in xs.iter().zip(values) {
        if v.is_nan() {
            continue;
        }
        let s = &mut out[shell_of(x)];
        s.reach = s.reach.max(x.abs());
        s.max = s.max.max(v);
        s.min = s.min.min(v);
        s.count += 1;
    }
    out.retain(|s| s.count > 0);
    out
}

/// Running sup in order of increasing `|x|` (ties keep grid order).
pub fn running_sup(xs: &[f64], values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&i, &j| xs[i].abs().total_cmp(&xs[j].abs()));
    let mut out = vec![f64::NAN; xs.len()];
    let mut sup = f64::NEG_INFINITY;
    for i in order {
        if !values[i].is_nan() {
            sup = sup.max(values[i]);
        }
        out[i] = sup;
    }
    out
}

fn loglog_slope(a: &Shell, b: &Shell, pick: impl Fn(&Shell) -> f64) -> f64 {
    let (va, vb) = (pick(a), pick(b));
    if !(va > 0.0 && vb > 0.0) || a.reach <= 0.0 || b.reach <= a.reach {
        return f64::NAN;
    }
    (vb / va).ln() / (b.reach / a.reach).ln()
}

/// Running sup of each shell end.
fn shell_sups(sh: &[Shell]) -> Vec<f64> {
    let mut acc = f64::NEG_INFINITY;
    sh.iter()
        .map(|s| {
            acc = acc.max(s.max);
            acc
        })
        .collect()
}

/// Finiteness verdict and confidence for the sup of nonnegative values.
///
/// `+inf` entries stand for evaluations that diverged.
pub fn finiteness(xs: &[f64], values: &[f64]) -> (Finiteness, f64) {
    if values.contains(&f64::INFINITY) {
        return (Finiteness::GrowingUnbounded, 0.9);
    }
    let sh = shells(xs, values);
    if sh.len() < 3 {
        return (Finiteness::Inconclusive, 0.2);
    }
    let k = sh.len() - 1;
    let sups = shell_sups(&sh);
    let rel = (sups[k] - sups[k - 2]) / sups[k].abs().max(f64::MIN_POSITIVE);
    let (a, b, c) = (&sh[k - 2], &sh[k - 1], &sh[k]);
    let rising = a.max < b.max && b.max < c.max;
    if rising && c.max >= 2.0 * a.max && loglog_slope(a, c, |s| s.max) >= 0.25 {
        let conf = if c.max >= 10.0 * a.max { 0.9 } else { 0.7 };
        return (Finiteness::GrowingUnbounded, conf);
    }
    if rel < SUP_SETTLE {
        let conf = if rel < 1e-3 { 0.95 } else { 0.8 };
        return (Finiteness::FiniteStable, conf);
    }
    (Finiteness::Inconclusive, 0.3)
}

/// Verdict for `lim_{|x| -> inf}` of nonnegative values, from the last
/// three shells.
pub fn limit_at_infinity(xs: &[f64], values: &[f64]) -> (LimitVerdict, f64) {
    let sh = shells(xs, values);
    if sh.len() < 3 {
        return (LimitVerdict::Inconclusive, 0.2);
    }
    let k = sh.len() - 1;
    let (a, b, c) = (&sh[k - 2], &sh[k - 1], &sh[k]);
    if c.min == f64::INFINITY {
        return (LimitVerdict::Infinity, 0.9);
    }
    if c.max < ZERO_LEVEL {
        return (LimitVerdict::Zero, 0.9);
    }
    let falling = a.max > b.max && b.max > c.max;
    let max_slope = loglog_slope(a, c, |s| s.max);
    if falling && (c.max <= a.max / 100.0 || max_slope <= -1.0) {
        return (LimitVerdict::Zero, 0.8);
    }
    if c.min > INFINITY_LEVEL {
        return (LimitVerdict::Infinity, 0.9);
    }
    let climbing = a.min < b.min && b.min < c.min;
    if climbing && (c.min >= 100.0 * a.min || loglog_slope(a, c, |s| s.min) >= 1.0) {
        return (LimitVerdict::Infinity, 0.8);
    }
    let band_lo = b.min.min(c.min);
    let band_hi = b.max.max(c.max);
    if band_lo > ZERO_LEVEL && band_hi < INFINITY_LEVEL && band_hi / band_lo < 100.0 && max_slope.abs() < 0.25 {
        return (LimitVerdict::NonzeroFinite, 0.8);
    }
    (LimitVerdict::Inconclusive, 0.3)
}

/// Trend of the grid infimum of nonnegative values.
pub fn infimum_trend(xs: &[f64], values: &[f64]) -> InfimumTrend {
    let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    if finite.is_empty() {
        return InfimumTrend::Inconclusive;
    }
    // scale of the values near the origin
    let mut central: Vec<f64> = xs
        .iter()
        .zip(values)
        .filter(|(x, v)| x.abs() <= 1.0 && v.is_finite())
        .map(|(_, v)| *v)
        .collect();
    central.sort_by(f64::total_cmp);
    let scale = central.get(central.len() / 2).copied().unwrap_or(1.0);
    let low = finite.iter().copied().fold(f64::INFINITY, f64::min);
    if low <= NEGLIGIBLE * scale.max(1.0) {
        return InfimumTrend::Vanishing;
    }
    let sh = shells(xs, values);
    if sh.len() < 3 {
        return InfimumTrend::Inconclusive;
    }
    let k = sh.len() - 1;
    let (a, b, c) = (&sh[k - 2], &sh[k - 1], &sh[k]);
    if a.min > b.min && b.min > c.min && c.min <= 0.5 * a.min {
        return InfimumTrend::Vanishing;
    }
    let mut acc = f64::INFINITY;
    let mins: Vec<f64> = sh
        .iter()
        .map(|s| {
            acc = acc.min(s.min);
            acc
        })
        .collect();
    if mins[k] > 0.99 * mins[k - 2] {
        return InfimumTrend::Stabilized;
    }
    InfimumTrend::Inconclusive
}
