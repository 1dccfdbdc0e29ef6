//! The localization function `d(x)`: the smallest half-width whose window
//! carries mass `int_{x-d}^{x+d} q/r = 2`.

use rayon::prelude::*;
use serde::Serialize;

use crate::coefficients::{CoefficientPair, CoefficientSplit};
use crate::error::{Error, Result};
use crate::quadrature::{integrate_chunked, integrate_qr_window, mass, Side};
use crate::trend::{infimum_trend, InfimumTrend};
use crate::Direction;

/// Default largest half-width searched for `d(x)`.
pub const BRACKET_LIMIT: f64 = 1e6;
const MAX_STEPS: usize = 4_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DSample {
    pub x: f64,
    pub d: f64,
    /// `|window mass at d - 2|`, recomputed by an independent window integral.
    pub residual: f64,
    /// The step `[d_lo, d_hi]` in which the mass crossed 2.
    pub bracket: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocalizationProfile {
    pub label: String,
    pub samples: Vec<DSample>,
    /// Largest sampled `d`, a lower estimate of `sup d`.
    pub d0_estimate: f64,
    /// Largest `|x|` sampled.
    pub domain_limit: f64,
}

impl LocalizationProfile {
    pub fn xs(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.x).collect()
    }

    pub fn ds(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.d).collect()
    }
}

/// `d(x)` and the residual `|int_{x-d}^{x+d} q/r - 2|`.
pub fn d_of_x(pair: &CoefficientPair, x: f64, tol: f64, bracket_limit: f64) -> Result<(f64, f64)> {
    let s = solve_d(pair, x, tol, bracket_limit)?;
    Ok((s.d, s.residual))
}

/// Grows the window symmetrically in steps that start at a quarter of
/// `min(r/q, 1)` and double, never stepping over a breakpoint on either
/// side. The mass is nondecreasing in the half-width, so the first step in
/// which it reaches 2 brackets `d`, which is then found by regula falsi.
pub fn solve_d(pair: &CoefficientPair, x: f64, tol: f64, bracket_limit: f64) -> Result<DSample> {
    if !(tol > 0.0) || !(bracket_limit > 0.0) {
        return Err(Error::InvalidParameter("tol and bracket_limit must be positive".into()));
    }
    let right = Side::new(pair, Direction::Right);
    let left = Side::new(pair, Direction::Left);
    let (r, q) = (pair.r(x), pair.q(x));
    let guess = if q > 0.0 && (r / q).is_finite() { r / q } else { 1.0 };
    let mut h = 0.25 * guess.min(1.0);
    let itol = (0.01 * tol).max(1e-16);

    let pieces = |d0: f64, d1: f64| -> Result<f64> {
        let mr = right.smooth_mass(x + d0, x + d1, itol)?.value;
        let ml = left.smooth_mass(-x + d0, -x + d1, itol)?.value;
        Ok(mr + ml)
    };

    let mut d = 0.0;
    let mut cum = 0.0;
    let mut bp_r = right.next_breakpoint(x);
    let mut bp_l = left.next_breakpoint(-x);
    for _ in 0..MAX_STEPS {
        if d >= bracket_limit {
            return Err(Error::BracketExhausted {
                x,
                limit: bracket_limit,
            });
        }
        while bp_r.is_some_and(|b| b <= x + d) {
            bp_r = right.next_breakpoint(x + d);
        }
        while bp_l.is_some_and(|b| b <= -x + d) {
            bp_l = left.next_breakpoint(-x + d);
        }
        let mut step = h.min(bracket_limit - d);
        if let Some(b) = bp_r {
            step = step.min(b - (x + d));
        }
        if let Some(b) = bp_l {
            step = step.min(b - (-x + d));
        }
        if !(step > 0.0) || d + step <= d {
            step = h;
        }
        let m = pieces(d, d + step)?;
        if cum + m >= 2.0 {
            let (lo, hi) = (d, d + step);
            let f = |delta: f64| -> Result<f64> { Ok(cum + pieces(lo, lo + delta)? - 2.0) };
            let delta = regula_falsi(&f, 0.0, cum - 2.0, step, cum + m - 2.0, 0.1 * tol)?;
            let dd = lo + delta;
            let residual = (integrate_qr_window(pair, x, dd, itol)?.value - 2.0).abs();
            return Ok(DSample {
                x,
                d: dd,
                residual,
                bracket: [lo, hi],
            });
        }
        cum += m;
        d += step;
        h *= 2.0;
    }
    Err(Error::MaxSubdivisions {
        a: x - d,
        b: x + d,
        panels: MAX_STEPS,
    })
}

/// Illinois regula falsi for a nondecreasing `f` with `f(a) < 0 <= f(b)`.
fn regula_falsi(
    f: &dyn Fn(f64) -> Result<f64>,
    mut a: f64,
    mut fa: f64,
    mut b: f64,
    mut fb: f64,
    ftol: f64,
) -> Result<f64> {
    if fb.abs() <= ftol {
        return Ok(b);
    }
    let mut kept = 0i8;
    for _ in 0..300 {
        let mut c = if fb != fa {
            b - fb * (b - a) / (fb - fa)
        } else {
            0.5 * (a + b)
        };
        if !(c > a && c < b) {
            c = 0.5 * (a + b);
            if !(c > a && c < b) {
                return Ok(b);
            }
        }
        let fc = f(c)?;
        if fc.abs() <= ftol {
            return Ok(c);
        }
        if fc < 0.0 {
            a = c;
            fa = fc;
            if kept == -1 {
                fb *= 0.5;
            }
            kept = -1;
        } else {
            b = c;
            fb = fc;
            if kept == 1 {
                fa *= 0.5;
            }
            kept = 1;
        }
        if b - a <= 4.0 * f64::EPSILON * b.abs() {
            return Ok(b);
        }
    }
    Ok(0.5 * (a + b))
}

/// `d` at every point of `xs`, evaluated in parallel. The first failure is
/// returned tagged with its abscissa.
pub fn scan_d(pair: &CoefficientPair, xs: &[f64], tol: f64) -> Result<LocalizationProfile> {
    if xs.is_empty() {
        return Err(Error::InvalidParameter("empty grid".into()));
    }
    if xs.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidParameter("grid must be strictly increasing".into()));
    }
    let results: Vec<Result<DSample>> = xs.par_iter().map(|&x| solve_d(pair, x, tol, BRACKET_LIMIT)).collect();
    let mut samples = Vec::with_capacity(xs.len());
    for (x, r) in xs.iter().zip(results) {
        samples.push(r.map_err(|e| e.at(*x))?);
    }
    let d0_estimate = samples.iter().map(|s| s.d).fold(0.0, f64::max);
    let domain_limit = xs.iter().map(|x| x.abs()).fold(0.0, f64::max);
    Ok(LocalizationProfile {
        label: pair.label().to_string(),
        samples,
        d0_estimate,
        domain_limit,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BEstimate {
    pub a: f64,
    /// Grid minimum of the window mass, an upper bound for the true infimum.
    pub value: f64,
    pub argmin: f64,
    pub trend: InfimumTrend,
}

impl BEstimate {
    /// True when the infimum is positive and the scan shows it settling.
    pub fn established(&self) -> bool {
        self.value > 0.0 && self.trend == InfimumTrend::Stabilized
    }
}

/// `inf_x int_{x-a}^{x+a} q/r` over the grid, with the trend of the minima
/// over the doubling shells.
#[allow(non_snake_case)]
pub fn B_of_a(pair: &CoefficientPair, a: f64, xs: &[f64], tol: f64) -> Result<BEstimate> {
    if !(a > 0.0) {
        return Err(Error::InvalidParameter(format!("a must be positive, got {a}")));
    }
    let masses: Vec<Result<f64>> = xs
        .par_iter()
        .map(|&x| {
            integrate_qr_window(pair, x, a, tol)
                .map(|r| r.value)
                .map_err(|e| e.at(x))
        })
        .collect();
    let masses: Vec<f64> = masses.into_iter().collect::<Result<_>>()?;
    let (mut value, mut argmin) = (f64::INFINITY, f64::NAN);
    for (&x, &m) in xs.iter().zip(&masses) {
        if m < value {
            value = m;
            argmin = x;
        }
    }
    Ok(BEstimate {
        a,
        value,
        argmin,
        trend: infimum_trend(xs, &masses),
    })
}

/// Grid size for the sup over `z`.
const Z_GRID: usize = 257;

/// The two smallness quantities for the split `q = q1 + q2`:
///
/// ```text
/// k1(x) = sup_{|z| <= 2r/q1} | int_0^z [g(x+t) - 2g(x) + g(x-t)] dt |,  g = q1/r
/// k2(x) = sup_{|z| <= 2r/q1} | int_{x-z}^{x+z} q2/r |
/// ```
///
/// Both integrands make the integrals odd in `z`, so only `z >= 0` is scanned.
pub fn kappa1_kappa2(split: &CoefficientSplit, x: f64, tol: f64) -> Result<(f64, f64)> {
    let pair = split.parent();
    let q1x = split.q1(x);
    if !(q1x > 0.0) {
        return Err(Error::InvalidParameter(format!("q1({x}) must be positive")));
    }
    let gx = q1x / pair.r(x);
    let zmax = 2.0 * pair.r(x) / q1x;
    let g = |t: f64| split.q1(t) / pair.r(t);
    let h1 = |t: f64| g(x + t) - 2.0 * gx + g(x - t);
    let h2 = |t: f64| split.q2(x + t) / pair.r(x + t) + split.q2(x - t) / pair.r(x - t);

    // breakpoints of both shifted integrands in the z variable
    let mut cuts: Vec<f64> = pair
        .breakpoints_in(x - zmax, x + zmax)?
        .into_iter()
        .map(|b| (b - x).abs())
        .filter(|&z| z > 0.0 && z < zmax)
        .collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();

    let itol = (tol / Z_GRID as f64).max(1e-16);
    let floor = pair.noise_floor(x - zmax, x + zmax);
    // g(x+t) - 2g(x) + g(x-t) cancels to roundoff of size eps * g(x)
    let cancel = 64.0 * f64::EPSILON * gx * zmax / (Z_GRID - 1) as f64;
    let k1 = sup_abs_primitive(&h1, zmax, &cuts, itol.max(cancel), floor)?;
    let k2 = sup_abs_primitive(&h2, zmax, &cuts, itol, floor)?;
    Ok((k1, k2))
}

/// `sup_{0 <= z <= zmax} |int_0^z h|` by a uniform grid followed by a
/// golden-section refinement around the best grid cell.
fn sup_abs_primitive(h: &dyn Fn(f64) -> f64, zmax: f64, cuts: &[f64], tol: f64, floor: f64) -> Result<f64> {
    let piece = |a: f64, b: f64| -> Result<f64> {
        let lo = cuts.partition_point(|&c| c <= a);
        let hi = cuts.partition_point(|&c| c < b);
        Ok(integrate_chunked(h, a, b, tol, &cuts[lo..hi], floor)?.value)
    };
    let zs: Vec<f64> = (0..Z_GRID).map(|i| zmax * i as f64 / (Z_GRID - 1) as f64).collect();
    let mut prim = vec![0.0; Z_GRID];
    for i in 1..Z_GRID {
        prim[i] = prim[i - 1] + piece(zs[i - 1], zs[i])?;
    }
    let best = (0..Z_GRID)
        .max_by(|&i, &j| prim[i].abs().total_cmp(&prim[j].abs()))
        .expect("grid is nonempty");
    let mut sup = prim[best].abs();
    let lo_i = best.saturating_sub(1);
    let hi_i = (best + 1).min(Z_GRID - 1);
    let (mut a, mut b) = (zs[lo_i], zs[hi_i]);
    let base = prim[lo_i];
    let base_z = zs[lo_i];
    let at = |z: f64| -> Result<f64> { Ok((base + piece(base_z, z)?).abs()) };
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let (mut fc, mut fd) = (at(c)?, at(d)?);
    for _ in 0..40 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = at(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = at(d)?;
        }
    }
    sup = sup.max(fc).max(fd);
    Ok(sup)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SplitEstimateRow {
    pub x: f64,
    pub d_measured: f64,
    /// `r(x) / q1(x)`.
    pub d_predicted: f64,
    /// `d_measured / d_predicted`.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SplitEstimate {
    pub rows: Vec<SplitEstimateRow>,
    pub min_ratio: f64,
    pub max_ratio: f64,
}

impl SplitEstimate {
    /// Smallest `c` with all ratios in `[1/c, c]`.
    pub fn band(&self) -> f64 {
        self.max_ratio.max(1.0 / self.min_ratio)
    }
}

/// Compares `d(x)` with `r(x)/q1(x)` along `xs`.
pub fn d_estimate_thm28(split: &CoefficientSplit, xs: &[f64], tol: f64) -> Result<SplitEstimate> {
    let pair = split.parent();
    let profile = scan_d(pair, xs, tol)?;
    let rows: Vec<SplitEstimateRow> = profile
        .samples
        .iter()
        .map(|s| {
            let predicted = pair.r(s.x) / split.q1(s.x);
            SplitEstimateRow {
                x: s.x,
                d_measured: s.d,
                d_predicted: predicted,
                ratio: s.d / predicted,
            }
        })
        .collect();
    let min_ratio = rows.iter().map(|r| r.ratio).fold(f64::INFINITY, f64::min);
    let max_ratio = rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
    Ok(SplitEstimate {
        rows,
        min_ratio,
        max_ratio,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SeriesVerdict {
    Diverging,
    Converging,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SPartials {
    /// `(X, int_{-X}^0 q/r, int_0^X q/r)` for doubling `X`.
    pub rows: Vec<(f64, f64, f64)>,
    pub left: SeriesVerdict,
    pub right: SeriesVerdict,
    /// Largest `X` actually integrated.
    pub reach: f64,
}

/// Relative growth per doubling above which a partial integral counts as growing.
const GROWTH_PER_DOUBLING: f64 = 0.01;

/// Partial integrals of `q/r` over `[-X, 0]` and `[0, X]` for `X = 1, 2, 4, ...`
/// up to `x_max` (cut at the pair's global numeric limit).
pub fn s1_s2_diverge(pair: &CoefficientPair, x_max: f64, tol: f64) -> Result<SPartials> {
    if !(x_max > 0.0) {
        return Err(Error::InvalidParameter(format!("X must be positive, got {x_max}")));
    }
    let reach = x_max.min(pair.global_limit());
    let mut marks = vec![];
    let mut m = reach.min(1.0);
    loop {
        marks.push(m);
        if m >= reach {
            break;
        }
        m = (2.0 * m).min(reach);
    }
    let increments: Vec<Result<(f64, f64)>> = marks
        .par_iter()
        .enumerate()
        .map(|(i, &hi)| {
            let lo = if i == 0 { 0.0 } else { marks[i - 1] };
            let r = mass(pair, lo, hi, tol)?.value;
            let l = mass(pair, -hi, -lo, tol)?.value;
            Ok((l, r))
        })
        .collect();
    let mut rows = Vec::with_capacity(marks.len());
    let (mut sl, mut sr) = (0.0, 0.0);
    for (&x, inc) in marks.iter().zip(increments) {
        let (l, r) = inc?;
        sl += l;
        sr += r;
        rows.push((x, sl, sr));
    }
    let verdict = |col: &dyn Fn(&(f64, f64, f64)) -> f64| -> SeriesVerdict {
        let n = rows.len();
        if n < 3 {
            return SeriesVerdict::Inconclusive;
        }
        let growth = |i: usize| {
            let (a, b) = (col(&rows[i - 1]), col(&rows[i]));
            if b <= 0.0 {
                0.0
            } else {
                (b - a) / b
            }
        };
        let (g1, g2) = (growth(n - 2), growth(n - 1));
        // increment per unit of log X, so a partial last doubling compares fairly
        let step = |i: usize| (col(&rows[i]) - col(&rows[i - 1])) / (rows[i].0 / rows[i - 1].0).ln();
        let shrinking = step(n - 1) < 0.9 * step(n - 2);
        if g1 > GROWTH_PER_DOUBLING && g2 > GROWTH_PER_DOUBLING && !shrinking {
            SeriesVerdict::Diverging
        } else if g2 <= GROWTH_PER_DOUBLING && (g1 <= GROWTH_PER_DOUBLING || shrinking) {
            SeriesVerdict::Converging
        } else {
            SeriesVerdict::Inconclusive
        }
    };
    let left = verdict(&|r| r.1);
    let right = verdict(&|r| r.2);
    Ok(SPartials {
        rows,
        left,
        right,
        reach,
    })
}

/// Smallest ratio `d(t) / d(x)` over `|t - x| <= d(x)` (nine probes per
/// point) across `xs`.
pub fn delta_diagnostic(pair: &CoefficientPair, xs: &[f64], tol: f64) -> Result<f64> {
    let per_point: Vec<Result<f64>> = xs
        .par_iter()
        .map(|&x| {
            let (d, _) = d_of_x(pair, x, tol, BRACKET_LIMIT).map_err(|e| e.at(x))?;
            let mut worst = f64::INFINITY;
            for j in -4..=4 {
                let t = x + d * j as f64 / 4.0;
                let (dt, _) = d_of_x(pair, t, tol, BRACKET_LIMIT).map_err(|e| e.at(t))?;
                worst = worst.min(dt / d);
            }
            Ok(worst)
        })
        .collect();
    per_point
        .into_iter()
        .try_fold(f64::INFINITY, |acc, r| r.map(|v| acc.min(v)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::split_for_thm28;
    use crate::trend::doubling_grid;
    use rand::{Rng, SeedableRng};

    fn identity() -> CoefficientPair {
        CoefficientPair::make_constant(1.0, 1.0).unwrap()
    }

    /// Inverts a dense trapezoid mass table by bisection; independent of the
    /// adaptive machinery.
    fn dense_d(pair: &CoefficientPair, x: f64, dmax: f64, n: usize) -> f64 {
        let h = dmax / n as f64;
        let f = |t: f64| pair.density(t);
        let mut masses = vec![0.0; n + 1];
        for i in 1..=n {
            let (a, b) = (h * (i - 1) as f64, h * i as f64);
            let mid = 0.5 * (a + b);
            // Simpson on each cell, both sides
            let cell = |c: f64, s: f64| (f(c + s * a) + 4.0 * f(c + s * mid) + f(c + s * b)) * h / 6.0;
            masses[i] = masses[i - 1] + cell(x, 1.0) + cell(x, -1.0);
        }
        let i = masses.iter().position(|&m| m >= 2.0).expect("dmax too small");
        // linear inverse inside the crossing cell
        let (m0, m1) = (masses[i - 1], masses[i]);
        h * (i - 1) as f64 + h * (2.0 - m0) / (m1 - m0)
    }

    #[test]
    fn identity_and_constant_pairs() {
        for x in [-7.0, 0.0, 0.3, 12.5] {
            let (d, res) = d_of_x(&identity(), x, 1e-12, 1e6).unwrap();
            assert!((d - 1.0).abs() < 1e-12, "{d}");
            assert!(res < 1e-12);
        }
        let four = CoefficientPair::make_constant(1.0, 4.0).unwrap();
        let (d, _) = d_of_x(&four, 3.0, 1e-12, 1e6).unwrap();
        assert!((d - 0.25).abs() < 1e-12);
    }

    #[test]
    fn exp_osc_against_dense_inversion() {
        let p = CoefficientPair::make_exp_osc(0.0, 1.0, 2.0).unwrap();
        let s = solve_d(&p, 3.0, 1e-12, 1e6).unwrap();
        let c = s.d * 3f64.exp();
        assert!(c > 0.1 && c < 10.0, "{c}");
        let oracle = dense_d(&p, 3.0, 4.0 * s.d, 400_000);
        assert!((s.d - oracle).abs() < 1e-7 * s.d, "{} vs {oracle}", s.d);
        assert!(s.bracket[0] <= s.d && s.d <= s.bracket[1]);
        assert!(s.residual < 1e-10);
    }

    #[test]
    fn zero_potential_exhausts_bracket() {
        let z = CoefficientPair::make_constant(2.0, 0.0).unwrap();
        let e = d_of_x(&z, 0.0, 1e-10, 1e3).unwrap_err();
        assert!(matches!(e, Error::BracketExhausted { .. }));
        // total mass 1 < 2
        let decaying = CoefficientPair::from_fns("decaying", |_| 1.0, |t: f64| 0.5 * (-t.abs()).exp()).unwrap();
        assert!(d_of_x(&decaying, 0.0, 1e-10, 1e4).is_err());
    }

    #[test]
    fn scan_profiles() {
        let xs: Vec<f64> = (-10..=10).map(|i| i as f64).collect();
        let prof = scan_d(&identity(), &xs, 1e-12).unwrap();
        assert!(prof.samples.iter().all(|s| (s.d - 1.0).abs() < 1e-12));
        assert!((prof.d0_estimate - 1.0).abs() < 1e-12);
        assert_eq!(prof.domain_limit, 10.0);

        let p = CoefficientPair::make_exp_osc(0.0, 1.0, 2.0).unwrap();
        let xs: Vec<f64> = (0..=12).map(|i| 10f64.powf(i as f64 / 12.0)).collect();
        let prof = scan_d(&p, &xs, 1e-11).unwrap();
        let ds = prof.ds();
        // decreasing between the far points; the sup sits near the origin
        assert!(ds[12] < ds[6] && ds[6] < ds[0]);
        assert_eq!(prof.d0_estimate, ds[0]);

        let sp = CoefficientPair::make_sine_power(2.0).unwrap();
        let xs: Vec<f64> = (0..=200).map(|i| 0.5 * i as f64).collect();
        let prof = scan_d(&sp, &xs, 1e-10).unwrap();
        let b = B_of_a(&sp, 2.0, &xs, 1e-10).unwrap();
        assert!(b.value > 0.0);
        // a window of half-width a with mass >= B(a) >= 2 forces d <= a
        assert!(prof.d0_estimate.is_finite() && prof.d0_estimate <= 2.0 * 2.0);
        assert!(scan_d(&identity(), &[1.0, 0.0], 1e-10).is_err());
    }

    #[test]
    fn b_of_a_cases() {
        let xs = doubling_grid(256.0, 8, &[]);
        let b = B_of_a(&identity(), 1.0, &xs, 1e-12).unwrap();
        assert!((b.value - 2.0).abs() < 1e-12);
        assert_eq!(b.trend, InfimumTrend::Stabilized);
        let decaying = CoefficientPair::from_fns("decaying", |_| 1.0, |t: f64| (-t.abs()).exp()).unwrap();
        let b = B_of_a(&decaying, 1.0, &xs, 1e-12).unwrap();
        assert_eq!(b.trend, InfimumTrend::Vanishing);
        let sp = CoefficientPair::make_sine_power(1.0).unwrap();
        let xs = doubling_grid(1024.0, 16, &[]);
        let b = B_of_a(&sp, std::f64::consts::PI, &xs, 1e-12).unwrap();
        // two windows of length 2 pi over 1 + sin: mass 2 pi exactly away from the kink
        assert!(b.value > 1.0 && b.established(), "{b:?}");
    }

    #[test]
    fn kappas() {
        let id = identity().with_split(|_| 1.0, |_| 0.0);
        let s = split_for_thm28(&id).unwrap();
        assert_eq!(kappa1_kappa2(&s, 2.0, 1e-12).unwrap(), (0.0, 0.0));

        let p = CoefficientPair::make_exp_osc(0.0, 1.0, 2.0).unwrap();
        let s = split_for_thm28(&p).unwrap();
        let mut k2s = vec![];
        for x in [3.0f64, 4.0, 5.0, 6.0, 7.0, 8.0] {
            let (k1, k2) = kappa1_kappa2(&s, x, 1e-13).unwrap();
            // k1 = e^{x} (2 sinh z - 2z) at z = 2 e^{-x}
            let z: f64 = 2.0 * (-x).exp();
            let exact = x.exp() * (2.0 * z.sinh() - 2.0 * z);
            assert!((k1 - exact).abs() < 1e-9 + 1e-6 * exact, "x={x}: {k1} vs {exact}");
            k2s.push(k2);
        }
        // k2 <= c e^{(theta - gamma) x} = c e^{-x}
        let c = k2s
            .iter()
            .zip([3.0f64, 4.0, 5.0, 6.0, 7.0, 8.0])
            .map(|(k, x)| k * x.exp())
            .fold(0.0, f64::max);
        assert!(c < 10.0, "{c}");
        assert!(k2s.last().unwrap() < &k2s[0]);
    }

    #[test]
    fn split_estimate() {
        let id = identity().with_split(|_| 1.0, |_| 0.0);
        let s = split_for_thm28(&id).unwrap();
        let est = d_estimate_thm28(&s, &[-3.0, 0.0, 4.0], 1e-12).unwrap();
        assert!(est.rows.iter().all(|r| (r.ratio - 1.0).abs() < 1e-12));

        let p = CoefficientPair::make_exp_osc(0.0, 1.0, 2.0).unwrap();
        let s = split_for_thm28(&p).unwrap();
        let est = d_estimate_thm28(&s, &[2.0, 4.0, 6.0, 8.0], 1e-11).unwrap();
        assert!(est.band() < 10.0);
        let dev: Vec<f64> = est.rows.iter().map(|r| (r.ratio - 1.0).abs()).collect();
        assert!(dev[3] < dev[0], "{dev:?}");

        let p = CoefficientPair::make_exp_osc(0.0, 2.0, 2.0).unwrap();
        let s = split_for_thm28(&p).unwrap();
        let est = d_estimate_thm28(&s, &[1.0, 2.0, 3.0, 4.0, 5.0], 1e-11).unwrap();
        assert!(est.band() < 10.0, "{est:?}");
    }

    #[test]
    fn s_partials() {
        let s = s1_s2_diverge(&identity(), 64.0, 1e-10).unwrap();
        assert_eq!(s.rows.last().unwrap().2, 64.0);
        assert_eq!((s.left, s.right), (SeriesVerdict::Diverging, SeriesVerdict::Diverging));
        let decaying = CoefficientPair::from_fns("decaying", |_| 1.0, |t: f64| (-t.abs()).exp()).unwrap();
        let s = s1_s2_diverge(&decaying, 64.0, 1e-12).unwrap();
        assert!((s.rows.last().unwrap().2 - (1.0 - (-64f64).exp())).abs() < 1e-12);
        assert_eq!(s.right, SeriesVerdict::Converging);
        let p = CoefficientPair::make_exp_osc(2.0, 1.0, 1.0).unwrap();
        let s = s1_s2_diverge(&p, 64.0, 1e-10).unwrap();
        assert_eq!(
            (s.left, s.right),
            (SeriesVerdict::Converging, SeriesVerdict::Converging)
        );
        assert!(s.rows.last().unwrap().2 <= 2.0);
    }

    #[test]
    fn monotone_characterization() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(23);
        let presets = [
            identity(),
            CoefficientPair::make_sine_power(1.5).unwrap(),
            CoefficientPair::make_exp_osc(0.0, 1.0, 2.0).unwrap(),
            CoefficientPair::make_exp_osc(1.0, 1.0, 1.0).unwrap(),
        ];
        for p in &presets {
            for _ in 0..50 {
                let x: f64 = rng.gen_range(-6.0..6.0);
                let (d, _) = d_of_x(p, x, 1e-11, 1e6).unwrap();
                let below = integrate_qr_window(p, x, 0.9 * d, 1e-12).unwrap().value;
                let above = integrate_qr_window(p, x, 1.1 * d, 1e-12).unwrap().value;
                assert!(below < 2.0 && above > 2.0, "{}: x={x} d={d} {below} {above}", p.label());
            }
        }
    }

    #[test]
    fn evenness_and_scaling() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(29);
        let p = CoefficientPair::make_exp_osc(0.0, 1.0, 1.0).unwrap();
        let scaled = p.scaled(10.0).unwrap();
        for _ in 0..20 {
            let x: f64 = rng.gen_range(-5.0..5.0);
            let (a, _) = d_of_x(&p, x, 1e-11, 1e6).unwrap();
            let (b, _) = d_of_x(&p, -x, 1e-11, 1e6).unwrap();
            let (c, _) = d_of_x(&scaled, x, 1e-11, 1e6).unwrap();
            assert!((a - b).abs() <= 1e-9 * a.max(1e-3));
            assert!((a - c).abs() <= 1e-9 * a.max(1e-3));
        }
    }

    #[test]
    fn delta_is_positive() {
        let delta = delta_diagnostic(&identity(), &[0.0, 5.0], 1e-12).unwrap();
        assert!((delta - 1.0).abs() < 1e-10);
        let p = CoefficientPair::make_exp_osc(0.0, 1.0, 2.0).unwrap();
        let delta = delta_diagnostic(&p, &[1.0, 2.0, 3.0], 1e-10).unwrap();
        assert!(delta > 0.05 && delta <= 1.0);
    }
}
