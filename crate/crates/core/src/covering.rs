//! Coverings of a half-line by abutting segments `[x_n - k(x_n), x_n + k(x_n)]`
//! and the geometric tail bounds they provide.

use rayon::prelude::*;
use serde::Serialize;

use crate::coefficients::CoefficientPair;
use crate::error::{Error, Result};
use crate::quadrature::{mass, Side};
use crate::Direction;

/// Cap on the number of walk steps for one segment.
const MAX_WALK_STEPS: usize = 4_000_000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Segment {
    /// Zero-based position in the chain.
    pub index: usize,
    pub center: f64,
    pub half_width: f64,
    pub lo: f64,
    pub hi: f64,
    /// `int_lo^hi q/r`.
    pub mass: f64,
}

impl Segment {
    pub fn length(&self) -> f64 {
        self.hi - self.lo
    }

    /// The endpoint closer to the chain origin.
    pub fn near_end(&self, dir: Direction) -> f64 {
        match dir {
            Direction::Right => self.lo,
            Direction::Left => self.hi,
        }
    }

    /// The endpoint farther from the chain origin.
    pub fn far_end(&self, dir: Direction) -> f64 {
        match dir {
            Direction::Right => self.hi,
            Direction::Left => self.lo,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoveringChain {
    pub origin: f64,
    pub direction: Direction,
    pub segments: Vec<Segment>,
    /// Breakpoints of the pair inside the covered span.
    #[serde(skip)]
    pub breakpoints: Vec<f64>,
    /// True when every half-width is the localization function at its center.
    pub kappa_is_d: bool,
}

impl CoveringChain {
    /// Far end of the last segment, or the origin for an empty chain.
    pub fn reach(&self) -> f64 {
        self.segments.last().map_or(self.origin, |s| s.far_end(self.direction))
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    /// Mass accumulated from the origin to the near end of each segment.
    pub fn accumulated_masses(&self) -> Vec<f64> {
        let mut acc = 0.0;
        self.segments
            .iter()
            .map(|s| {
                let a = acc;
                acc += s.mass;
                a
            })
            .collect()
    }
}

fn mass_tol(tol: f64) -> f64 {
    (0.01 * tol).max(1e-15)
}

/// Length `L` with `int_start^{start+L} rho = target` in the side's coordinate.
///
/// Steps start at a quarter of `min(r/q, 1)` at the start point and double,
/// but never cross a breakpoint, so every step integrates a smooth piece.
/// The crossing step is resolved by a safeguarded regula falsi.
pub(crate) fn mass_walk(side: &Side<'_>, start: f64, target: f64, tol: f64, limit: f64) -> Result<f64> {
    let t0 = side.t(start);
    let (r, q) = (side.pair.r(t0), side.pair.q(t0));
    let guess = if q > 0.0 && (r / q).is_finite() { r / q } else { 1.0 };
    let mut h = 0.25 * guess.min(1.0);
    let mut pos = start;
    let mut cum = 0.0;
    let mut next_bp = side.next_breakpoint(pos);
    for _ in 0..MAX_WALK_STEPS {
        if pos - start >= limit {
            return Err(Error::BracketExhausted { x: t0, limit });
        }
        while next_bp.is_some_and(|b| b <= pos) {
            next_bp = side.next_breakpoint(pos);
        }
        let mut end = (pos + h).min(start + limit);
        if let Some(b) = next_bp {
            end = end.min(b);
        }
        if end <= pos {
            end = pos + h;
        }
        let m = side.smooth_mass(pos, end, mass_tol(tol))?.value;
        if cum + m >= target {
            return Ok(solve_in_step(side, pos, end, cum, cum + m, target, tol)? - start);
        }
        cum += m;
        pos = end;
        h = (2.0 * h).min(limit);
    }
    Err(Error::MaxSubdivisions {
        a: t0,
        b: side.t(pos),
        panels: MAX_WALK_STEPS,
    })
}

/// Root of `cum + int_lo^tau rho - target` on `[lo, hi]` where the value at
/// `hi` (`cum_hi`) is at least `target`.
fn solve_in_step(side: &Side<'_>, lo: f64, hi: f64, cum: f64, cum_hi: f64, target: f64, tol: f64) -> Result<f64> {
    let f = |tau: f64| -> Result<f64> { Ok(cum + side.smooth_mass(lo, tau, mass_tol(tol))?.value - target) };
    let (mut a, mut fa) = (lo, cum - target);
    let (mut b, mut fb) = (hi, cum_hi - target);
    if fb.abs() <= tol {
        return Ok(b);
    }
    let mut side_kept = 0i8;
    for _ in 0..200 {
        let mut c = if fb != fa {
            b - fb * (b - a) / (fb - fa)
        } else {
            0.5 * (a + b)
        };
        if !(c > a && c < b) {
            c = 0.5 * (a + b);
        }
        let fc = f(c)?;
        if fc.abs() <= tol || (b - a) <= 4.0 * f64::EPSILON * c.abs().max(f64::MIN_POSITIVE) {
            return Ok(c);
        }
        if fc < 0.0 {
            a = c;
            fa = fc;
            if side_kept == -1 {
                fb *= 0.5;
            }
            side_kept = -1;
        } else {
            b = c;
            fb = fc;
            if side_kept == 1 {
                fa *= 0.5;
            }
            side_kept = 1;
        }
    }
    Ok(0.5 * (a + b))
}

/// Chain whose centers solve `t - kappa(t) = previous far end` (rightward;
/// mirrored for leftward), found by bisection on a growing span.
///
/// The near end of each segment is set to the previous far end, so the
/// segments abut exactly.
pub fn build_covering(
    pair: &CoefficientPair,
    x: f64,
    dir: Direction,
    kappa: &dyn Fn(f64) -> f64,
    n_max: usize,
    span_limit: f64,
) -> Result<CoveringChain> {
    let side = Side::new(pair, dir);
    let mut segments = Vec::with_capacity(n_max);
    let mut near = side.s(x);
    for index in 0..n_max {
        if (near - side.s(x)).abs() >= span_limit {
            break;
        }
        let k = |s: f64| kappa(side.t(s));
        let phi = |s: f64| s - k(s) - near;
        // phi(near) = -kappa(near) < 0
        let mut span = k(near).max(1e-300);
        let mut hi = near + span;
        let mut guard = 0;
        while phi(hi) < 0.0 {
            span *= 2.0;
            hi = near + span;
            guard += 1;
            if span > span_limit || guard > 2000 {
                return Err(Error::RootNotBracketed {
                    target: side.t(near),
                    span: span_limit,
                });
            }
        }
        let mut lo = near;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if phi(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let center = hi;
        let half_width = k(center);
        let far = center + half_width;
        let seg_mass = side.mass(near, far, 1e-12)?.value;
        let (a, b) = (side.t(near), side.t(far));
        segments.push(Segment {
            index,
            center: side.t(center),
            half_width,
            lo: a.min(b),
            hi: a.max(b),
            mass: seg_mass,
        });
        near = far;
    }
    finish_chain(pair, x, dir, segments, false)
}

/// Chain with `kappa = d`: each segment is the shortest interval starting at
/// the previous far end that carries mass 2. Its midpoint `c` satisfies
/// `d(c) = half-width` because the window mass is nondecreasing in the width.
pub fn build_d_covering(
    pair: &CoefficientPair,
    x: f64,
    dir: Direction,
    n_max: usize,
    tol: f64,
) -> Result<CoveringChain> {
    let side = Side::new(pair, dir);
    let mut segments = Vec::with_capacity(n_max);
    let mut near = side.s(x);
    for index in 0..n_max {
        let len = mass_walk(&side, near, 2.0, tol, crate::quadrature::WALK_LIMIT)?;
        let far = near + len;
        let (a, b) = (side.t(near), side.t(far));
        let seg_mass = side.mass(near, far, mass_tol(tol))?.value;
        segments.push(Segment {
            index,
            center: side.t(near + 0.5 * len),
            half_width: 0.5 * len,
            lo: a.min(b),
            hi: a.max(b),
            mass: seg_mass,
        });
        near = far;
    }
    finish_chain(pair, x, dir, segments, true)
}

fn finish_chain(
    pair: &CoefficientPair,
    x: f64,
    dir: Direction,
    segments: Vec<Segment>,
    kappa_is_d: bool,
) -> Result<CoveringChain> {
    let mut chain = CoveringChain {
        origin: x,
        direction: dir,
        segments,
        breakpoints: Vec::new(),
        kappa_is_d,
    };
    let (a, b) = (x.min(chain.reach()), x.max(chain.reach()));
    chain.breakpoints = pair.breakpoints_in(a, b)?;
    Ok(chain)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoveringReport {
    pub segments: usize,
    /// Largest `|far end of n - near end of n+1|`, plus the gap at the origin.
    pub max_abutment_gap: f64,
    /// Largest `|recomputed mass - 2|` (only meaningful for `kappa = d`).
    pub max_mass_deviation: f64,
    /// Largest `2(n-1) - accumulated mass at the near end of segment n`, clipped at 0.
    pub max_accumulated_violation: f64,
    pub failures: Vec<String>,
}

impl CoveringReport {
    pub fn ok(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Recomputes every segment mass independently and checks abutment and the
/// accumulated-mass lower bound `2(n-1)` at every segment start.
pub fn verify_covering(chain: &CoveringChain, pair: &CoefficientPair, tol: f64) -> CoveringReport {
    let dir = chain.direction;
    let masses: Vec<Result<f64>> = chain
        .segments
        .par_iter()
        .map(|s| mass(pair, s.lo, s.hi, mass_tol(tol)).map(|r| r.value))
        .collect();
    let mut failures = Vec::new();
    let mut gap: f64 = 0.0;
    let mut dev: f64 = 0.0;
    let mut violation: f64 = 0.0;
    let mut acc = 0.0;
    let mut prev_far = chain.origin;
    let n = chain.segments.len() as f64;
    let slack = n * tol.max(1e-12);
    for (seg, m) in chain.segments.iter().zip(masses) {
        let g = (seg.near_end(dir) - prev_far).abs();
        gap = gap.max(g);
        if g != 0.0 {
            failures.push(format!(
                "segment {} does not abut its predecessor (gap {g:e})",
                seg.index
            ));
        }
        let m = match m {
            Ok(m) => m,
            Err(e) => {
                failures.push(format!("segment {}: {e}", seg.index));
                continue;
            }
        };
        if chain.kappa_is_d {
            let d = (m - 2.0).abs();
            dev = dev.max(d);
            if d > tol.max(1e-12) {
                failures.push(format!("segment {} carries mass {m}", seg.index));
            }
            let v = (2.0 * seg.index as f64 - acc).max(0.0);
            violation = violation.max(v);
            if v > slack {
                failures.push(format!(
                    "accumulated mass {acc} below {} at segment {}",
                    2 * seg.index,
                    seg.index
                ));
            }
        }
        acc += m;
        prev_far = seg.far_end(dir);
    }
    CoveringReport {
        segments: chain.segments.len(),
        max_abutment_gap: gap,
        max_mass_deviation: dev,
        max_accumulated_violation: violation,
        failures,
    }
}

/// `sum_{n >= from_segment} b(Delta_n) e^{-2 nu (n-1)}` over the chain,
/// closed by the geometric series with the largest bound seen for all
/// segments beyond the chain. `from_segment` is one-based.
pub fn tail_certificate(
    chain: &CoveringChain,
    nu: f64,
    per_segment_bound: &dyn Fn(&Segment) -> f64,
    from_segment: usize,
) -> Result<f64> {
    if !(nu > 0.0) {
        return Err(Error::InvalidParameter(format!("nu must be positive, got {nu}")));
    }
    let from = from_segment.max(1);
    let n_total = chain.segments.len();
    let bounds: Vec<f64> = chain.segments.iter().map(per_segment_bound).collect();
    if bounds.iter().any(|b| !(*b >= 0.0)) {
        return Err(Error::InvalidParameter("segment bounds must be nonnegative".into()));
    }
    let terms: Vec<f64> = bounds
        .iter()
        .enumerate()
        .map(|(i, b)| {
            if *b == 0.0 {
                0.0
            } else {
                b * (-2.0 * nu * i as f64).exp()
            }
        })
        .collect();
    if n_total >= 4 && terms[n_total - 4..].windows(2).all(|w| w[1] > w[0] && w[0] > 0.0) {
        return Err(Error::Unbounded);
    }
    let inside: f64 = terms.iter().skip(from - 1).sum();
    let b_max = bounds.iter().copied().fold(0.0, f64::max);
    let beyond = if b_max == 0.0 {
        0.0
    } else {
        let start = (from - 1).max(n_total);
        b_max * (-2.0 * nu * start as f64).exp() / (1.0 - (-2.0 * nu).exp())
    };
    Ok(inside + beyond)
}
