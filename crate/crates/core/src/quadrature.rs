//! Adaptive Gauss-Kronrod integration and covering-certified improper integrals.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::OnceLock;

use serde::Serialize;

use crate::coefficients::CoefficientPair;
use crate::covering::{mass_walk, tail_certificate, CoveringChain, Segment};
use crate::error::{Error, Result};
use crate::Direction;

/// Panel budget for one call of [`integrate_finite`].
pub const MAX_PANELS: usize = 1_000_000;
/// Segment budget for covering-truncated improper integrals.
pub const MAX_SEGMENTS: usize = 4096;
/// Longest single covering segment searched before the mass is declared too small.
pub const WALK_LIMIT: f64 = 1e6;

// Kronrod abscissae on [0, 1) in decreasing order; odd indices are the Gauss points.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_225,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// The 15 Kronrod nodes on `[-1, 1]` in increasing order.
fn reference_nodes() -> [f64; 15] {
    let mut t = [0.0; 15];
    for i in 0..7 {
        t[i] = -XGK[i];
        t[14 - i] = XGK[i];
    }
    t
}

/// Kronrod and Gauss weights aligned with [`reference_nodes`].
fn reference_weights() -> ([f64; 15], [f64; 15]) {
    let mut k = [0.0; 15];
    let mut g = [0.0; 15];
    for i in 0..8 {
        k[i] = WGK[i];
        k[14 - i] = WGK[i];
        if i % 2 == 1 {
            g[i] = WG[i / 2];
            g[14 - i] = WG[i / 2];
        }
    }
    g[7] = WG[3];
    (k, g)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadratureResult {
    pub value: f64,
    pub abs_error_estimate: f64,
    pub subdivisions: usize,
    pub truncation_point: Option<f64>,
    pub truncation_bound: Option<f64>,
}

impl QuadratureResult {
    fn finite(value: f64, err: f64, panels: usize) -> Self {
        QuadratureResult {
            value,
            abs_error_estimate: err,
            subdivisions: panels,
            truncation_point: None,
            truncation_bound: None,
        }
    }

    /// Error estimate plus truncation bound.
    pub fn total_error(&self) -> f64 {
        self.abs_error_estimate + self.truncation_bound.unwrap_or(0.0)
    }
}

/// Result of the 15-point rule on one panel, with the QUADPACK error model.
#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
    resabs: f64,
    /// Largest `|f|` at the nodes.
    fmax: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.total_cmp(&other.err)
    }
}

/// QUADPACK rescaling of the raw Kronrod-Gauss difference.
fn quadpack_error(raw: f64, resabs: f64, resasc: f64) -> f64 {
    let mut err = raw.abs();
    if resasc != 0.0 && err != 0.0 {
        err = resasc * (200.0 * err / resasc).powf(1.5).min(1.0);
    }
    if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * resabs);
    }
    err
}

/// Applies the 15-point rule to sampled values `fv` on a panel of half-width `h`.
fn rule_on_values(fv: &[f64; 15], h: f64) -> (f64, f64, f64) {
    let (wk, wg) = reference_weights();
    let mut resk = 0.0;
    let mut resg = 0.0;
    let mut resabs = 0.0;
    for i in 0..15 {
        resk += wk[i] * fv[i];
        resg += wg[i] * fv[i];
        resabs += wk[i] * fv[i].abs();
    }
    let mean = 0.5 * resk;
    let resasc: f64 = (0..15).map(|i| wk[i] * (fv[i] - mean).abs()).sum();
    let err = quadpack_error((resk - resg) * h, resabs * h.abs(), resasc * h.abs());
    (resk * h, err, resabs * h.abs())
}

fn gk15<F: Fn(f64) -> f64 + ?Sized>(f: &F, a: f64, b: f64) -> Result<Panel> {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let nodes = reference_nodes();
    let mut fv = [0.0; 15];
    let mut fmax: f64 = 0.0;
    for i in 0..15 {
        let t = c + h * nodes[i];
        let v = f(t);
        if !v.is_finite() {
            return Err(Error::NonFinite { at: t });
        }
        fv[i] = v;
        fmax = fmax.max(v.abs());
    }
    let (value, err, resabs) = rule_on_values(&fv, h);
    Ok(Panel {
        a,
        b,
        value,
        err,
        resabs,
        fmax,
    })
}

fn too_narrow(a: f64, b: f64) -> bool {
    let mid = 0.5 * (a + b);
    mid <= a || mid >= b || (b - a) <= 64.0 * f64::EPSILON * a.abs().max(b.abs())
}

/// Adaptive integral of `f` over `[a, b]` to absolute tolerance `tol`.
///
/// `breakpoints` (any order, points outside `(a, b)` are ignored) seed the
/// initial partition so that no panel straddles them.
pub fn integrate_finite<F>(f: F, a: f64, b: f64, tol: f64, breakpoints: &[f64]) -> Result<QuadratureResult>
where
    F: Fn(f64) -> f64,
{
    integrate_finite_with_budget(&f, a, b, tol, breakpoints, MAX_PANELS)
}

pub fn integrate_finite_with_budget<F>(
    f: &F,
    a: f64,
    b: f64,
    tol: f64,
    breakpoints: &[f64],
    max_panels: usize,
) -> Result<QuadratureResult>
where
    F: Fn(f64) -> f64 + ?Sized,
{
    integrate_with_floor(f, a, b, tol, breakpoints, max_panels, 0.0)
}

/// Adaptive core. `floor` is the evaluation noise of `f` relative to its
/// amplitude (the largest `|f|` seen anywhere on `[a, b]`); a panel whose
/// error is within that noise over its width is not refined further.
pub fn integrate_with_floor<F>(
    f: &F,
    a: f64,
    b: f64,
    tol: f64,
    breakpoints: &[f64],
    max_panels: usize,
    floor: f64,
) -> Result<QuadratureResult>
where
    F: Fn(f64) -> f64 + ?Sized,
{
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    if !a.is_finite() || !b.is_finite() || a > b {
        return Err(Error::InvalidParameter(format!("bad interval [{a}, {b}]")));
    }
    if a == b {
        return Ok(QuadratureResult::finite(0.0, 0.0, 0));
    }
    let mut cuts: Vec<f64> = breakpoints.iter().copied().filter(|&t| t > a && t < b).collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();

    let mut heap = BinaryHeap::with_capacity(cuts.len() + 16);
    let mut amplitude: f64 = 0.0;
    let mut lo = a;
    for &t in cuts.iter().chain(std::iter::once(&b)) {
        let p = gk15(f, lo, t)?;
        amplitude = amplitude.max(p.fmax);
        heap.push(p);
        lo = t;
    }
    let mut panels = heap.len();
    let mut settled_value = 0.0;
    let mut settled_err = 0.0;
    let mut active_err: f64 = heap.iter().map(|p| p.err).sum();
    let mut active_value: f64 = heap.iter().map(|p| p.value).sum();

    loop {
        let total = active_value + settled_value;
        // relative floor so huge values do not chase an absolute target
        let target = tol.max(4.0 * f64::EPSILON * total.abs());
        if active_err + settled_err <= target || heap.is_empty() {
            break;
        }
        let worst = heap.pop().expect("heap checked non-empty");
        active_err -= worst.err;
        active_value -= worst.value;
        if too_narrow(worst.a, worst.b)
            || worst.err <= 100.0 * f64::EPSILON * worst.resabs
            || worst.err <= floor * amplitude * (worst.b - worst.a)
        {
            settled_value += worst.value;
            settled_err += worst.err;
            continue;
        }
        if panels >= max_panels {
            return Err(Error::MaxSubdivisions { a, b, panels });
        }
        let mid = 0.5 * (worst.a + worst.b);
        let left = gk15(f, worst.a, mid)?;
        let right = gk15(f, mid, worst.b)?;
        amplitude = amplitude.max(left.fmax).max(right.fmax);
        panels += 1;
        active_err += left.err + right.err;
        active_value += left.value + right.value;
        heap.push(left);
        heap.push(right);
        // rebase the running sums now and then to keep cancellation out
        if panels % 4096 == 0 {
            active_err = heap.iter().map(|p| p.err).sum();
            active_value = heap.iter().map(|p| p.value).sum();
        }
    }

    // deterministic left-to-right sum of the final partition
    let mut parts: Vec<Panel> = heap.into_vec();
    parts.sort_by(|p, q| p.a.total_cmp(&q.a));
    let value = parts.iter().map(|p| p.value).sum::<f64>() + settled_value;
    let err = parts.iter().map(|p| p.err).sum::<f64>() + settled_err;
    Ok(QuadratureResult::finite(value, err, panels))
}

/// `int_{x-d}^{x+d} q/r`, split at the pair's breakpoints.
pub fn integrate_qr_window(pair: &CoefficientPair, x: f64, d: f64, tol: f64) -> Result<QuadratureResult> {
    if !(d >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "half-width must be nonnegative, got {d}"
        )));
    }
    mass(pair, x - d, x + d, tol)
}

/// `int_a^b q/r`, split at the pair's breakpoints.
pub fn mass(pair: &CoefficientPair, a: f64, b: f64, tol: f64) -> Result<QuadratureResult> {
    let bps = pair.breakpoints_in(a, b)?;
    integrate_chunked(&|t| pair.density(t), a, b, tol, &bps, pair.noise_floor(a, b))
}

/// Pieces per adaptive call when an interval holds very many breakpoints.
const CHUNK: usize = 4096;

/// [`integrate_finite`] over consecutive runs of at most `CHUNK` pieces, so
/// that intervals with millions of breakpoints never build one huge heap.
pub(crate) fn integrate_chunked<F>(f: &F, a: f64, b: f64, tol: f64, bps: &[f64], floor: f64) -> Result<QuadratureResult>
where
    F: Fn(f64) -> f64 + ?Sized,
{
    if bps.len() <= CHUNK {
        return integrate_with_floor(f, a, b, tol, bps, MAX_PANELS, floor);
    }
    let chunks = bps.len() / CHUNK + 1;
    let share = tol / chunks as f64;
    let mut out = QuadratureResult::finite(0.0, 0.0, 0);
    let mut lo = a;
    for run in bps.chunks(CHUNK) {
        let hi = *run.last().expect("chunks are nonempty");
        let r = integrate_with_floor(f, lo, hi, share, &run[..run.len() - 1], MAX_PANELS, floor)?;
        out.value += r.value;
        out.abs_error_estimate += r.abs_error_estimate;
        out.subdivisions += r.subdivisions;
        lo = hi;
    }
    let r = integrate_with_floor(f, lo, b, share, &[], MAX_PANELS, floor)?;
    out.value += r.value;
    out.abs_error_estimate += r.abs_error_estimate;
    out.subdivisions += r.subdivisions;
    Ok(out)
}

/// `int_a^b w`, split at the pair's breakpoints.
pub fn integrate_on_pair<W: Fn(f64) -> f64>(
    pair: &CoefficientPair,
    w: W,
    a: f64,
    b: f64,
    tol: f64,
) -> Result<QuadratureResult> {
    let bps = pair.breakpoints_in(a, b)?;
    integrate_chunked(&w, a, b, tol, &bps, pair.noise_floor(a, b))
}

/// A half-line seen from its origin: coordinate `s` maps to `t = sign * s`,
/// so both orientations are handled as rightward walks.
#[derive(Clone, Copy)]
pub(crate) struct Side<'a> {
    pub pair: &'a CoefficientPair,
    pub dir: Direction,
}

impl<'a> Side<'a> {
    pub fn new(pair: &'a CoefficientPair, dir: Direction) -> Self {
        Side { pair, dir }
    }

    #[inline]
    pub fn t(&self, s: f64) -> f64 {
        self.dir.sign() * s
    }

    #[inline]
    pub fn s(&self, t: f64) -> f64 {
        self.dir.sign() * t
    }

    #[inline]
    pub fn rho(&self, s: f64) -> f64 {
        self.pair.density(self.t(s))
    }

    /// Next breakpoint strictly greater than `s`.
    pub fn next_breakpoint(&self, s: f64) -> Option<f64> {
        self.pair.next_breakpoint(self.t(s), self.dir).map(|t| self.s(t))
    }

    /// Breakpoints strictly inside `(a, b)` in `s` coordinates, ascending.
    pub fn breakpoints_in(&self, a: f64, b: f64) -> Result<Vec<f64>> {
        Ok(match self.dir {
            Direction::Right => self.pair.breakpoints_in(a, b)?,
            Direction::Left => {
                let mut v: Vec<f64> = self.pair.breakpoints_in(-b, -a)?.into_iter().map(|t| -t).collect();
                v.reverse();
                v
            }
        })
    }

    /// Relative evaluation noise of the pair on `[a, b]` in `s` coordinates.
    pub fn noise_floor(&self, a: f64, b: f64) -> f64 {
        self.pair.noise_floor(self.t(a), self.t(b))
    }

    pub fn mass(&self, a: f64, b: f64, tol: f64) -> Result<QuadratureResult> {
        let bps = self.breakpoints_in(a, b)?;
        integrate_chunked(&|s| self.rho(s), a, b, tol, &bps, self.noise_floor(a, b))
    }

    /// Mass of a stretch known to hold no breakpoint.
    pub fn smooth_mass(&self, a: f64, b: f64, tol: f64) -> Result<QuadratureResult> {
        integrate_with_floor(&|s| self.rho(s), a, b, tol, &[], MAX_PANELS, self.noise_floor(a, b))
    }
}

/// `S[i][j] = int_{-1}^{x_i} l_j(s) ds` for the Lagrange basis `l_j` on the
/// Kronrod nodes. Multiplying sampled densities by `h S` gives the partial
/// masses from the panel start to every node.
fn spectral_integration_matrix() -> &'static [[f64; 15]; 15] {
    static MATRIX: OnceLock<[[f64; 15]; 15]> = OnceLock::new();
    MATRIX.get_or_init(|| {
        let x = reference_nodes();
        let legendre = |t: f64| -> [f64; 17] {
            let mut p = [0.0; 17];
            p[0] = 1.0;
            p[1] = t;
            for k in 1..16 {
                p[k + 1] = ((2 * k + 1) as f64 * t * p[k] - k as f64 * p[k - 1]) / (k + 1) as f64;
            }
            p
        };
        // V[i][k] = P_k(x_i); W[i][k] = int_{-1}^{x_i} P_k
        let mut v = [[0.0; 15]; 15];
        let mut w = [[0.0; 15]; 15];
        for i in 0..15 {
            let p = legendre(x[i]);
            for k in 0..15 {
                v[i][k] = p[k];
                w[i][k] = if k == 0 {
                    x[i] + 1.0
                } else {
                    (p[k + 1] - p[k - 1]) / (2 * k + 1) as f64
                };
            }
        }
        let vinv = invert(v);
        let mut s = [[0.0; 15]; 15];
        for i in 0..15 {
            for j in 0..15 {
                s[i][j] = (0..15).map(|k| w[i][k] * vinv[k][j]).sum();
            }
        }
        s
    })
}

/// Gauss-Jordan inverse with partial pivoting.
fn invert<const N: usize>(m: [[f64; N]; N]) -> [[f64; N]; N] {
    let mut a = m;
    let mut inv = [[0.0; N]; N];
    for (i, row) in inv.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for col in 0..N {
        let piv = (col..N)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .expect("nonempty range");
        a.swap(col, piv);
        inv.swap(col, piv);
        let d = a[col][col];
        for k in 0..N {
            a[col][k] /= d;
            inv[col][k] /= d;
        }
        for r in 0..N {
            if r != col {
                let factor = a[r][col];
                if factor != 0.0 {
                    for k in 0..N {
                        a[r][k] -= factor * a[col][k];
                        inv[r][k] -= factor * inv[col][k];
                    }
                }
            }
        }
    }
    inv
}

/// `int_a^b w(s) exp(-nu int_a^s rho)` over an interval together with the
/// mass `int_a^b rho`.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct Damped {
    pub value: f64,
    pub err: f64,
    pub mass: f64,
    pub mass_err: f64,
    /// Largest `|w|` seen at the quadrature nodes.
    pub w_sup: f64,
    pub panels: usize,
}

struct DampedPanel {
    value: f64,
    err: f64,
    resabs: f64,
    mass: f64,
    mass_err: f64,
    w_sup: f64,
    rho_sup: f64,
}

fn damped_panel<R, W>(rho: &R, w: &W, a: f64, b: f64, nu: f64) -> Result<DampedPanel>
where
    R: Fn(f64) -> f64 + ?Sized,
    W: Fn(f64) -> f64 + ?Sized,
{
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let nodes = reference_nodes();
    let s = spectral_integration_matrix();
    let mut rv = [0.0; 15];
    let mut wv = [0.0; 15];
    let mut w_sup: f64 = 0.0;
    let mut rho_sup: f64 = 0.0;
    for i in 0..15 {
        let t = c + h * nodes[i];
        let (r, wi) = (rho(t), w(t));
        if !r.is_finite() {
            return Err(Error::NonFinite { at: t });
        }
        if !wi.is_finite() {
            return Err(Error::NonFinite { at: t });
        }
        rv[i] = r;
        wv[i] = wi;
        w_sup = w_sup.max(wi.abs());
        rho_sup = rho_sup.max(r.abs());
    }
    let (mass, mass_err, _) = rule_on_values(&rv, h);
    let mut gv = [0.0; 15];
    for i in 0..15 {
        let partial: f64 = h * (0..15).map(|j| s[i][j] * rv[j]).sum::<f64>();
        gv[i] = wv[i] * (-nu * partial.max(0.0)).exp();
    }
    let (value, err, resabs) = rule_on_values(&gv, h);
    // error in the partial masses feeds the exponent
    let err = err + nu * mass_err * resabs;
    Ok(DampedPanel {
        value,
        err,
        resabs,
        mass,
        mass_err,
        w_sup,
        rho_sup,
    })
}

/// Damped integral over `[a, b]` (in the coordinate of `rho` and `w`), split at `cuts`.
///
/// Panels are processed left to right so the running mass is available for
/// the damping factor of each panel.
#[allow(clippy::too_many_arguments)]
pub(crate) fn damped_interval<R, W>(
    rho: &R,
    w: &W,
    a: f64,
    b: f64,
    cuts: &[f64],
    nu: f64,
    tol: f64,
    floor: f64,
) -> Result<Damped>
where
    R: Fn(f64) -> f64 + ?Sized,
    W: Fn(f64) -> f64 + ?Sized,
{
    let mut out = Damped::default();
    if !(b > a) {
        return Ok(out);
    }
    let density = tol / (b - a);
    let mut stack: Vec<(f64, f64)> = Vec::new();
    let (mut w_amp, mut rho_amp): (f64, f64) = (0.0, 0.0);
    let mut ends: Vec<f64> = cuts.iter().copied().filter(|&t| t > a && t < b).collect();
    ends.push(b);
    let mut lo = a;
    for &hi in &ends {
        stack.push((lo, hi));
        while let Some((pa, pb)) = stack.pop() {
            let p = damped_panel(rho, w, pa, pb, nu)?;
            let damp = (-nu * out.mass).exp();
            let local = density * (pb - pa);
            w_amp = w_amp.max(p.w_sup);
            rho_amp = rho_amp.max(p.rho_sup);
            let width = pb - pa;
            let value_ok =
                damp * p.err <= local || p.err <= 100.0 * f64::EPSILON * p.resabs || p.err <= floor * w_amp * width;
            let mass_ok = p.mass_err <= 1e-11 * width / (b - a)
                || p.mass_err <= 100.0 * f64::EPSILON * p.mass.abs()
                || p.mass_err <= floor * rho_amp * width;
            if (value_ok && mass_ok) || too_narrow(pa, pb) {
                out.value += damp * p.value;
                out.err += damp * p.err;
                out.mass += p.mass;
                out.mass_err += p.mass_err;
                out.w_sup = out.w_sup.max(p.w_sup);
                out.panels += 1;
                continue;
            }
            if out.panels + stack.len() >= MAX_PANELS {
                return Err(Error::MaxSubdivisions {
                    a,
                    b,
                    panels: out.panels + stack.len(),
                });
            }
            let mid = 0.5 * (pa + pb);
            stack.push((mid, pb));
            stack.push((pa, mid));
        }
        lo = hi;
    }
    Ok(out)
}

/// `int_x^inf w(t) exp(-nu int_x^t q/r) dt` (direction right) or
/// `int_{-inf}^x w(t) exp(-nu int_t^x q/r) dt` (direction left).
///
/// The half-line is walked along a covering by segments of mass 2; the walk
/// stops once the geometric bound on the remaining segments drops below the
/// tolerance. `tol` is absolute for results of order one and relative to the
/// first segment's contribution for smaller results.
pub fn damped_integral<W>(
    pair: &CoefficientPair,
    w: W,
    x: f64,
    dir: Direction,
    nu: f64,
    tol: f64,
) -> Result<QuadratureResult>
where
    W: Fn(f64) -> f64,
{
    damped_integral_with_cuts(pair, w, &[], x, dir, nu, tol)
}

/// [`damped_integral`] with extra points (in `t`) where `w` may jump.
pub fn damped_integral_with_cuts<W>(
    pair: &CoefficientPair,
    w: W,
    extra_cuts: &[f64],
    x: f64,
    dir: Direction,
    nu: f64,
    tol: f64,
) -> Result<QuadratureResult>
where
    W: Fn(f64) -> f64,
{
    if !(nu > 0.0) || !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "need nu > 0 and tol > 0, got nu = {nu}, tol = {tol}"
        )));
    }
    let side = Side::new(pair, dir);
    let ws = |s: f64| w(side.t(s));
    let rho = |s: f64| side.rho(s);
    let ratio = (-2.0 * nu).exp();

    let mut start = side.s(x);
    let mut acc_mass = 0.0;
    let mut value = 0.0;
    let mut err = 0.0;
    let mut panels = 0;
    let mut b_max: f64 = 0.0;
    let mut scale = None;
    let mut last_terms: Vec<f64> = Vec::new();

    for n in 1..=MAX_SEGMENTS {
        let len = mass_walk(&side, start, 2.0, 1e-8, WALK_LIMIT).map_err(|e| match e {
            Error::BracketExhausted { .. } => Error::TailNotDecaying { x, segments: n - 1 },
            e => e,
        })?;
        let end = start + len;
        let damp = (-nu * acc_mass).exp();
        let seg_tol = match scale {
            None => {
                let probe = ws(start).abs().max(ws(end).abs()).max(ws(0.5 * (start + end)).abs());
                tol * (probe * len).clamp(f64::MIN_POSITIVE, 1.0)
            }
            Some(s) => tol * s * 0.5f64.powi(n.min(60) as i32) / damp.max(f64::MIN_POSITIVE),
        };
        let mut cuts = side.breakpoints_in(start, end)?;
        let before = cuts.len();
        cuts.extend(extra_cuts.iter().map(|&t| side.s(t)).filter(|&c| c > start && c < end));
        if cuts.len() > before {
            cuts.sort_by(f64::total_cmp);
            cuts.dedup();
        }
        let floor = side.noise_floor(start, end);
        let piece = damped_interval(&rho, &ws, start, end, &cuts, nu, 0.5 * seg_tol, floor)?;
        value += damp * piece.value;
        err += damp * piece.err;
        panels += piece.panels;
        acc_mass += piece.mass;
        let b_n = piece.w_sup * len;
        b_max = b_max.max(b_n);
        if scale.is_none() {
            scale = Some(value.abs().clamp(f64::MIN_POSITIVE, 1.0));
        }
        let target = tol * scale.unwrap_or(1.0);
        let next_damp = (-nu * acc_mass).exp();
        let term = b_n * damp;
        last_terms.push(term);
        let tail = b_max * next_damp / (1.0 - ratio);
        let decreasing = last_terms.len() < 2 || term <= last_terms[last_terms.len() - 2] * 1.0001 || next_damp == 0.0;
        // an integrand that has been zero so far proves nothing about the rest
        if next_damp == 0.0 || (b_max > 0.0 && tail < target && decreasing) {
            return Ok(QuadratureResult {
                value,
                abs_error_estimate: err,
                subdivisions: panels,
                truncation_point: Some(side.t(end)),
                truncation_bound: Some(tail),
            });
        }
        // terms that keep growing mean the kernel outruns the damping
        if last_terms.len() >= 64 {
            let k = last_terms.len();
            if (k - 32..k).all(|i| last_terms[i] >= last_terms[i - 1]) {
                return Err(Error::TailNotDecaying { x, segments: n });
            }
        }
        start = end;
    }
    Err(Error::TailNotDecaying {
        x,
        segments: MAX_SEGMENTS,
    })
}

/// Integrates a full kernel (which already contains the damping factor)
/// along a prebuilt covering chain, stopping once the certified tail from
/// the next segment on falls below `tol`.
pub fn integrate_semiinfinite_with_covering<K, B>(
    kernel: K,
    chain: &CoveringChain,
    nu: f64,
    segment_bound: B,
    tol: f64,
) -> Result<QuadratureResult>
where
    K: Fn(f64) -> f64,
    B: Fn(&Segment) -> f64,
{
    let mut value = 0.0;
    let mut err = 0.0;
    let mut panels = 0;
    for (i, seg) in chain.segments.iter().enumerate() {
        let bps = chain_breakpoints(chain, seg.lo, seg.hi);
        let r = integrate_finite(
            &kernel,
            seg.lo,
            seg.hi,
            0.25 * tol * 0.5f64.powi(i.min(60) as i32),
            &bps,
        )?;
        value += r.value;
        err += r.abs_error_estimate;
        panels += r.subdivisions;
        let cert = tail_certificate(chain, nu, &segment_bound, i + 2)?;
        if cert < tol {
            return Ok(QuadratureResult {
                value,
                abs_error_estimate: err,
                subdivisions: panels,
                truncation_point: Some(seg.far_end(chain.direction)),
                truncation_bound: Some(cert),
            });
        }
    }
    Err(Error::TailNotDecaying {
        x: chain.origin,
        segments: chain.segments.len(),
    })
}

fn chain_breakpoints(chain: &CoveringChain, lo: f64, hi: f64) -> Vec<f64> {
    chain
        .breakpoints
        .iter()
        .copied()
        .filter(|&t| t > lo && t < hi)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covering::build_covering;
    use proptest::prelude::*;

    fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
        let n = n + n % 2;
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(a + i as f64 * h);
        }
        s * h / 3.0
    }

    #[test]
    fn constant_and_exponential() {
        let r = integrate_finite(|_| 1.0, 0.0, 2.0, 1e-12, &[]).unwrap();
        assert!((r.value - 2.0).abs() < 1e-14);
        let r = integrate_finite(|t: f64| (-t).exp(), 0.0, 1.0, 1e-12, &[]).unwrap();
        assert!((r.value - (1.0 - (-1f64).exp())).abs() < 1e-14);
        assert!(r.abs_error_estimate <= 1e-12);
    }

    #[test]
    fn oscillatory_with_breakpoints_matches_dense_simpson() {
        let f = |t: f64| (2.0 * t).exp().cos();
        let h = crate::coefficients::OscillationHint::new(2.0);
        let bps = h.points_in(0.0, 3.0);
        let r = integrate_finite(f, 0.0, 3.0, 1e-11, &bps).unwrap();
        // dense oracle, piecewise between the same sign changes to keep Simpson accurate
        let mut edges = vec![0.0];
        edges.extend(bps.iter().copied());
        edges.push(3.0);
        let oracle: f64 = edges.windows(2).map(|w| simpson(f, w[0], w[1], 400)).sum();
        assert!((r.value - oracle).abs() < 1e-8, "{} vs {}", r.value, oracle);
        assert!(r.abs_error_estimate <= 1e-11);
    }

    #[test]
    fn kink_and_jump_are_resolved() {
        let r = integrate_finite(|t: f64| t.abs(), -1.0, 2.0, 1e-12, &[0.0]).unwrap();
        assert!((r.value - 2.5).abs() < 1e-14);
        let r = integrate_finite(|t: f64| if t < 0.3 { 1.0 } else { 0.0 }, 0.0, 1.0, 1e-9, &[]).unwrap();
        assert!((r.value - 0.3).abs() < 1e-9);
    }

    #[test]
    fn non_finite_integrand_is_rejected() {
        let e = integrate_finite(|t: f64| 1.0 / t, -1.0, 1.0, 1e-10, &[]).unwrap_err();
        assert!(matches!(e, Error::NonFinite { .. }));
        assert!(integrate_finite(|_| 1.0, 1.0, 0.0, 1e-10, &[]).is_err());
    }

    #[test]
    fn subdivision_budget() {
        let f = |t: f64| (1.0 / t.max(1e-300)).sin();
        let e = integrate_finite_with_budget(&f, 1e-12, 1.0, 1e-14, &[], 50).unwrap_err();
        assert!(matches!(e, Error::MaxSubdivisions { .. }));
    }

    #[test]
    fn window_mass() {
        let id = CoefficientPair::make_constant(1.0, 1.0).unwrap();
        assert!((integrate_qr_window(&id, 0.0, 1.0, 1e-12).unwrap().value - 2.0).abs() < 1e-14);
        assert!((integrate_qr_window(&id, 7.0, 0.25, 1e-12).unwrap().value - 0.5).abs() < 1e-14);
        let p = CoefficientPair::make_exp_osc(0.0, 1.0, 2.0).unwrap();
        let got = integrate_qr_window(&p, 0.0, 0.5, 1e-12).unwrap().value;
        let oracle = 2.0 * simpson(|t| p.density(t), 0.0, 0.5, 200_000);
        assert!((got - oracle).abs() < 1e-8, "{got} vs {oracle}");
    }

    #[test]
    fn spectral_matrix_integrates_polynomials() {
        let s = spectral_integration_matrix();
        let x = reference_nodes();
        for i in 0..15 {
            let row: f64 = (0..15).map(|j| s[i][j]).sum();
            assert!((row - (x[i] + 1.0)).abs() < 1e-13);
            let cubic: f64 = (0..15).map(|j| s[i][j] * x[j].powi(3)).sum();
            assert!((cubic - (x[i].powi(4) - 1.0) / 4.0).abs() < 1e-13);
        }
    }

    #[test]
    fn damped_interval_closed_form() {
        // int_0^L e^{-nu t} dt with rho = 1
        let d = damped_interval(&|_| 1.0, &|_| 1.0, 0.0, 2.0, &[], 1.5, 1e-13, 0.0).unwrap();
        assert!((d.value - (1.0 - (-3.0f64).exp()) / 1.5).abs() < 1e-13);
        assert!((d.mass - 2.0).abs() < 1e-14);
        // rho = 2t gives int_0^1 t e^{-t^2} dt = (1 - e^{-1}) / 2
        let d = damped_interval(&|t| 2.0 * t, &|t| t, 0.0, 1.0, &[], 1.0, 1e-13, 0.0).unwrap();
        assert!((d.value - 0.5 * (1.0 - (-1f64).exp())).abs() < 1e-12);
    }

    #[test]
    fn damped_integral_identity_pair() {
        let id = CoefficientPair::make_constant(1.0, 1.0).unwrap();
        for (nu, want) in [(1.0, 1.0), (2.0, 0.5), (0.5, 2.0)] {
            let r = damped_integral(&id, |_| 1.0, 3.0, Direction::Right, nu, 1e-10).unwrap();
            assert!((r.value - want).abs() < 1e-9, "nu={nu}: {}", r.value);
            let l = damped_integral(&id, |_| 1.0, -3.0, Direction::Left, nu, 1e-10).unwrap();
            assert!((l.value - want).abs() < 1e-9);
            assert!(r.truncation_bound.unwrap() < 1e-9);
        }
        // weight e^{t}: int_x^inf e^{t} e^{-2(t-x)} dt = e^{x}
        let r = damped_integral(&id, |t: f64| t.exp(), 1.0, Direction::Right, 2.0, 1e-10).unwrap();
        assert!((r.value - 1f64.exp()).abs() < 1e-9 * 1f64.exp());
    }

    #[test]
    fn damped_integral_diverges_without_mass() {
        let z = CoefficientPair::make_constant(2.0, 0.0).unwrap();
        let e = damped_integral(&z, |_| 1.0, 0.0, Direction::Right, 1.0, 1e-10).unwrap_err();
        assert!(e.signals_divergence());
        let id = CoefficientPair::make_constant(1.0, 1.0).unwrap();
        // e^{2t} grows faster than the damping e^{-t}
        let e = damped_integral(&id, |t: f64| (2.0 * t).exp(), 0.0, Direction::Right, 1.0, 1e-10).unwrap_err();
        assert!(e.signals_divergence(), "{e:?}");
    }

    #[test]
    fn semiinfinite_with_covering_identity() {
        let id = CoefficientPair::make_constant(1.0, 1.0).unwrap();
        let chain = build_covering(&id, 0.0, Direction::Right, &|_| 1.0, 40, 1e6).unwrap();
        let r = integrate_semiinfinite_with_covering(|t: f64| (-t).exp(), &chain, 1.0, |s| s.length(), 1e-10).unwrap();
        assert!((r.value - 1.0).abs() < 1e-10);
        assert!(r.truncation_bound.unwrap() < 1e-10);
        let segs = (r.truncation_point.unwrap() / 2.0).round() as usize;
        assert!((11..=14).contains(&segs), "{segs}");
        let r = integrate_semiinfinite_with_covering(|t: f64| (-2.0 * t).exp(), &chain, 2.0, |s| s.length(), 1e-10)
            .unwrap();
        assert!((r.value - 0.5).abs() < 1e-10);
        let r = integrate_semiinfinite_with_covering(|_| 0.0, &chain, 1.0, |_| 0.0, 1e-10).unwrap();
        assert_eq!(r.value, 0.0);
        assert_eq!(r.truncation_bound, Some(0.0));
    }

    #[test]
    fn tail_bound_dominates_true_tail() {
        use rand::{Rng, SeedableRng};
        let id = CoefficientPair::make_constant(1.0, 1.0).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let x: f64 = rng.gen_range(-20.0..20.0);
            let nu: f64 = rng.gen_range(0.3..3.0);
            let r = damped_integral(&id, |_| 1.0, x, Direction::Right, nu, 1e-8).unwrap();
            let cut = r.truncation_point.unwrap();
            let true_tail = (-nu * (cut - x)).exp() / nu;
            assert!(r.truncation_bound.unwrap() >= true_tail, "x={x} nu={nu}");
        }
    }

    fn poly(c: &[f64], t: f64) -> f64 {
        c.iter().rev().fold(0.0, |acc, &k| acc * t + k)
    }

    proptest! {
        #[test]
        fn linearity(
            f in proptest::collection::vec(-3.0f64..3.0, 1..6),
            g in proptest::collection::vec(-3.0f64..3.0, 1..6),
            a in -2.0f64..2.0, b in -2.0f64..2.0,
        ) {
            let i = |h: &dyn Fn(f64) -> f64| integrate_finite(h, -1.0, 2.0, 1e-12, &[]).unwrap();
            let lhs = i(&|t| a * poly(&f, t) + b * poly(&g, t));
            let (rf, rg) = (i(&|t| poly(&f, t)), i(&|t| poly(&g, t)));
            let bound = lhs.abs_error_estimate + a.abs() * rf.abs_error_estimate + b.abs() * rg.abs_error_estimate + 1e-12;
            prop_assert!((lhs.value - (a * rf.value + b * rg.value)).abs() <= bound);
        }

        #[test]
        fn interval_additivity(a in -3.0f64..0.0, m in 0.0f64..1.0, c in 1.0f64..4.0) {
            let f = |t: f64| (3.0 * t).sin() * (-t * t).exp() + t.abs();
            let whole = integrate_finite(f, a, c, 1e-12, &[0.0]).unwrap();
            let left = integrate_finite(f, a, m, 1e-12, &[0.0]).unwrap();
            let right = integrate_finite(f, m, c, 1e-12, &[0.0]).unwrap();
            let bound = whole.abs_error_estimate + left.abs_error_estimate + right.abs_error_estimate + 1e-12;
            prop_assert!((whole.value - left.value - right.value).abs() <= bound);
        }
    }

    #[test]
    fn cosine_of_exponential_accuracy_far_out() {
        // the density of ExpOsc(0,0,1) on a window far out
        let p = CoefficientPair::make_exp_osc(0.0, 0.0, 1.0).unwrap();
        let (a, b) = (8.0, 8.01);
        let got = mass(&p, a, b, 1e-12).unwrap().value;
        let h = crate::coefficients::OscillationHint::new(1.0);
        let mut edges = vec![a];
        edges.extend(h.points_in(a, b));
        edges.push(b);
        let oracle: f64 = edges
            .windows(2)
            .map(|w| simpson(|t| p.density(t), w[0], w[1], 200))
            .sum();
        assert!((got - oracle).abs() < 1e-9, "{got} {oracle}");
        assert!(got > 0.0 && got < 2.0 * (b - a) + 1e-12);
    }
}
