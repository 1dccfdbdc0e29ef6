//! The coefficient pair `(r, q)` of `-r y' + q y = f`.
//!
//! Every preset is a function of `|x|`, so all presets are even and carry a
//! derivative kink at the origin, which is registered as a breakpoint.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::Direction;

pub type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Largest value of `e^{gamma |t|}` whose cosine is still meaningful in `f64`.
const PHASE_LIMIT: f64 = 1e12;
/// Oscillation pieces we are willing to integrate inside one localization window.
const LOCAL_PIECE_BUDGET: f64 = 2e5;
/// Oscillation pieces we are willing to integrate along `[0, X]`.
const GLOBAL_PIECE_BUDGET: f64 = 2e6;
/// Most breakpoints handed out for a single interval.
pub const MAX_BREAKPOINTS: usize = 4_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CoefficientKind {
    Constant { r0: f64, q0: f64 },
    SinePower { theta: f64 },
    ExpOsc { alpha: f64, beta: f64, gamma: f64 },
    UserDefined,
}

/// Sign-change points of `cos(e^{gamma |t|})`, i.e. `e^{gamma |t|} = (k + 1/2) pi`,
/// together with their mirror images.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OscillationHint {
    gamma: f64,
}

impl OscillationHint {
    pub fn new(gamma: f64) -> Self {
        OscillationHint { gamma }
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// `t_k = ln((k + 1/2) pi) / gamma`.
    fn zero(&self, k: f64) -> f64 {
        ((k + 0.5) * PI).ln() / self.gamma
    }

    /// Smallest nonnegative zero strictly greater than `s` (s >= 0).
    fn next_zero_above(&self, s: f64) -> Option<f64> {
        let u = (self.gamma * s).exp();
        if !u.is_finite() {
            return None;
        }
        let mut k = (u / PI - 0.5).floor().max(-1.0) + 1.0;
        let mut t = self.zero(k);
        while t <= s {
            k += 1.0;
            t = self.zero(k);
        }
        Some(t)
    }

    /// Largest zero strictly below `s` among the nonnegative zeros, if any (s > 0).
    fn prev_zero_below(&self, s: f64) -> Option<f64> {
        let u = (self.gamma * s).exp();
        if !u.is_finite() {
            return None;
        }
        let mut k = (u / PI - 0.5).ceil() - 1.0;
        if k < 0.0 {
            return None;
        }
        let mut t = self.zero(k);
        while t >= s {
            k -= 1.0;
            if k < 0.0 {
                return None;
            }
            t = self.zero(k);
        }
        Some(t)
    }

    /// Next sign-change point strictly beyond `t` in the given direction.
    pub fn next(&self, t: f64, dir: Direction) -> Option<f64> {
        match dir {
            Direction::Right => {
                if t < 0.0 {
                    match self.prev_zero_below(-t) {
                        Some(z) => Some(-z),
                        None => self.next_zero_above(0.0),
                    }
                } else {
                    self.next_zero_above(t)
                }
            }
            Direction::Left => self.next(-t, Direction::Right).map(|z| -z),
        }
    }

    /// Upper estimate of the number of sign changes inside `(a, b)`.
    pub fn count_in(&self, a: f64, b: f64) -> f64 {
        let side = |lo: f64, hi: f64| -> f64 {
            // zeros with lo < |t| < hi, 0 <= lo <= hi
            if hi <= lo {
                0.0
            } else {
                ((self.gamma * hi).exp() - (self.gamma * lo).exp()) / PI + 2.0
            }
        };
        if a >= 0.0 {
            side(a, b)
        } else if b <= 0.0 {
            side(-b, -a)
        } else {
            side(0.0, -a) + side(0.0, b)
        }
    }

    /// All sign-change points inside `(a, b)`, ascending.
    pub fn points_in(&self, a: f64, b: f64) -> Vec<f64> {
        let mut out = Vec::new();
        let mut t = a;
        while let Some(z) = self.next(t, Direction::Right) {
            if z >= b {
                break;
            }
            out.push(z);
            t = z;
        }
        out
    }

    /// Zeros of `1 + cos(e^{gamma |t|})` inside `[a, b]`, i.e. `e^{gamma |t|} = (2k+1) pi`.
    /// At most `max_count` points per side are returned, the ones nearest the origin first.
    pub fn q_zero_nodes_in(&self, a: f64, b: f64, max_count: usize) -> Vec<f64> {
        let mut out = Vec::new();
        for sign in [-1.0, 1.0] {
            for k in 0..max_count {
                let t = ((2 * k + 1) as f64 * PI).ln() / self.gamma;
                if !(t * self.gamma).exp().is_finite() || (t * self.gamma) > PHASE_LIMIT.ln() {
                    break;
                }
                let x = sign * t;
                if x > b && sign > 0.0 || x < a && sign < 0.0 {
                    break;
                }
                if x >= a && x <= b {
                    out.push(x);
                }
            }
        }
        out.sort_by(f64::total_cmp);
        out
    }
}

/// The pair `(r, q)` with evaluation closures and regularity metadata.
///
/// Immutable after construction and cheap to clone.
#[derive(Clone)]
pub struct CoefficientPair {
    r: RealFn,
    q: RealFn,
    density: RealFn,
    kind: CoefficientKind,
    hint: Option<OscillationHint>,
    kinks: Vec<f64>,
    q_continuous: bool,
    user_split: Option<(RealFn, RealFn)>,
    label: String,
}

impl fmt::Debug for CoefficientPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoefficientPair")
            .field("label", &self.label)
            .field("kind", &self.kind)
            .field("hint", &self.hint)
            .finish()
    }
}

fn arc<F: Fn(f64) -> f64 + Send + Sync + 'static>(f: F) -> RealFn {
    Arc::new(f)
}

impl CoefficientPair {
    /// `r == r0`, `q == q0`.
    pub fn make_constant(r0: f64, q0: f64) -> Result<Self> {
        if !(r0 > 0.0) || !r0.is_finite() {
            return Err(Error::InvalidParameter(format!("r0 must be positive, got {r0}")));
        }
        if !(q0 >= 0.0) || !q0.is_finite() {
            return Err(Error::InvalidParameter(format!("q0 must be nonnegative, got {q0}")));
        }
        let ratio = q0 / r0;
        Ok(CoefficientPair {
            r: arc(move |_| r0),
            q: arc(move |_| q0),
            density: arc(move |_| ratio),
            kind: CoefficientKind::Constant { r0, q0 },
            hint: None,
            kinks: Vec::new(),
            q_continuous: true,
            user_split: None,
            label: format!("constant(r0={r0}, q0={q0})"),
        })
    }

    /// `r = e^{alpha |x|}`, `q = e^{beta |x|} (1 + cos e^{gamma |x|})`.
    pub fn make_exp_osc(alpha: f64, beta: f64, gamma: f64) -> Result<Self> {
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(Error::InvalidParameter(format!("gamma must be positive, got {gamma}")));
        }
        if !alpha.is_finite() || !beta.is_finite() {
            return Err(Error::InvalidParameter("alpha and beta must be finite".into()));
        }
        let theta = beta - alpha;
        Ok(CoefficientPair {
            r: arc(move |x| (alpha * x.abs()).exp()),
            q: arc(move |x| {
                let ax = x.abs();
                (beta * ax).exp() * (1.0 + (gamma * ax).exp().cos())
            }),
            density: arc(move |x| {
                let ax = x.abs();
                (theta * ax).exp() * (1.0 + (gamma * ax).exp().cos())
            }),
            kind: CoefficientKind::ExpOsc { alpha, beta, gamma },
            hint: Some(OscillationHint::new(gamma)),
            kinks: vec![0.0],
            q_continuous: true,
            user_split: None,
            label: format!("exp_osc(alpha={alpha}, beta={beta}, gamma={gamma})"),
        })
    }

    /// `r == 1`, `q = 1 + sin(|x|^theta)`.
    pub fn make_sine_power(theta: f64) -> Result<Self> {
        if !(theta > 0.0) || !theta.is_finite() {
            return Err(Error::InvalidParameter(format!("theta must be positive, got {theta}")));
        }
        let q = arc(move |x: f64| 1.0 + x.abs().powf(theta).sin());
        Ok(CoefficientPair {
            r: arc(|_| 1.0),
            q: q.clone(),
            density: q,
            kind: CoefficientKind::SinePower { theta },
            hint: None,
            kinks: vec![0.0],
            q_continuous: true,
            user_split: None,
            label: format!("sine_power(theta={theta})"),
        })
    }

    /// A user-defined pair from closures. `r` and `q` are spot-checked for
    /// positivity and nonnegativity on `[-50, 50]`.
    pub fn from_fns<R, Q>(label: &str, r: R, q: Q) -> Result<Self>
    where
        R: Fn(f64) -> f64 + Send + Sync + 'static,
        Q: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let r = arc(r);
        let q = arc(q);
        let (rr, qq) = (r.clone(), q.clone());
        let pair = CoefficientPair {
            r,
            q,
            density: arc(move |x| qq(x) / rr(x)),
            kind: CoefficientKind::UserDefined,
            hint: None,
            kinks: vec![0.0],
            q_continuous: true,
            user_split: None,
            label: label.to_string(),
        };
        pair.spot_check()?;
        Ok(pair)
    }

    /// A user-defined pair from expression strings in `x`.
    pub fn from_exprs(r_src: &str, q_src: &str) -> Result<Self> {
        let r = Expr::parse(r_src)?;
        let q = Expr::parse(q_src)?;
        Self::from_fns(
            &format!("expr(r={r_src}, q={q_src})"),
            move |x| r.eval(x),
            move |x| q.eval(x),
        )
    }

    /// Attach user-provided parts with `q = q1 + q2`, used by [`split_for_thm28`].
    pub fn with_split<A, B>(mut self, q1: A, q2: B) -> Self
    where
        A: Fn(f64) -> f64 + Send + Sync + 'static,
        B: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        self.user_split = Some((arc(q1), arc(q2)));
        self
    }

    /// The pair `(c r, c q)`. The density `q / r` is unchanged.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c > 0.0) || !c.is_finite() {
            return Err(Error::InvalidParameter(format!("scale must be positive, got {c}")));
        }
        let (r, q) = (self.r.clone(), self.q.clone());
        let user_split = self.user_split.as_ref().map(|(a, b)| {
            let (a, b) = (a.clone(), b.clone());
            (arc(move |x| c * a(x)), arc(move |x| c * b(x)))
        });
        Ok(CoefficientPair {
            r: arc(move |x| c * r(x)),
            q: arc(move |x| c * q(x)),
            density: self.density.clone(),
            kind: CoefficientKind::UserDefined,
            hint: self.hint,
            kinks: self.kinks.clone(),
            q_continuous: self.q_continuous,
            user_split,
            label: format!("{c} * {}", self.label),
        })
    }

    fn spot_check(&self) -> Result<()> {
        for i in 0..=2000 {
            let x = -50.0 + 0.05 * i as f64;
            let (r, q) = (self.r(x), self.q(x));
            if !(r > 0.0) || !r.is_finite() {
                return Err(Error::InvalidCoefficient {
                    x,
                    reason: format!("r = {r} is not positive and finite"),
                });
            }
            if !(q >= 0.0) || !q.is_finite() {
                return Err(Error::InvalidCoefficient {
                    x,
                    reason: format!("q = {q} is not nonnegative and finite"),
                });
            }
        }
        Ok(())
    }

    #[inline]
    pub fn r(&self, x: f64) -> f64 {
        (self.r)(x)
    }

    #[inline]
    pub fn q(&self, x: f64) -> f64 {
        (self.q)(x)
    }

    /// `q(x) / r(x)`, evaluated without forming the two factors separately
    /// for the presets.
    #[inline]
    pub fn density(&self, x: f64) -> f64 {
        (self.density)(x)
    }

    pub fn kind(&self) -> CoefficientKind {
        self.kind
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn oscillation_hint(&self) -> Option<&OscillationHint> {
        self.hint.as_ref()
    }

    pub fn q_is_continuous(&self) -> bool {
        self.q_continuous
    }

    /// Points where `r` or `q` may have a derivative jump.
    pub fn kinks(&self) -> &[f64] {
        &self.kinks
    }

    /// Kinks and oscillation sign changes strictly inside `(a, b)`, ascending.
    ///
    /// Fails when the interval holds more than [`MAX_BREAKPOINTS`] points,
    /// which only happens far outside the numeric range of oscillating pairs.
    pub fn breakpoints_in(&self, a: f64, b: f64) -> Result<Vec<f64>> {
        let mut out: Vec<f64> = self.kinks.iter().copied().filter(|&k| k > a && k < b).collect();
        if let Some(h) = &self.hint {
            let estimate = h.count_in(a, b);
            if estimate > MAX_BREAKPOINTS as f64 {
                return Err(Error::MaxSubdivisions {
                    a,
                    b,
                    panels: estimate.min(usize::MAX as f64) as usize,
                });
            }
            out.extend(h.points_in(a, b));
        }
        out.sort_by(f64::total_cmp);
        out.dedup();
        Ok(out)
    }

    /// The next kink or oscillation sign change strictly beyond `t`.
    pub fn next_breakpoint(&self, t: f64, dir: Direction) -> Option<f64> {
        let ahead = |k: f64| match dir {
            Direction::Right => k > t,
            Direction::Left => k < t,
        };
        let kink = self
            .kinks
            .iter()
            .copied()
            .filter(|&k| ahead(k))
            .min_by(|a, b| (dir.sign() * a).total_cmp(&(dir.sign() * b)));
        let osc = self.hint.as_ref().and_then(|h| h.next(t, dir));
        match (kink, osc) {
            (Some(a), Some(b)) => Some(if dir.sign() * a < dir.sign() * b { a } else { b }),
            (a, b) => a.or(b),
        }
    }

    /// Largest `|x|` at which local functionals (window integrals, kernel
    /// integrals over a few localization widths) stay affordable and
    /// meaningful in double precision.
    pub fn numeric_limit(&self) -> f64 {
        match self.hint {
            None => match self.kind {
                CoefficientKind::SinePower { theta } if theta > 1.0 => {
                    // phase |x|^theta must stay resolvable
                    PHASE_LIMIT
                        .powf(1.0 / theta)
                        .min(LOCAL_PIECE_BUDGET.powf(1.0 / (theta - 1.0)))
                }
                _ => f64::INFINITY,
            },
            Some(h) => {
                let gamma = h.gamma();
                let mut limit = PHASE_LIMIT.ln() / gamma;
                if let CoefficientKind::ExpOsc { alpha, beta, .. } = self.kind {
                    let theta = beta - alpha;
                    if gamma > theta {
                        let pieces = (LOCAL_PIECE_BUDGET * PI / (2.0 * gamma)).ln() / (gamma - theta);
                        limit = limit.min(pieces.max(1.0));
                    }
                    let growth = alpha.abs().max(beta.abs());
                    if growth > 0.0 {
                        limit = limit.min(600.0 / growth);
                    }
                }
                limit
            }
        }
    }

    /// Largest `|x|` at which a window `[x - a, x + a]` stays affordable.
    pub fn window_limit(&self, a: f64) -> f64 {
        match self.hint {
            None => self.numeric_limit(),
            Some(h) => ((LOCAL_PIECE_BUDGET * PI).ln() / h.gamma() - a).min(self.numeric_limit()),
        }
    }

    /// Relative evaluation noise of `q/r` on `[a, b]`: a phase `P(t)` carries
    /// roundoff of about `eps * (P + |t P'|)`, counting the rounding of `t`
    /// itself.
    pub fn noise_floor(&self, a: f64, b: f64) -> f64 {
        let m = a.abs().max(b.abs());
        let phase = match (self.hint, self.kind) {
            (Some(h), _) => (h.gamma() * m).exp() * (1.0 + h.gamma() * m),
            (None, CoefficientKind::SinePower { theta }) => m.powf(theta) * (1.0 + theta),
            _ => 0.0,
        };
        16.0 * f64::EPSILON * phase
    }

    /// Largest `X` for which `int_0^X q/r` can be integrated as a whole.
    pub fn global_limit(&self) -> f64 {
        match self.hint {
            None => self.numeric_limit(),
            Some(h) => {
                // the local piece budget does not apply to whole-line integrals
                let gamma = h.gamma();
                let mut limit = (GLOBAL_PIECE_BUDGET * PI).ln().min(PHASE_LIMIT.ln()) / gamma;
                if let CoefficientKind::ExpOsc { alpha, beta, .. } = self.kind {
                    let growth = alpha.abs().max(beta.abs());
                    if growth > 0.0 {
                        limit = limit.min(600.0 / growth);
                    }
                }
                limit
            }
        }
    }

    pub(crate) fn user_split(&self) -> Option<&(RealFn, RealFn)> {
        self.user_split.as_ref()
    }
}

/// `q = q1 + q2` with `q1` continuous and positive.
#[derive(Clone)]
pub struct CoefficientSplit {
    q1: RealFn,
    q2: RealFn,
    parent: CoefficientPair,
}

impl fmt::Debug for CoefficientSplit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoefficientSplit")
            .field("parent", &self.parent)
            .finish()
    }
}

impl CoefficientSplit {
    #[inline]
    pub fn q1(&self, x: f64) -> f64 {
        (self.q1)(x)
    }

    #[inline]
    pub fn q2(&self, x: f64) -> f64 {
        (self.q2)(x)
    }

    pub fn parent(&self) -> &CoefficientPair {
        &self.parent
    }
}

/// The split used for the two-sided estimate of the localization function.
///
/// ExpOsc presets split as `q1 = e^{beta|x|}`, `q2 = e^{beta|x|} cos e^{gamma|x|}`;
/// other pairs need parts attached with [`CoefficientPair::with_split`].
pub fn split_for_thm28(pair: &CoefficientPair) -> Result<CoefficientSplit> {
    let (q1, q2): (RealFn, RealFn) = match (pair.kind(), pair.user_split()) {
        (_, Some((a, b))) => (a.clone(), b.clone()),
        (CoefficientKind::ExpOsc { beta, gamma, .. }, None) => (
            arc(move |x: f64| (beta * x.abs()).exp()),
            arc(move |x: f64| (beta * x.abs()).exp() * (gamma * x.abs()).exp().cos()),
        ),
        _ => return Err(Error::Unsplittable),
    };
    for i in 0..=400 {
        let x = -20.0 + 0.1 * i as f64;
        let (a, b, q) = (q1(x), q2(x), pair.q(x));
        if !(a > 0.0) || !a.is_finite() {
            return Err(Error::InvalidCoefficient {
                x,
                reason: format!("q1 = {a} is not positive"),
            });
        }
        let scale = a.abs().max(b.abs()).max(q.abs()).max(f64::MIN_POSITIVE);
        if ((a + b) - q).abs() > 8.0 * f64::EPSILON * scale {
            return Err(Error::InvalidCoefficient {
                x,
                reason: format!("q1 + q2 = {} differs from q = {q}", a + b),
            });
        }
    }
    Ok(CoefficientSplit {
        q1,
        q2,
        parent: pair.clone(),
    })
}

/// Serializable description of a coefficient pair, as read from config files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CoefficientSpec {
    Constant {
        r0: f64,
        q0: f64,
    },
    SinePower {
        theta: f64,
    },
    ExpOsc {
        alpha: f64,
        beta: f64,
        gamma: f64,
    },
    Expr {
        r: String,
        q: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        q1: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        q2: Option<String>,
    },
}

impl CoefficientSpec {
    pub fn build(&self) -> Result<CoefficientPair> {
        match self {
            CoefficientSpec::Constant { r0, q0 } => CoefficientPair::make_constant(*r0, *q0),
            CoefficientSpec::SinePower { theta } => CoefficientPair::make_sine_power(*theta),
            CoefficientSpec::ExpOsc { alpha, beta, gamma } => CoefficientPair::make_exp_osc(*alpha, *beta, *gamma),
            CoefficientSpec::Expr { r, q, q1, q2 } => {
                let pair = CoefficientPair::from_exprs(r, q)?;
                match (q1, q2) {
                    (Some(a), Some(b)) => {
                        let (a, b) = (Expr::parse(a)?, Expr::parse(b)?);
                        Ok(pair.with_split(move |x| a.eval(x), move |x| b.eval(x)))
                    }
                    (None, None) => Ok(pair),
                    _ => Err(Error::InvalidParameter("q1 and q2 must be given together".into())),
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn presets() -> Vec<CoefficientPair> {
        vec![
            CoefficientPair::make_constant(1.0, 1.0).unwrap(),
            CoefficientPair::make_constant(2.0, 0.0).unwrap(),
            CoefficientPair::make_sine_power(0.5).unwrap(),
            CoefficientPair::make_sine_power(2.0).unwrap(),
            CoefficientPair::make_exp_osc(0.0, 1.0, 2.0).unwrap(),
            CoefficientPair::make_exp_osc(1.0, 1.0, 1.0).unwrap(),
            CoefficientPair::make_exp_osc(-1.0, 0.0, 1.0).unwrap(),
        ]
    }

    #[test]
    fn constant_pair() {
        let p = CoefficientPair::make_constant(1.0, 1.0).unwrap();
        assert_eq!((p.r(5.0), p.q(5.0)), (1.0, 1.0));
        let z = CoefficientPair::make_constant(2.0, 0.0).unwrap();
        assert_eq!(z.q(-3.0), 0.0);
        assert!(CoefficientPair::make_constant(0.0, 1.0).is_err());
        assert!(CoefficientPair::make_constant(-1.0, 1.0).is_err());
    }

    #[test]
    fn exp_osc_values() {
        let p = CoefficientPair::make_exp_osc(0.0, 1.0, 2.0).unwrap();
        assert_eq!(p.r(0.0), 1.0);
        assert!((p.q(0.0) - (1.0 + 1f64.cos())).abs() < 1e-15);

        let flat = CoefficientPair::make_exp_osc(0.0, 0.0, 1.0).unwrap();
        for x in [-7.3, 0.0, 0.4, 3.3] {
            assert_eq!(flat.r(x), 1.0);
            assert!((0.0..=2.0).contains(&flat.q(x)));
        }

        // e^{gamma x} = pi at x = ln pi, where 1 + cos vanishes
        let p = CoefficientPair::make_exp_osc(1.0, 1.0, 1.0).unwrap();
        assert!(p.q(PI.ln()).abs() < 1e-14);
        assert!(CoefficientPair::make_exp_osc(0.0, 1.0, 0.0).is_err());
        assert!(CoefficientPair::make_exp_osc(0.0, 1.0, -1.0).is_err());
    }

    #[test]
    fn sine_power_values() {
        let p = CoefficientPair::make_sine_power(1.0).unwrap();
        assert_eq!(p.q(0.0), 1.0);
        let p = CoefficientPair::make_sine_power(2.0).unwrap();
        assert!(p.q((1.5 * PI).sqrt()).abs() < 1e-14);
        let p = CoefficientPair::make_sine_power(0.5).unwrap();
        assert!((p.q((PI / 2.0).powi(2)) - 2.0).abs() < 1e-15);
        assert!(CoefficientPair::make_sine_power(0.0).is_err());
    }

    #[test]
    fn oscillation_hint_points_are_sign_changes() {
        let h = OscillationHint::new(2.0);
        let pts = h.points_in(-3.0, 3.0);
        assert!(!pts.is_empty());
        for w in pts.windows(2) {
            assert!(w[0] < w[1]);
        }
        for &t in &pts {
            let c = (2.0 * t.abs()).exp().cos();
            assert!(c.abs() < 1e-9, "cos(e^(2|t|)) = {c} at {t}");
        }
        // mirror symmetry
        let pos: Vec<f64> = pts.iter().copied().filter(|&t| t > 0.0).collect();
        let neg: Vec<f64> = pts.iter().copied().filter(|&t| t < 0.0).map(|t| -t).rev().collect();
        assert_eq!(pos, neg);
        // consecutive calls walk every zero
        let mut t = 0.5;
        let mut n = 0;
        while let Some(z) = h.next(t, Direction::Right) {
            if z > 2.0 {
                break;
            }
            assert!(z > t);
            t = z;
            n += 1;
        }
        assert_eq!(n, h.points_in(0.5, 2.0).len());
        let left = h.next(1.0, Direction::Left).unwrap();
        assert!(left < 1.0 && (2.0 * left).exp().cos().abs() < 1e-9);
    }

    #[test]
    fn q_zero_nodes() {
        let h = OscillationHint::new(1.0);
        let nodes = h.q_zero_nodes_in(-5.0, 5.0, 100);
        let p = CoefficientPair::make_exp_osc(1.0, 1.0, 1.0).unwrap();
        assert!(!nodes.is_empty());
        for x in nodes {
            assert!(p.q(x) < 1e-10 * p.r(x));
        }
    }

    #[test]
    fn next_breakpoint_merges_kink_and_hint() {
        let p = CoefficientPair::make_exp_osc(0.0, 1.0, 1.0).unwrap();
        let first = p.next_breakpoint(-0.1, Direction::Right).unwrap();
        // ln(pi/2) = 0.45 > 0, so the origin comes first
        assert_eq!(first, 0.0);
        assert!((p.next_breakpoint(0.0, Direction::Right).unwrap() - (PI / 2.0).ln()).abs() < 1e-14);
        assert_eq!(p.next_breakpoint(0.1, Direction::Left).unwrap(), 0.0);
        let c = CoefficientPair::make_constant(1.0, 1.0).unwrap();
        assert_eq!(c.next_breakpoint(0.0, Direction::Right), None);
    }

    #[test]
    fn positivity_and_evenness_on_random_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for p in presets() {
            for _ in 0..10_000 {
                let x: f64 = rng.gen_range(-50.0..50.0);
                let (r, q) = (p.r(x), p.q(x));
                if !r.is_finite() || !q.is_finite() {
                    continue; // exp overflow far outside the numeric range
                }
                assert!(r > 0.0, "{}: r({x}) = {r}", p.label());
                assert!(q >= 0.0, "{}: q({x}) = {q}", p.label());
                assert_eq!(r, p.r(-x));
                assert_eq!(q, p.q(-x));
            }
        }
    }

    #[test]
    fn split_exp_osc_preset() {
        let p = CoefficientPair::make_exp_osc(0.0, 1.0, 2.0).unwrap();
        let s = split_for_thm28(&p).unwrap();
        for x in [-3.0, -0.2, 0.0, 1.7, 4.0] {
            assert_eq!(s.q1(x), x.abs().exp());
            assert_eq!(s.q2(x), x.abs().exp() * (2.0 * x.abs()).exp().cos());
        }
    }

    #[test]
    fn split_user_parts() {
        let c = CoefficientPair::make_constant(1.0, 1.0)
            .unwrap()
            .with_split(|_| 1.0, |_| 0.0);
        assert!(split_for_thm28(&c).is_ok());
        let theta = 1.5;
        let sp = CoefficientPair::make_sine_power(theta)
            .unwrap()
            .with_split(|_| 1.0, move |x: f64| x.abs().powf(theta).sin());
        let s = split_for_thm28(&sp).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let x: f64 = rng.gen_range(-50.0..50.0);
            let q = sp.q(x);
            assert!(((s.q1(x) + s.q2(x)) - q).abs() <= 4.0 * f64::EPSILON * q.abs().max(1.0));
        }
        let bad = CoefficientPair::make_constant(1.0, 1.0)
            .unwrap()
            .with_split(|_| 1.0, |_| 0.5);
        assert!(split_for_thm28(&bad).is_err());
    }

    #[test]
    fn unsplittable_without_parts() {
        let c = CoefficientPair::make_constant(1.0, 1.0).unwrap();
        assert_eq!(split_for_thm28(&c).unwrap_err(), Error::Unsplittable);
        let s = CoefficientPair::make_sine_power(2.0).unwrap();
        assert_eq!(split_for_thm28(&s).unwrap_err(), Error::Unsplittable);
    }

    #[test]
    fn expr_pairs_and_spec() {
        let p = CoefficientPair::from_exprs("exp(abs(x))", "1+sin(pow(abs(x),2))").unwrap();
        assert!((p.r(-1.0) - 1f64.exp()).abs() < 1e-15);
        assert!(CoefficientPair::from_exprs("x", "1").is_err());
        assert!(CoefficientPair::from_exprs("1", "-1").is_err());

        let spec = CoefficientSpec::ExpOsc {
            alpha: 0.0,
            beta: 1.0,
            gamma: 2.0,
        };
        let pair = spec.build().unwrap();
        assert!(matches!(pair.kind(), CoefficientKind::ExpOsc { .. }));
        let spec = CoefficientSpec::Expr {
            r: "1".into(),
            q: "1".into(),
            q1: Some("1".into()),
            q2: None,
        };
        assert!(spec.build().is_err());
    }

    #[test]
    fn scaling_keeps_density() {
        let p = CoefficientPair::make_exp_osc(0.0, 1.0, 1.0).unwrap();
        let s = p.scaled(10.0).unwrap();
        for x in [-2.0, 0.3, 1.1] {
            assert_eq!(s.density(x), p.density(x));
            assert!((s.r(x) - 10.0 * p.r(x)).abs() < 1e-12);
        }
        assert!(p.scaled(0.0).is_err());
    }

    #[test]
    fn numeric_limits() {
        let p = CoefficientPair::make_exp_osc(0.0, 1.0, 2.0).unwrap();
        let lim = p.numeric_limit();
        assert!(lim > 10.0 && lim < 14.0, "{lim}");
        assert!(p.global_limit() <= lim);
        let q = CoefficientPair::make_exp_osc(2.0, 1.0, 1.0).unwrap();
        assert!(q.global_limit() > q.numeric_limit());
        let c = CoefficientPair::make_constant(1.0, 1.0).unwrap();
        assert!(c.numeric_limit().is_infinite());
    }
}
