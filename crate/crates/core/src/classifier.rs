//! Solvability verdicts in `L_p`, `L_1` and `C`.
//!
//! Numeric verdicts come from criterion scans. They are asymmetric on
//! purpose: `Solvable` needs every required condition to be seen settling,
//! `NotSolvable` needs positive evidence that a necessary condition fails,
//! and everything else is `Inconclusive`.
//!
//! Symbolic verdicts for the oscillating family `r = e^{a|x|}`,
//! `q = e^{b|x|}(1 + cos e^{g|x|})` are pure arithmetic on the parameters.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::coefficients::{CoefficientKind, CoefficientPair};
use crate::criteria::{infima_triplet, infimum_grid, sup_scan, CriterionReport, Functional, ScanPolicy};
use crate::dfunc::{delta_diagnostic, s1_s2_diverge, BEstimate, B_of_a, SeriesVerdict};
use crate::error::{Error, Result};
use crate::trend::{doubling_grid, limit_at_infinity, Finiteness, InfimumTrend, LimitVerdict};

/// Function space of the problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Space {
    /// `L_p` with `1 < p < inf`.
    Lp(f64),
    L1,
    C,
}

impl Space {
    /// The exponent, with `C` as `p = inf`.
    pub fn p(self) -> f64 {
        match self {
            Space::Lp(p) => p,
            Space::L1 => 1.0,
            Space::C => f64::INFINITY,
        }
    }

    fn validate(self) -> Result<Self> {
        match self {
            Space::Lp(p) if !(p > 1.0) || !p.is_finite() => {
                Err(Error::InvalidParameter(format!("L_p needs 1 < p < inf, got p = {p}")))
            }
            s => Ok(s),
        }
    }
}

impl fmt::Display for Space {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Space::Lp(p) => write!(f, "L{p}"),
            Space::L1 => f.write_str("L1"),
            Space::C => f.write_str("C"),
        }
    }
}

impl FromStr for Space {
    type Err = Error;

    /// Accepts `C`, `Linf`, `L1`, `L2`, `L3.5`, `Lp:3` and `Lp(3)`.
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_lowercase();
        if t == "c" || t == "linf" {
            return Ok(Space::C);
        }
        let rest = t
            .strip_prefix("lp")
            .map(|r| r.trim_start_matches([':', '(', '=']).trim_end_matches(')'))
            .or_else(|| t.strip_prefix('l'))
            .ok_or_else(|| Error::InvalidParameter(format!("unknown space '{s}'")))?;
        let p: f64 = rest
            .parse()
            .map_err(|_| Error::InvalidParameter(format!("unknown space '{s}'")))?;
        if p == 1.0 {
            Ok(Space::L1)
        } else if p.is_infinite() {
            Ok(Space::C)
        } else {
            Space::Lp(p).validate()
        }
    }
}

impl Serialize for Space {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Space {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Decision {
    Solvable,
    NotSolvable,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    Symbolic,
    Numeric,
}

/// A scalar observation backing a verdict.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Fact {
    pub name: String,
    pub value: f64,
    pub status: String,
}

impl Fact {
    fn new(name: impl Into<String>, value: f64, status: impl fmt::Debug) -> Self {
        Fact {
            name: name.into(),
            value,
            status: format!("{status:?}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Evidence {
    Criterion(CriterionReport),
    Fact(Fact),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolvabilityVerdict {
    pub space: Space,
    pub decision: Decision,
    /// Which criterion decided, e.g. `lp-local-window`.
    pub route: String,
    pub mode: Mode,
    pub evidence: Vec<Evidence>,
    pub caveats: Vec<String>,
}

impl SolvabilityVerdict {
    fn numeric(space: Space) -> Self {
        SolvabilityVerdict {
            space,
            decision: Decision::Inconclusive,
            route: "undecided".into(),
            mode: Mode::Numeric,
            evidence: Vec::new(),
            caveats: Vec::new(),
        }
    }

    fn decide(mut self, decision: Decision, route: &str) -> Self {
        self.decision = decision;
        self.route = route.into();
        self
    }

    /// The criterion reports among the evidence.
    pub fn reports(&self) -> impl Iterator<Item = &CriterionReport> {
        self.evidence.iter().filter_map(|e| match e {
            Evidence::Criterion(r) => Some(r),
            Evidence::Fact(_) => None,
        })
    }

    /// The scalar facts among the evidence.
    pub fn facts(&self) -> impl Iterator<Item = &Fact> {
        self.evidence.iter().filter_map(|e| match e {
            Evidence::Fact(f) => Some(f),
            Evidence::Criterion(_) => None,
        })
    }
}

/// Window half-widths probed for a positive `B(a)`.
pub const B_PROBES: [f64; 5] = [1.0, 2.0, 4.0, 8.0, 16.0];

/// First probed `a` with an established positive `B(a)`, plus all estimates.
fn probe_b(pair: &CoefficientPair, policy: &ScanPolicy) -> (Option<BEstimate>, Vec<Fact>, Vec<String>) {
    let mut facts = Vec::new();
    let mut caveats = Vec::new();
    let (x_max, _) = policy.range_for(pair);
    for a in B_PROBES {
        let reach = x_max.min(pair.window_limit(a));
        if reach < 4.0 {
            caveats.push(format!(
                "B({a}) not probed: windows of half-width {a} are unaffordable beyond |x| = {reach:.3}"
            ));
            continue;
        }
        let grid = doubling_grid(reach, policy.samples_per_doubling, &[]);
        match B_of_a(pair, a, &grid, policy.tol) {
            Ok(b) => {
                facts.push(Fact::new(format!("B({a})"), b.value, b.trend));
                if b.established() {
                    return (Some(b), facts, caveats);
                }
            }
            Err(e) => caveats.push(format!("B({a}) not evaluated: {e}")),
        }
    }
    (None, facts, caveats)
}

/// Limit verdicts of `q` as `x -> -inf` and `x -> +inf`.
fn q_side_limits(pair: &CoefficientPair, policy: &ScanPolicy) -> (LimitVerdict, LimitVerdict) {
    let (x_max, _) = policy.range_for(pair);
    let grid = doubling_grid(x_max, policy.samples_per_doubling, &[]);
    let side = |keep: fn(f64) -> bool| {
        let xs: Vec<f64> = grid.iter().copied().filter(|&x| keep(x)).collect();
        let qs: Vec<f64> = xs.iter().map(|&x| pair.q(x)).collect();
        limit_at_infinity(&xs, &qs).0
    };
    (side(|x| x <= 0.0), side(|x| x >= 0.0))
}

fn scan(functional: Functional, pair: &CoefficientPair, p: f64, policy: &ScanPolicy) -> Result<CriterionReport> {
    sup_scan(functional, pair, p, policy)
}

/// Numeric verdict from the criteria scans.
///
/// Order of checks: integrability of `q/r` on the left half-line (its
/// convergence rules out every space), then a search for a positive
/// `B(a)`. With `B(a) > 0` the local criteria are used (window integrals
/// of `r^{-p'}`, the infimum of `r`, the limit of the window integral of
/// `1/r`), and `q -> 0` on either side rules out every space. Without it the
/// general criteria (`M_p`, `M_1`, `A`) are scanned.
pub fn classify(pair: &CoefficientPair, space: Space, policy: &ScanPolicy) -> SolvabilityVerdict {
    let mut v = SolvabilityVerdict::numeric(space);
    let space = match space.validate() {
        Ok(s) => s,
        Err(e) => {
            v.caveats.push(e.to_string());
            return v;
        }
    };
    let (_, range_caveat) = policy.range_for(pair);
    v.caveats.extend(range_caveat);

    let s_reach = policy.x_max.min(pair.global_limit());
    let left_series = match s1_s2_diverge(pair, s_reach, policy.tol) {
        Ok(s) => {
            let last = s.rows.last().map_or(f64::NAN, |r| r.1);
            v.evidence
                .push(Evidence::Fact(Fact::new("int_{-X}^0 q/r", last, s.left)));
            s.left
        }
        Err(e) => {
            v.caveats.push(format!("partial integrals of q/r failed: {e}"));
            SeriesVerdict::Inconclusive
        }
    };
    if left_series == SeriesVerdict::Converging {
        return v.decide(Decision::NotSolvable, "left-potential-integrable");
    }

    let (b, b_facts, b_caveats) = probe_b(pair, policy);
    v.evidence.extend(b_facts.into_iter().map(Evidence::Fact));
    v.caveats.extend(b_caveats);

    // the C fast path needs only infima and the growth of q
    if space == Space::C && left_series == SeriesVerdict::Diverging {
        let (x_max, _) = policy.range_for(pair);
        let grid = infimum_grid(pair, x_max, policy.samples_per_doubling);
        let inf = infima_triplet(pair, 2.0, &grid);
        let qs: Vec<f64> = grid.iter().map(|&x| pair.q(x)).collect();
        let (q_lim, _) = limit_at_infinity(&grid, &qs);
        if inf.q0 > 0.0 && inf.q_trend == InfimumTrend::Stabilized && q_lim == LimitVerdict::Infinity {
            v.evidence.push(Evidence::Fact(Fact::new("q0", inf.q0, inf.q_trend)));
            v.evidence
                .push(Evidence::Fact(Fact::new("lim q", f64::INFINITY, q_lim)));
            return v.decide(Decision::Solvable, "c-growing-potential");
        }
    }

    match b {
        Some(b) => {
            let (q_left, q_right) = q_side_limits(pair, policy);
            if q_left == LimitVerdict::Zero || q_right == LimitVerdict::Zero {
                v.evidence
                    .push(Evidence::Fact(Fact::new("lim q (left)", f64::NAN, q_left)));
                v.evidence
                    .push(Evidence::Fact(Fact::new("lim q (right)", f64::NAN, q_right)));
                return v.decide(Decision::NotSolvable, "vanishing-potential-obstruction");
            }
            add_delta_caveat(pair, policy, &mut v);
            classify_local(pair, space, policy, b, v)
        }
        None => {
            v.caveats.push(
                "no probed window half-width gave an established positive B(a); using the general criteria".into(),
            );
            classify_general(pair, space, policy, left_series, v)
        }
    }
}

fn add_delta_caveat(pair: &CoefficientPair, policy: &ScanPolicy, v: &mut SolvabilityVerdict) {
    let (x_max, _) = policy.range_for(pair);
    let xs = doubling_grid(x_max.min(16.0), 1, &[]);
    if let Ok(delta) = delta_diagnostic(pair, &xs, policy.tol.max(1e-10)) {
        v.caveats
            .push(format!("sampled d(t) >= {delta:.4} d(x) for |t - x| <= d(x)"));
    }
}

fn criterion_failed(v: &mut SolvabilityVerdict, name: Functional, e: Error) {
    v.caveats.push(format!("{name} scan failed: {e}"));
}

fn classify_local(
    pair: &CoefficientPair,
    space: Space,
    policy: &ScanPolicy,
    b: BEstimate,
    mut v: SolvabilityVerdict,
) -> SolvabilityVerdict {
    v.evidence.push(Evidence::Fact(Fact::new(
        format!("B({}) established", b.a),
        b.value,
        b.trend,
    )));
    match space {
        Space::Lp(p) => match scan(Functional::Apprime, pair, p, policy) {
            Ok(r) => {
                let fin = r.finiteness;
                v.evidence.push(Evidence::Criterion(r));
                match fin {
                    Finiteness::FiniteStable => v.decide(Decision::Solvable, "lp-local-window"),
                    Finiteness::GrowingUnbounded => v.decide(Decision::NotSolvable, "lp-local-window"),
                    Finiteness::Inconclusive => v.decide(Decision::Inconclusive, "lp-local-window"),
                }
            }
            Err(e) => {
                criterion_failed(&mut v, Functional::Apprime, e);
                v
            }
        },
        Space::L1 => {
            let (x_max, _) = policy.range_for(pair);
            let grid = infimum_grid(pair, x_max, policy.samples_per_doubling);
            let inf = infima_triplet(pair, 1.0, &grid);
            v.evidence.push(Evidence::Fact(Fact::new("r0", inf.r0, inf.r_trend)));
            match inf.r_trend {
                InfimumTrend::Stabilized if inf.r0 > 0.0 => v.decide(Decision::Solvable, "l1-local-infimum"),
                InfimumTrend::Vanishing => v.decide(Decision::NotSolvable, "l1-local-infimum"),
                _ => v.decide(Decision::Inconclusive, "l1-local-infimum"),
            }
        }
        Space::C => match scan(Functional::Atilde, pair, 2.0, policy) {
            Ok(r) => {
                let lim = r.limit_at_infinity.unwrap_or(LimitVerdict::Inconclusive);
                v.evidence.push(Evidence::Criterion(r));
                match lim {
                    LimitVerdict::Zero => v.decide(Decision::Solvable, "c-local-window-limit"),
                    LimitVerdict::NonzeroFinite | LimitVerdict::Infinity => {
                        v.decide(Decision::NotSolvable, "c-local-window-limit")
                    }
                    LimitVerdict::Inconclusive => v.decide(Decision::Inconclusive, "c-local-window-limit"),
                }
            }
            Err(e) => {
                criterion_failed(&mut v, Functional::Atilde, e);
                v
            }
        },
    }
}

fn classify_general(
    pair: &CoefficientPair,
    space: Space,
    policy: &ScanPolicy,
    left_series: SeriesVerdict,
    mut v: SolvabilityVerdict,
) -> SolvabilityVerdict {
    let series_ok = left_series == SeriesVerdict::Diverging;
    match space {
        Space::Lp(p) => {
            let mut fin = Vec::new();
            for f in [Functional::Mp, Functional::Apprime] {
                match scan(f, pair, p, policy) {
                    Ok(r) => {
                        fin.push(r.finiteness);
                        v.evidence.push(Evidence::Criterion(r));
                    }
                    Err(e) => {
                        fin.push(Finiteness::Inconclusive);
                        criterion_failed(&mut v, f, e);
                    }
                }
            }
            if fin.contains(&Finiteness::GrowingUnbounded) {
                v.decide(Decision::NotSolvable, "lp-general")
            } else if series_ok && fin.iter().all(|f| *f == Finiteness::FiniteStable) {
                v.decide(Decision::Solvable, "lp-general")
            } else {
                v.decide(Decision::Inconclusive, "lp-general")
            }
        }
        Space::L1 => {
            let (x_max, _) = policy.range_for(pair);
            let grid = infimum_grid(pair, x_max, policy.samples_per_doubling);
            let inf = infima_triplet(pair, 1.0, &grid);
            v.evidence.push(Evidence::Fact(Fact::new("r0", inf.r0, inf.r_trend)));
            let m1 = match scan(Functional::M1, pair, 1.0, policy) {
                Ok(r) => {
                    let f = r.finiteness;
                    v.evidence.push(Evidence::Criterion(r));
                    f
                }
                Err(e) => {
                    criterion_failed(&mut v, Functional::M1, e);
                    Finiteness::Inconclusive
                }
            };
            if inf.r_trend == InfimumTrend::Vanishing || m1 == Finiteness::GrowingUnbounded {
                v.decide(Decision::NotSolvable, "l1-general")
            } else if series_ok
                && inf.r_trend == InfimumTrend::Stabilized
                && inf.r0 > 0.0
                && m1 == Finiteness::FiniteStable
            {
                v.decide(Decision::Solvable, "l1-general")
            } else {
                v.decide(Decision::Inconclusive, "l1-general")
            }
        }
        Space::C => match scan(Functional::A, pair, 2.0, policy) {
            Ok(r) => {
                let lim = r.limit_at_infinity.unwrap_or(LimitVerdict::Inconclusive);
                v.evidence.push(Evidence::Criterion(r));
                match lim {
                    LimitVerdict::Zero => v.decide(Decision::Solvable, "c-general-limit"),
                    LimitVerdict::NonzeroFinite | LimitVerdict::Infinity => {
                        v.decide(Decision::NotSolvable, "c-general-limit")
                    }
                    LimitVerdict::Inconclusive => v.decide(Decision::Inconclusive, "c-general-limit"),
                }
            }
            Err(e) => {
                criterion_failed(&mut v, Functional::A, e);
                v
            }
        },
    }
}

/// Caller-supplied certificate for the comparability hypotheses of the
/// coefficient-only table: outside `interval`, `r(t)/r(x)` and `q(t)/q(x)`
/// lie in `[1/a, a]` whenever `|t - x| <= b r(x)/q(x)`, and
/// `a^2 exp(-b/a^2) <= 1/3`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HypothesisCert {
    pub a: f64,
    pub b: f64,
    pub interval: (f64, f64),
}

impl HypothesisCert {
    /// `a^2 exp(-b/a^2)`.
    pub fn gamma_hat(&self) -> f64 {
        self.a * self.a * (-self.b / (self.a * self.a)).exp()
    }

    /// Arithmetic checks, then a spot-check of the ratio bounds on a grid
    /// of `x` outside the interval (up to `|x| = x_max`) and nine `t` per `x`.
    pub fn verify(&self, pair: &CoefficientPair, x_max: f64) -> Result<()> {
        if !(self.a >= 1.0) || !(self.b > 0.0) || !(self.interval.0 <= self.interval.1) {
            return Err(Error::HypothesisViolated(format!(
                "need a >= 1, b > 0 and a nonempty interval, got {self:?}"
            )));
        }
        let g = self.gamma_hat();
        if g > 1.0 / 3.0 {
            return Err(Error::HypothesisViolated(format!("a^2 exp(-b/a^2) = {g} exceeds 1/3")));
        }
        let (lo, hi) = self.interval;
        let ok = |v: f64| v.is_finite() && v >= 1.0 / self.a && v <= self.a;
        for x in doubling_grid(x_max, 16, &[]) {
            if x > lo && x < hi {
                continue;
            }
            let (rx, qx) = (pair.r(x), pair.q(x));
            if !(rx > 0.0) || !(qx > 0.0) {
                return Err(Error::HypothesisViolated(format!("r or q not positive at x = {x}")));
            }
            let reach = self.b * rx / qx;
            for j in -4..=4 {
                let t = x + reach * j as f64 / 4.0;
                if !ok(pair.r(t) / rx) || !ok(pair.q(t) / qx) {
                    return Err(Error::HypothesisViolated(format!(
                        "ratio bound fails for x = {x}, t = {t} (a = {})",
                        self.a
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Verdict from the coefficient-only table, valid under the certified
/// comparability hypotheses: `L_1` needs `r0 > 0` and `q0 > 0`, `L_p` needs
/// `sigma_{p'} > 0` and `q0 > 0`, `C` needs `q -> inf`.
pub fn classify_thm12(
    pair: &CoefficientPair,
    space: Space,
    cert: &HypothesisCert,
    policy: &ScanPolicy,
) -> Result<SolvabilityVerdict> {
    let space = space.validate()?;
    let (x_max, caveat) = policy.range_for(pair);
    cert.verify(pair, x_max)?;
    let mut v = SolvabilityVerdict::numeric(space);
    v.caveats.extend(caveat);
    v.evidence.push(Evidence::Fact(Fact::new(
        "a^2 exp(-b/a^2)",
        cert.gamma_hat(),
        "at most 1/3",
    )));
    let grid = infimum_grid(pair, x_max, policy.samples_per_doubling);
    let p = match space {
        Space::Lp(p) => p,
        _ => 1.0,
    };
    let inf = infima_triplet(pair, p, &grid);
    let positive = |value: f64, trend: InfimumTrend| match trend {
        InfimumTrend::Stabilized if value > 0.0 => Some(true),
        InfimumTrend::Vanishing => Some(false),
        _ => None,
    };
    let both = |x: Option<bool>, y: Option<bool>| match (x, y) {
        (Some(true), Some(true)) => Decision::Solvable,
        (Some(false), _) | (_, Some(false)) => Decision::NotSolvable,
        _ => Decision::Inconclusive,
    };
    let decision = match space {
        Space::L1 => {
            v.evidence.push(Evidence::Fact(Fact::new("r0", inf.r0, inf.r_trend)));
            v.evidence.push(Evidence::Fact(Fact::new("q0", inf.q0, inf.q_trend)));
            both(positive(inf.r0, inf.r_trend), positive(inf.q0, inf.q_trend))
        }
        Space::Lp(_) => {
            v.evidence
                .push(Evidence::Fact(Fact::new("sigma", inf.sigma, inf.sigma_trend)));
            v.evidence.push(Evidence::Fact(Fact::new("q0", inf.q0, inf.q_trend)));
            both(positive(inf.sigma, inf.sigma_trend), positive(inf.q0, inf.q_trend))
        }
        Space::C => {
            let qs: Vec<f64> = grid.iter().map(|&x| pair.q(x)).collect();
            let (lim, _) = limit_at_infinity(&grid, &qs);
            v.evidence.push(Evidence::Fact(Fact::new("lim q", f64::NAN, lim)));
            match lim {
                LimitVerdict::Infinity => Decision::Solvable,
                LimitVerdict::Zero | LimitVerdict::NonzeroFinite => Decision::NotSolvable,
                LimitVerdict::Inconclusive => Decision::Inconclusive,
            }
        }
    };
    Ok(v.decide(decision, "coefficient-table"))
}

/// Relative slack under which a parameter counts as sitting on a boundary.
const BOUNDARY_EPS: f64 = 1e-12;

fn on_boundary(lhs: f64, rhs: f64) -> bool {
    (lhs - rhs).abs() <= BOUNDARY_EPS * (1.0 + lhs.abs().max(rhs.abs()))
}

/// Exact verdict for `r = e^{alpha|x|}`, `q = e^{beta|x|}(1 + cos e^{gamma|x|})`.
///
/// * `L_p`: `beta = alpha = 0`; or `beta > 0`, `0 <= beta - alpha <= gamma`,
///   `p >= 1 - alpha/beta`; or `beta > 0`, `beta - alpha > gamma`,
///   `beta + 2 alpha + 2 gamma > 0`, `p > 1 - 3 alpha/(beta + 2 alpha + 2 gamma)`.
/// * `L_1`: `beta >= alpha >= 0`.
/// * `C`: `beta > 0` and either `0 <= beta - alpha <= gamma`, or
///   `beta - alpha > gamma` and `beta + 2 alpha + 2 gamma > 0`.
///
/// Parameters sitting exactly on one of these inequalities get a caveat.
pub fn classify_example8(alpha: f64, beta: f64, gamma: f64, space: Space) -> Result<SolvabilityVerdict> {
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::InvalidParameter(format!("gamma must be positive, got {gamma}")));
    }
    if !alpha.is_finite() || !beta.is_finite() {
        return Err(Error::InvalidParameter("alpha and beta must be finite".into()));
    }
    let space = space.validate()?;
    let theta = beta - alpha;
    let mut boundaries = Vec::new();
    let mut check = |name: &str, lhs: f64, rhs: f64| {
        if on_boundary(lhs, rhs) {
            boundaries.push(name.to_string());
        }
    };
    let (solvable, route) = match space {
        Space::Lp(p) => {
            let k = beta + 2.0 * alpha + 2.0 * gamma;
            if alpha == 0.0 && beta == 0.0 {
                (true, "oscillating-family-flat")
            } else if beta > 0.0 && theta >= 0.0 && theta <= gamma {
                let p_min = 1.0 - alpha / beta;
                check("beta - alpha = 0", theta, 0.0);
                check("beta - alpha = gamma", theta, gamma);
                check("p = 1 - alpha/beta", p, p_min);
                (p >= p_min, "oscillating-family-slow-oscillation")
            } else if beta > 0.0 && theta > gamma && k > 0.0 {
                let p_min = 1.0 - 3.0 * alpha / k;
                check("beta - alpha = gamma", theta, gamma);
                check("p = 1 - 3 alpha/(beta + 2 alpha + 2 gamma)", p, p_min);
                (p > p_min, "oscillating-family-fast-oscillation")
            } else {
                check("beta = 0", beta, 0.0);
                check("beta - alpha = 0", theta, 0.0);
                check("beta - alpha = gamma", theta, gamma);
                check("beta + 2 alpha + 2 gamma = 0", k, 0.0);
                (false, "oscillating-family-excluded")
            }
        }
        Space::L1 => {
            check("alpha = 0", alpha, 0.0);
            check("beta = alpha", beta, alpha);
            (beta >= alpha && alpha >= 0.0, "oscillating-family-l1")
        }
        Space::C => {
            let k = beta + 2.0 * alpha + 2.0 * gamma;
            check("beta = 0", beta, 0.0);
            check("beta - alpha = 0", theta, 0.0);
            check("beta - alpha = gamma", theta, gamma);
            let slow = beta > 0.0 && theta >= 0.0 && theta <= gamma;
            let fast = beta > 0.0 && theta > gamma && k > 0.0;
            if fast {
                check("beta + 2 alpha + 2 gamma = 0", k, 0.0);
            }
            (slow || fast, "oscillating-family-c")
        }
    };
    let decision = if solvable {
        Decision::Solvable
    } else {
        Decision::NotSolvable
    };
    let mut caveats = Vec::new();
    if !boundaries.is_empty() {
        caveats.push(format!("exact boundary: {}", boundaries.join(", ")));
    }
    Ok(SolvabilityVerdict {
        space,
        decision,
        route: route.into(),
        mode: Mode::Symbolic,
        evidence: vec![
            Evidence::Fact(Fact::new("alpha", alpha, "parameter")),
            Evidence::Fact(Fact::new("beta", beta, "parameter")),
            Evidence::Fact(Fact::new("gamma", gamma, "parameter")),
        ],
        caveats,
    })
}

/// Numeric and symbolic verdicts side by side.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossCheckReport {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub space: Space,
    pub symbolic: SolvabilityVerdict,
    pub numeric: SolvabilityVerdict,
    /// Same decision, or numeric `Inconclusive`.
    pub consistent: bool,
    /// Opposite definite decisions.
    pub contradiction: bool,
    pub notes: Vec<String>,
}

/// Runs [`classify`] on the preset and [`classify_example8`] on the
/// parameters.
pub fn cross_check_example8(
    alpha: f64,
    beta: f64,
    gamma: f64,
    space: Space,
    policy: &ScanPolicy,
) -> Result<CrossCheckReport> {
    let symbolic = classify_example8(alpha, beta, gamma, space)?;
    let pair = CoefficientPair::make_exp_osc(alpha, beta, gamma)?;
    debug_assert!(matches!(pair.kind(), CoefficientKind::ExpOsc { .. }));
    let numeric = classify(&pair, space, policy);
    let contradiction = numeric.decision != Decision::Inconclusive && numeric.decision != symbolic.decision;
    let mut notes = Vec::new();
    if numeric.decision == Decision::Inconclusive {
        notes.push("numeric evidence inconclusive".to_string());
    }
    if !symbolic.caveats.is_empty() {
        notes.push("parameters sit on a boundary of the exact conditions".to_string());
    }
    if !(alpha.abs() <= 3.0 && beta.abs() <= 3.0 && (0.5..=3.0).contains(&gamma)) {
        notes.push("parameters outside the band |alpha|, |beta| <= 3, gamma in [0.5, 3]".to_string());
    }
    Ok(CrossCheckReport {
        alpha,
        beta,
        gamma,
        space,
        consistent: !contradiction,
        contradiction,
        symbolic,
        numeric,
        notes,
    })
}

/// Verdict for a symbolic preset if one applies, otherwise `None`.
pub fn symbolic_verdict(pair: &CoefficientPair, space: Space) -> Option<SolvabilityVerdict> {
    match pair.kind() {
        CoefficientKind::ExpOsc { alpha, beta, gamma } => classify_example8(alpha, beta, gamma, space).ok(),
        _ => None,
    }
}
