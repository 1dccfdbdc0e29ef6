//! Criterion functionals and their sup-scans.
//!
//! With `rho = q/r`, the integrals evaluated here are
//!
//! ```text
//! I_nu(x)  = int_{-inf}^x exp(-nu int_t^x rho) dt
//! J_nu(x)  = int_x^inf r(t)^{-p'} exp(-nu int_x^t rho) dt
//! M_p(x)   = I_p(x)^{1/p} J_{p'}(x)^{1/p'}
//! M_1(x)   = I_1(x) / r(x)
//! A(x)     = int_x^inf r(t)^{-1} exp(-int_x^t rho) dt
//! K_p(x)   = r(x)^{-p'} int_x^inf exp(-p' int_x^t rho) dt
//! A_p'(x)  = int_{x-d(x)}^{x+d(x)} r^{-p'},   Ã(x) = int_{x-d(x)}^{x+d(x)} r^{-1}
//! ```
//!
//! Every half-line integral is cut off along a covering by segments of mass 2.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coefficients::CoefficientPair;
use crate::dfunc::{d_of_x, BRACKET_LIMIT};
use crate::error::{Error, Result};
use crate::quadrature::{damped_integral, integrate_finite, integrate_on_pair};
use crate::trend::{self, doubling_grid, Finiteness, InfimumTrend, LimitVerdict};
use crate::{Direction, TOL_CRITERIA};

fn conjugate(p: f64) -> f64 {
    p / (p - 1.0)
}

fn check_p(p: f64) -> Result<f64> {
    if !(p > 1.0) || !p.is_finite() {
        return Err(Error::InvalidParameter(format!("need 1 < p < inf, got p = {p}")));
    }
    Ok(conjugate(p))
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "{name} must be positive and finite, got {v}"
        )));
    }
    Ok(())
}

/// `I_p(x) = int_{-inf}^x exp(-p int_t^x q/r) dt` for `p >= 1`.
#[allow(non_snake_case)]
pub fn I_p_at(pair: &CoefficientPair, p: f64, x: f64, tol: f64) -> Result<f64> {
    if !(p >= 1.0) || !p.is_finite() {
        return Err(Error::InvalidParameter(format!("need p >= 1, got {p}")));
    }
    Ok(damped_integral(pair, |_| 1.0, x, Direction::Left, p, tol)?.value)
}

/// `J_nu(x) = int_x^inf r(t)^{-p'} exp(-nu int_x^t q/r) dt`.
#[allow(non_snake_case)]
pub fn J_nu_at(pair: &CoefficientPair, nu: f64, pprime: f64, x: f64, tol: f64) -> Result<f64> {
    check_positive("nu", nu)?;
    check_positive("p'", pprime)?;
    Ok(damped_integral(pair, |t| pair.r(t).powf(-pprime), x, Direction::Right, nu, tol)?.value)
}

/// `K_p(x) = r(x)^{-p'} int_x^inf exp(-p' int_x^t q/r) dt`.
#[allow(non_snake_case)]
pub fn K_p_at(pair: &CoefficientPair, pprime: f64, x: f64, tol: f64) -> Result<f64> {
    check_positive("p'", pprime)?;
    let tail = damped_integral(pair, |_| 1.0, x, Direction::Right, pprime, tol)?.value;
    Ok(pair.r(x).powf(-pprime) * tail)
}

/// `M_p(x) = I_p(x)^{1/p} J_{p'}(x)^{1/p'}` for `1 < p < inf`.
#[allow(non_snake_case)]
pub fn M_p_at(pair: &CoefficientPair, p: f64, x: f64, tol: f64) -> Result<f64> {
    let pp = check_p(p)?;
    let i = I_p_at(pair, p, x, tol)?;
    let j = J_nu_at(pair, pp, pp, x, tol)?;
    Ok(i.powf(1.0 / p) * j.powf(1.0 / pp))
}

/// `M_1(x) = r(x)^{-1} int_{-inf}^x exp(-int_t^x q/r) dt`.
#[allow(non_snake_case)]
pub fn M_1_at(pair: &CoefficientPair, x: f64, tol: f64) -> Result<f64> {
    Ok(I_p_at(pair, 1.0, x, tol)? / pair.r(x))
}

/// `A(x) = int_x^inf r(t)^{-1} exp(-int_x^t q/r) dt`.
#[allow(non_snake_case)]
pub fn A_at(pair: &CoefficientPair, x: f64, tol: f64) -> Result<f64> {
    Ok(damped_integral(pair, |t| 1.0 / pair.r(t), x, Direction::Right, 1.0, tol)?.value)
}

/// `A_{p'}(x)`, the integral of `r^{-p'}` over `[x - d_x, x + d_x]`.
#[allow(non_snake_case)]
pub fn A_pprime_at(pair: &CoefficientPair, p: f64, x: f64, d_x: f64, tol: f64) -> Result<f64> {
    let pp = check_p(p)?;
    check_positive("d(x)", d_x)?;
    Ok(integrate_on_pair(pair, |t| pair.r(t).powf(-pp), x - d_x, x + d_x, tol)?.value)
}

/// `Ã(x)`, the integral of `1/r` over `[x - d_x, x + d_x]`.
#[allow(non_snake_case)]
pub fn A_tilde_at(pair: &CoefficientPair, x: f64, d_x: f64, tol: f64) -> Result<f64> {
    check_positive("d(x)", d_x)?;
    Ok(integrate_on_pair(pair, |t| 1.0 / pair.r(t), x - d_x, x + d_x, tol)?.value)
}

/// Grid infima of `r`, `q` and `sigma = r^{1/p} q^{1/p'}` with their trends.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InfimaTriplet {
    pub p: f64,
    pub r0: f64,
    pub q0: f64,
    pub sigma: f64,
    pub r_trend: InfimumTrend,
    pub q_trend: InfimumTrend,
    pub sigma_trend: InfimumTrend,
}

/// Infima of `r`, `q` and `r^{1/p} q^{1/p'}` over `grid`. For `p = 1` the
/// last one is `r` itself.
pub fn infima_triplet(pair: &CoefficientPair, p: f64, grid: &[f64]) -> InfimaTriplet {
    let rs: Vec<f64> = grid.iter().map(|&x| pair.r(x)).collect();
    let qs: Vec<f64> = grid.iter().map(|&x| pair.q(x)).collect();
    let sig: Vec<f64> = rs
        .iter()
        .zip(&qs)
        .map(|(&r, &q)| {
            if p == 1.0 {
                r
            } else {
                let pp = conjugate(p);
                r.powf(1.0 / p) * q.max(0.0).powf(1.0 / pp)
            }
        })
        .collect();
    let inf = |v: &[f64]| v.iter().copied().filter(|x| !x.is_nan()).fold(f64::INFINITY, f64::min);
    InfimaTriplet {
        p,
        r0: inf(&rs),
        q0: inf(&qs),
        sigma: inf(&sig),
        r_trend: trend::infimum_trend(grid, &rs),
        q_trend: trend::infimum_trend(grid, &qs),
        sigma_trend: trend::infimum_trend(grid, &sig),
    }
}

/// Grid for infima: the doubling grid plus, for oscillating pairs, the
/// zeros of `q` where the infima are attained.
pub fn infimum_grid(pair: &CoefficientPair, x_max: f64, samples_per_doubling: usize) -> Vec<f64> {
    let nodes = pair
        .oscillation_hint()
        .map(|h| h.q_zero_nodes_in(-x_max, x_max, 64))
        .unwrap_or_default();
    doubling_grid(x_max, samples_per_doubling, &nodes)
}

/// Segments walked before a half-line integral is declared divergent.
const HARDY_SEGMENTS: usize = 80;

/// `int f` over the half-line from `x` in direction `dir` for `f >= 0`,
/// in segments of length 1, 1, 2, 4, ... stopped once the geometric
/// extrapolation of the remaining segments is below `tol` relative to the
/// running total.
fn half_line(f: &dyn Fn(f64) -> f64, x: f64, dir: Direction, tol: f64) -> Result<f64> {
    let sign = dir.sign();
    let mut total = 0.0;
    let mut start = 0.0;
    let mut len = 1.0;
    let mut prev = f64::NAN;
    let mut rising = 0;
    for k in 0..HARDY_SEGMENTS {
        let scale = if total > 0.0 { total } else { f(x).abs().max(1e-300) };
        let (a, b) = (x + sign * start, x + sign * (start + len));
        let (lo, hi) = (a.min(b), a.max(b));
        let c = integrate_finite(f, lo, hi, tol * scale * 1e-2, &[])?.value;
        total += c;
        if prev.is_finite() {
            if c >= prev {
                rising += 1;
                if rising >= 8 {
                    return Err(Error::TailNotDecaying { x, segments: k + 1 });
                }
            } else {
                rising = 0;
                let ratio = c / prev;
                if ratio < 0.5 && c * ratio / (1.0 - ratio) <= tol * total {
                    return Ok(total);
                }
            }
        }
        if total == 0.0 && k > 4 {
            return Ok(0.0);
        }
        prev = c;
        start += len;
        if k > 0 {
            len *= 2.0;
        }
    }
    Err(Error::TailNotDecaying {
        x,
        segments: HARDY_SEGMENTS,
    })
}

/// The Hardy product
///
/// ```text
/// H(x) = (int_{-inf}^x w)^{1/p} (int_x^inf v^{-p'/p})^{1/p'}
/// ```
///
/// for positive weights `w`, `v` and `1 < p < inf`. The relative tolerance
/// `tol` applies to each factor.
#[allow(non_snake_case)]
pub fn hardy_H(w: &dyn Fn(f64) -> f64, v: &dyn Fn(f64) -> f64, p: f64, x: f64, tol: f64) -> Result<f64> {
    let pp = check_p(p)?;
    check_positive("tol", tol)?;
    let left = half_line(w, x, Direction::Left, tol)?;
    let vv = |t: f64| v(t).powf(-pp / p);
    let right = half_line(&vv, x, Direction::Right, tol)?;
    Ok(left.powf(1.0 / p) * right.powf(1.0 / pp))
}

/// Functionals that can be scanned.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Functional {
    Mp,
    Apprime,
    M1,
    A,
    Atilde,
    Ip,
    Jp,
    Kp,
}

impl Functional {
    pub const ALL: [Functional; 8] = [
        Functional::Mp,
        Functional::Apprime,
        Functional::M1,
        Functional::A,
        Functional::Atilde,
        Functional::Ip,
        Functional::Jp,
        Functional::Kp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Functional::Mp => "Mp",
            Functional::Apprime => "Apprime",
            Functional::M1 => "M1",
            Functional::A => "A",
            Functional::Atilde => "Atilde",
            Functional::Ip => "Ip",
            Functional::Jp => "Jp",
            Functional::Kp => "Kp",
        }
    }

    /// Whether the functional needs `d(x)`.
    pub fn uses_d(self) -> bool {
        matches!(self, Functional::Apprime | Functional::Atilde)
    }

    /// Whether the functional is defined only for `1 < p < inf`.
    pub fn needs_finite_p(self) -> bool {
        matches!(
            self,
            Functional::Mp | Functional::Apprime | Functional::Jp | Functional::Kp
        )
    }

    /// Value at one point; `p` is ignored by the `p`-free functionals.
    pub fn eval(self, pair: &CoefficientPair, p: f64, x: f64, tol: f64) -> Result<f64> {
        let d = || d_of_x(pair, x, tol, BRACKET_LIMIT).map(|(d, _)| d);
        match self {
            Functional::Mp => M_p_at(pair, p, x, tol),
            Functional::Apprime => A_pprime_at(pair, p, x, d()?, tol),
            Functional::M1 => M_1_at(pair, x, tol),
            Functional::A => A_at(pair, x, tol),
            Functional::Atilde => A_tilde_at(pair, x, d()?, tol),
            Functional::Ip => I_p_at(pair, p, x, tol),
            Functional::Jp => {
                let pp = check_p(p)?;
                J_nu_at(pair, pp, pp, x, tol)
            }
            Functional::Kp => K_p_at(pair, check_p(p)?, x, tol),
        }
    }
}

impl fmt::Display for Functional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Functional {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.to_ascii_lowercase().replace(['_', '-', '\''], "");
        Functional::ALL
            .into_iter()
            .find(|f| f.name().to_ascii_lowercase() == key)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown functional '{s}'")))
    }
}

/// Sampling policy for sup-scans.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanPolicy {
    /// Largest `|x|`; cut at the pair's numeric limit.
    pub x_max: f64,
    pub samples_per_doubling: usize,
    pub tol: f64,
    /// Extra abscissae added to the grid.
    pub extra_points: Vec<f64>,
}

impl Default for ScanPolicy {
    fn default() -> Self {
        ScanPolicy {
            x_max: 1024.0,
            samples_per_doubling: 8,
            tol: TOL_CRITERIA,
            extra_points: Vec::new(),
        }
    }
}

impl ScanPolicy {
    /// The scan range for `pair` and a caveat when it had to be shortened.
    pub fn range_for(&self, pair: &CoefficientPair) -> (f64, Option<String>) {
        let limit = pair.numeric_limit();
        if self.x_max > limit {
            (
                limit,
                Some(format!(
                    "scan range cut from |x| <= {} to |x| <= {limit:.6}, beyond which double precision cannot resolve the coefficients",
                    self.x_max
                )),
            )
        } else {
            (self.x_max, None)
        }
    }

    pub fn grid_for(&self, pair: &CoefficientPair) -> (Vec<f64>, Option<String>) {
        let (x_max, caveat) = self.range_for(pair);
        (
            doubling_grid(x_max, self.samples_per_doubling, &self.extra_points),
            caveat,
        )
    }
}

/// A point at which the functional could not be evaluated.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanFailure {
    pub x: f64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionReport {
    pub name: Functional,
    pub p: f64,
    pub grid: Vec<f64>,
    /// `+inf` where the defining integral diverged, NaN where evaluation failed.
    pub values: Vec<f64>,
    pub running_sup: Vec<f64>,
    pub finiteness: Finiteness,
    pub limit_at_infinity: Option<LimitVerdict>,
    pub confidence: f64,
    pub failures: Vec<ScanFailure>,
    pub caveats: Vec<String>,
}

impl CriterionReport {
    /// Largest value seen (`+inf` if some integral diverged).
    pub fn sup(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .filter(|v| !v.is_nan())
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Builds the report from values already computed on `grid`.
    pub fn from_values(name: Functional, p: f64, grid: Vec<f64>, values: Vec<f64>) -> Self {
        let running_sup = trend::running_sup(&grid, &values);
        let (finiteness, fconf) = trend::finiteness(&grid, &values);
        let (limit, lconf) = trend::limit_at_infinity(&grid, &values);
        let confidence = if matches!(name, Functional::A | Functional::Atilde) {
            fconf.min(lconf)
        } else {
            fconf
        };
        CriterionReport {
            name,
            p,
            grid,
            values,
            running_sup,
            finiteness,
            limit_at_infinity: Some(limit),
            confidence,
            failures: Vec::new(),
            caveats: Vec::new(),
        }
    }
}

/// Evaluates `functional` over the policy grid and classifies the sup and
/// the limit at infinity. Points whose integrals diverge count as `+inf`;
/// other failures are recorded and skipped.
pub fn sup_scan(
    functional: Functional,
    pair: &CoefficientPair,
    p: f64,
    policy: &ScanPolicy,
) -> Result<CriterionReport> {
    if functional.needs_finite_p() {
        check_p(p)?;
    } else if !(p >= 1.0) {
        return Err(Error::InvalidParameter(format!("need p >= 1, got {p}")));
    }
    check_positive("tol", policy.tol)?;
    let (grid, caveat) = policy.grid_for(pair);
    let outcomes: Vec<Result<f64>> = grid
        .par_iter()
        .map(|&x| functional.eval(pair, p, x, policy.tol))
        .collect();
    let mut values = Vec::with_capacity(grid.len());
    let mut failures = Vec::new();
    for (&x, out) in grid.iter().zip(outcomes) {
        match out {
            Ok(v) => values.push(v),
            Err(e) if e.signals_divergence() => values.push(f64::INFINITY),
            Err(e) => {
                values.push(f64::NAN);
                failures.push(ScanFailure {
                    x,
                    message: e.to_string(),
                });
            }
        }
    }
    let mut report = CriterionReport::from_values(functional, p, grid, values);
    if !failures.is_empty() {
        report
            .caveats
            .push(format!("{} grid points could not be evaluated", failures.len()));
        report.confidence *= 0.5;
    }
    report.failures = failures;
    report.caveats.extend(caveat);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity() -> CoefficientPair {
        CoefficientPair::make_constant(1.0, 1.0).unwrap()
    }

    #[test]
    fn identity_closed_forms() {
        let id = identity();
        for x in [-3.0, 0.0, 2.5] {
            assert!((M_p_at(&id, 2.0, x, 1e-10).unwrap() - 0.5).abs() < 1e-8);
            let m3 = (1.0f64 / 3.0).powf(1.0 / 3.0) * (2.0f64 / 3.0).powf(2.0 / 3.0);
            assert!((M_p_at(&id, 3.0, x, 1e-10).unwrap() - m3).abs() < 1e-8);
            assert!((M_1_at(&id, x, 1e-10).unwrap() - 1.0).abs() < 1e-8);
            assert!((A_at(&id, x, 1e-10).unwrap() - 1.0).abs() < 1e-8);
            assert!((A_tilde_at(&id, x, 1.0, 1e-12).unwrap() - 2.0).abs() < 1e-12);
            assert!((A_pprime_at(&id, 3.0, x, 1.0, 1e-12).unwrap() - 2.0).abs() < 1e-12);
            assert!((I_p_at(&id, 4.0, x, 1e-10).unwrap() - 0.25).abs() < 1e-9);
            assert!((J_nu_at(&id, 2.5, 2.0, x, 1e-10).unwrap() - 0.4).abs() < 1e-9);
            assert!((K_p_at(&id, 1.5, x, 1e-10).unwrap() - 1.0 / 1.5).abs() < 1e-9);
        }
    }

    #[test]
    fn constant_scaling() {
        let two = CoefficientPair::make_constant(2.0, 2.0).unwrap();
        assert!((M_1_at(&two, 0.7, 1e-10).unwrap() - 0.5).abs() < 1e-8);
        assert!((A_pprime_at(&two, 2.0, 0.0, 1.0, 1e-12).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn bad_parameters() {
        let id = identity();
        assert!(M_p_at(&id, 1.0, 0.0, 1e-10).is_err());
        assert!(A_tilde_at(&id, 0.0, 0.0, 1e-10).is_err());
        assert!("mp".parse::<Functional>().is_ok());
        assert!("A_tilde".parse::<Functional>().unwrap() == Functional::Atilde);
        assert!("nope".parse::<Functional>().is_err());
    }

    #[test]
    fn hardy_negative_control() {
        let w = |t: f64| (2.0 * t).exp();
        let v = |_: f64| 1.0;
        let e = hardy_H(&w, &v, 2.0, 0.0, 1e-10).unwrap_err();
        assert!(e.signals_divergence());
    }

    #[test]
    fn infima() {
        let id = identity();
        let g = infimum_grid(&id, 64.0, 4);
        let t = infima_triplet(&id, 2.0, &g);
        assert_eq!((t.r0, t.q0, t.sigma), (1.0, 1.0, 1.0));
        assert_eq!(t.q_trend, InfimumTrend::Stabilized);
    }
}
