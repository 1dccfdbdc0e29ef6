//! Numerical solvability analysis for the first-order singular problem
//!
//! ```text
//! -r(x) y'(x) + q(x) y(x) = f(x),    y(x) -> 0 as |x| -> infinity,
//! ```
//!
//! with `r > 0` and `q >= 0`. The crate computes the localization function
//! `d(x)`, the criterion functionals that decide correct solvability in
//! `L_p`, `L_1` and `C`, and evaluates the explicit solution operator
//! `(Gf)(x) = int_x^inf r(t)^{-1} exp(-int_x^t q/r) f(t) dt`.
//!
//! Improper integrals are never transformed to finite ones. They are cut off
//! along a covering of the half-line by segments of mass 2, which gives a
//! geometric tail bound.

// `!(a < b)` is how NaN is rejected throughout
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classifier;
pub mod coefficients;
pub mod covering;
pub mod criteria;
pub mod dfunc;
pub mod error;
pub mod expr;
pub mod green;
pub mod quadrature;
pub mod trend;

pub use classifier::{
    classify, classify_example8, classify_thm12, cross_check_example8, CrossCheckReport, Decision, HypothesisCert,
    Mode, SolvabilityVerdict, Space,
};
pub use coefficients::{
    split_for_thm28, CoefficientKind, CoefficientPair, CoefficientSpec, CoefficientSplit, OscillationHint,
};
pub use covering::{build_covering, build_d_covering, tail_certificate, verify_covering, CoveringChain};
pub use criteria::{sup_scan, CriterionReport, Functional, ScanPolicy};
pub use dfunc::{d_of_x, scan_d, LocalizationProfile};
pub use error::{Error, Result};
pub use green::{
    apply_g, norm_bracket, residual_check, solve_on_grid, weighted_diagnostics, ForcingFunction, NormBracket,
    ResidualReport, SolutionCurve, WeightedReport,
};
pub use quadrature::{integrate_finite, integrate_qr_window, QuadratureResult};
pub use trend::{Finiteness, InfimumTrend, LimitVerdict};

/// Orientation of a half-line `[x, inf)` (right) or `(-inf, x]` (left).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Left,
    Right,
}

impl Direction {
    #[inline]
    pub fn sign(self) -> f64 {
        match self {
            Direction::Left => -1.0,
            Direction::Right => 1.0,
        }
    }

    pub fn flip(self) -> Direction {
        match self {
            Direction::Left => Direction::Right,
            Direction::Right => Direction::Left,
        }
    }
}

/// Default absolute tolerance for criterion functionals.
pub const TOL_CRITERIA: f64 = 1e-10;
/// Default absolute tolerance for evaluations of the solution operator.
pub const TOL_GREEN: f64 = 1e-8;
