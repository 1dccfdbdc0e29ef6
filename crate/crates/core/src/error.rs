use thiserror::Error;

/// Errors raised by the numerical routines of this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("coefficient check failed at x = {x}: {reason}")]
    InvalidCoefficient { x: f64, reason: String },

    #[error("expression error: {0}")]
    Expr(String),

    #[error("no canonical split q = q1 + q2 for this coefficient pair")]
    Unsplittable,

    #[error("subdivision budget of {panels} panels exhausted on [{a}, {b}]")]
    MaxSubdivisions { a: f64, b: f64, panels: usize },

    #[error("integrand returned a non-finite value at t = {at}")]
    NonFinite { at: f64 },

    #[error("tail bound did not fall below tolerance after {segments} covering segments from x = {x}")]
    TailNotDecaying { x: f64, segments: usize },

    #[error("window mass stayed below 2 up to half-width {limit} at x = {x}")]
    BracketExhausted { x: f64, limit: f64 },

    #[error("no sign change of t - kappa(t) - {target} within span {span}")]
    RootNotBracketed { target: f64, span: f64 },

    #[error("per-segment bounds grow faster than the geometric damping")]
    Unbounded,

    #[error("hypothesis violated: {0}")]
    HypothesisViolated(String),

    #[error("grid too coarse for differencing: {0}")]
    GridTooCoarse(String),

    #[error("at x = {x}: {source}")]
    AtPoint {
        x: f64,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Tag an error with the abscissa where it happened.
    pub fn at(self, x: f64) -> Error {
        match self {
            e @ Error::AtPoint { .. } => e,
            e => Error::AtPoint { x, source: Box::new(e) },
        }
    }

    /// Strips any `AtPoint` wrappers.
    pub fn root_cause(&self) -> &Error {
        match self {
            Error::AtPoint { source, .. } => source.root_cause(),
            e => e,
        }
    }

    /// True when the failure means an improper integral diverged rather than
    /// a numerical breakdown.
    pub fn signals_divergence(&self) -> bool {
        matches!(
            self.root_cause(),
            Error::TailNotDecaying { .. } | Error::BracketExhausted { .. } | Error::Unbounded
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
