use thiserror::Error;

/// Errors produced by the closed-form evaluators and their oracles.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("covariance is not symmetric (max asymmetry {max_asymmetry:e})")]
    NonSymmetric { max_asymmetry: f64 },

    #[error("covariance is not positive definite (eigenvalue {eigenvalue:e} <= 1e-12)")]
    NonPositiveDefinite { eigenvalue: f64 },

    #[error("mass must be positive and finite, got {0}")]
    NonPositiveMass(f64),

    #[error("invalid spectrum: {0}")]
    InvalidSpectrum(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid coupling plan: {0}")]
    InvalidPlan(String),

    #[error("plan is singular at coordinate {index} (kappa = {kappa})")]
    SingularPlan { index: usize, kappa: f64 },

    #[error("plan marginals do not match the measures: {0}")]
    MarginalMismatch(String),

    #[error("balanced IGW requires probability measures, got mass {mass}")]
    UnbalancedInput { mass: f64 },

    #[error("epsilon must be finite and non-negative, got {0}")]
    NegativeEpsilon(f64),

    #[error("invalid regularizers: {0}")]
    InvalidRegularizers(String),

    #[error("cubic has no positive root for a={a}, b={b}, epsilon={epsilon}, tau={tau}")]
    NoPositiveRoot {
        a: f64,
        b: f64,
        epsilon: f64,
        tau: f64,
    },

    #[error("invalid barycenter weights: {0}")]
    InvalidWeights(String),

    #[error("dimension {requested} exceeds the supported maximum {max}")]
    DimensionTooLarge { requested: usize, max: usize },

    /// Every `(j, l)` pair (barycenter coordinate, input measure) for which the
    /// small-epsilon condition fails.
    #[error("epsilon condition violated at (j, l) pairs {pairs:?}")]
    EpsilonConditionViolated { pairs: Vec<(usize, usize)> },

    #[error("subset search supports at most {max} indices, got {requested}")]
    TooManyIndices { requested: usize, max: usize },

    #[error("invalid interval [{lo}, {hi}] or tolerance {tol}")]
    InvalidInterval { lo: f64, hi: f64, tol: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
