//! Error types shared across the solver modules.

use thiserror::Error;

/// Errors produced by validation, integration, and optimization.
#[derive(Debug, Clone, Error)]
pub enum SimError {
    /// A rate set or pulse violated one of its invariants. The string names
    /// the offending field.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A closed-form bound was queried outside its domain.
    #[error("domain error: {0}")]
    DomainError(String),

    /// Step-size control underflowed before the local error tolerance could
    /// be met.
    #[error("tolerance not met: step size {h:.3e} underflowed at t = {t:.6e}")]
    ToleranceNotMet { t: f64, h: f64 },

    /// The integration reached `t_max` with residual excitation above the
    /// stop threshold.
    #[error("not converged: residual {residual:.3e} at t_max = {t:.6e}")]
    NotConverged { t: f64, residual: f64 },

    /// Two results that must come from identical inputs do not.
    #[error("mismatched inputs: {0}")]
    MismatchedInputs(String),

    /// A simulated success probability exceeded its closed-form ceiling by
    /// more than numerical tolerance; indicates a solver or tolerance bug.
    #[error("bound violation: P_S = {p_s:.9} exceeds bound {bound:.9}")]
    BoundViolation { p_s: f64, bound: f64 },

    /// A sweep or optimization specification is malformed.
    #[error("spec error: {0}")]
    SpecError(String),
}

pub type Result<T> = std::result::Result<T, SimError>;
