//! Crate-wide error type.

use thiserror::Error;

/// Everything that can go wrong across the toolkit.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// A coefficient function returned NaN/inf during integration or evaluation.
    #[error("non-finite coefficient at t = {t}: {what}")]
    NonFiniteCoefficient { t: f64, what: &'static str },

    /// The adaptive ODE integrator could not reach the requested tolerance.
    #[error("ODE integration failed near t = {t}: {why}")]
    IntegrationFailure { t: f64, why: &'static str },

    /// Adaptive quadrature exhausted its refinement depth.
    #[error("quadrature failed on [{a}, {b}]: refinement depth exhausted")]
    QuadratureFailure { a: f64, b: f64 },

    /// Two wavefunctions live on different grids (or in different frames).
    #[error("grid mismatch: {0}")]
    GridMismatch(&'static str),

    /// A time outside the valid window of the classical basis was requested.
    #[error("t = {t} outside the valid window ({lo}, {hi})")]
    OutsideWindow { t: f64, lo: f64, hi: f64 },

    /// A free-side time label with no preimage under τ(t) = u₁/u₂ on the window.
    #[error("τ = {tau} is not in the image of the time map on the window")]
    TimeNotInImage { tau: f64 },

    /// An operation over a sampled time series got fewer samples than it needs.
    #[error("needs at least {need} equally spaced samples, got {got}")]
    InsufficientSamples { need: usize, got: usize },

    /// Quadratic operator representations are only defined for Λ = 0.
    #[error("operation not available for a forced system (Λ ≠ 0)")]
    ForcedNotSupported,

    /// An SL(2,R) parameter set with ad − bc ≠ 1.
    #[error("basis change is not unimodular: ad - bc = {det}")]
    NotUnimodular { det: f64 },

    /// Discrete-spectrum operations need Ω̃² = ω̃² − γ̃²/4 > 0.
    #[error("Ω̃² = {omega_sq} ≤ 0: discrete branch undefined (overdamped invariant)")]
    ComplexOmegaTilde { omega_sq: f64 },

    /// Continuous-spectrum operations need Ω̃² < 0.
    #[error("Ω̃² = {omega_sq} ≥ 0: continuous branch undefined (underdamped invariant)")]
    RealOmegaTilde { omega_sq: f64 },

    /// Special-function evaluation lost accuracy (series/asymptotic mismatch).
    #[error("accuracy loss in special function: {what} (measured {measured:.3e})")]
    AccuracyLoss { what: &'static str, measured: f64 },

    /// The Crank–Nicolson solver produced non-finite amplitudes.
    #[error("solver diverged at t = {t}")]
    SolverDivergence { t: f64 },

    /// Grid construction rejected its parameters.
    #[error("invalid grid: {0}")]
    InvalidGrid(&'static str),

    /// Binary deserialization failed.
    #[error("malformed wavefunction data: {0}")]
    MalformedData(&'static str),
}

pub type Result<T> = std::result::Result<T, Error>;
