//! Toolkit for quantum systems governed by the linear second-order equation of motion
//! x¨ + f˙(t) x˙ + ω²(t) x = Λ(t)  (damped, parametric and forced oscillators, with the
//! free particle and Caldirola–Kanai oscillator as special cases).
//!
//! The central object is the Arnold transformation: a time-dependent point transformation
//! built from a classical solution basis (u₁, u₂, u_p) that maps every solution of the
//! quantum problem onto a solution of the free Schrödinger equation.  On top of it the
//! crate provides the exact factorized evolution operator, the transported position and
//! momentum operators and their quadratic algebra, Magnus expansions for comparison, and
//! the oscillator-like spectrum of the quadratic invariant operator.
//!
//! Modules:
//! - [`classical`]: classical solution bases (numeric and closed-form) and particular
//!   solutions of the forced equation.
//! - [`wavegrid`]: periodic spatial grids, wavefunctions and the unitary grid primitives
//!   (free kernel, quadratic phase, dilation, translation).
//! - [`qat`]: the Arnold transformation itself (time map, forward/inverse state maps,
//!   Schrödinger residual diagnostics).
//! - [`operators`]: transported operator representations, commutator tables, SL(2,R)
//!   basis changes and de-evolution.
//! - [`propagators`]: exact factorized evolution, Crank–Nicolson reference integrator,
//!   Magnus expansions, dense matrix exponential.
//! - [`spectra`]: eigenfunctions of the quadratic invariant (discrete and continuous
//!   branches) and parabolic cylinder functions.

pub mod classical;
pub mod curve;
pub mod error;
pub mod fftutil;
pub mod ode;
pub mod operators;
pub mod propagators;
pub mod qat;
pub mod quadrature;
pub mod special;
pub mod spectra;
pub mod wavegrid;

pub use error::{Error, Result};

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;
