//! Numerical workbench for a Hardy inequality on a right cylinder whose
//! axis carries countably many inverse-square singularities.
//!
//! The potential is
//!
//! ```text
//! V(x) = Σ_{k∈Z} 1/|x − k·(h,…,h)|²
//! ```
//!
//! which in the reduced coordinates (a, ρ) collapses to a lattice sum with
//! the closed form (π/ρ)·sinh(2πρ)/(2(sinh²πρ + sin²πa))/(dh²). The crate
//! evaluates V both ways with certified truncation bounds, verifies the
//! analytic calculus behind the supersolution certificate φ = θ^α, computes
//! the two-sided bounds
//!
//! ```text
//! (d−2)²/(4π R√d coth(πR√d)) ≤ μ(C_R) ≤ (d−2)²/4
//! ```
//!
//! on the best Hardy constant μ(C_R), and estimates μ(C_R) variationally
//! with explicit test functions and a periodic-cell finite element solver.

pub mod geometry;
pub mod potential;
pub mod quadrature;
pub mod report;
pub mod sampling;
pub mod spectral;
pub mod supersolution;

use thiserror::Error;

/// Errors surfaced by every module; CLI maps `Usage`-like variants to exit 2.
#[derive(Debug, Error)]
pub enum Error {
    #[error("point has {got} components, lattice dimension is {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("dimension d = {0} rejected: bound formulas require d >= 3")]
    DimensionTooSmall(usize),
    #[error("input coincides with a singular pole of the potential")]
    PoleInput,
    #[error("lattice configuration must be normalized (d*h = 1) here")]
    NotNormalized,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("quadrature failure: {0}")]
    Quadrature(String),
    #[error("solver failure: {0}")]
    Solver(String),
}

pub type Result<T> = std::result::Result<T, Error>;
