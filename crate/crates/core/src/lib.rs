//! Numerical laboratory for the forced viscous Burgers equation
//! `∂u/∂t + ∇(|u|²/2) = ½Δu + ∇V` with periodic forcing.
//!
//! The Cole–Hopf substitution `u = -∇φ/φ` reduces the problem to the
//! linear semigroup `φ(t) = e^{-tH}φ₀` of `H = -½Δ + V`. The modules here
//! build that pipeline, the stationary field `-∇Ω/Ω` of the ground state Ω,
//! the ground-state-transformed heat kernel on the line and an independent
//! direct solver used as a cross-check.

pub mod error;
pub mod spectral;
pub mod schrodinger;
pub mod cole_hopf;
pub mod fit;
pub mod intrinsic_kernel;
pub mod burgers_oracle;
pub mod text;

pub use error::{Error, Result};
