//! Numerical laboratory for the nonlinear Schrödinger equation
//! `i∂_tψ + Δψ = |ψ|^{q−1}ψ − |ψ|^{p−1}ψ` with a defocusing short-range term
//! and a focusing mass-subcritical term.
//!
//! The crate covers threshold masses for the constrained minimization of
//! `αK + βN_q − γN_p` on mass spheres, split-step evolution of both the
//! physical and the pseudo-conformal equation, and the diagnostics built on
//! the modified energies `E_A`.

// `!(x > 0.0)` is the NaN-rejecting form used throughout input validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod conformal;
pub mod error;
pub mod evolution;
pub mod functionals;
pub mod ground_state;
pub mod runner;
pub mod spectral;

pub use error::{Error, Result};
