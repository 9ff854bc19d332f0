//! Periodic-box discretization, complex fields and the norms built on them.

mod field;
mod grid;
pub mod interp;
pub mod io;
mod profile;

pub use field::{gradient_sq_norm, lp_norm, momentum, sobolev_norm, weighted_l2, Field, MOMENTUM_CONVENTION};
pub use grid::{make_grid, Grid};
pub use profile::{eval_profile, AnalyticProfile, ProfileFlags, ProfileKind};
