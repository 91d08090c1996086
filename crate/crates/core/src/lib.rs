//! Solvers and diagnostics for viscous thin liquid sheets.
//!
//! The planar system for height `h` and velocity `v` is advanced in the Euler
//! frame by [`euler`], its zero-surface-tension Lagrangian form by
//! [`lagrangian`], and the radially symmetric variant by [`radial`].

pub mod error;
pub mod numerics;

pub use error::{Result, SheetError};
pub mod functionals;
pub mod initial_data;
pub(crate) mod sheet_scheme;
pub mod euler;
pub mod stepping;
pub mod lagrangian;
pub mod radial;
