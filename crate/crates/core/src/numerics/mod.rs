//! Grids, fields, difference operators and banded solves.

pub mod banded;
pub mod field;
pub mod grid;
pub mod interp;
pub mod ops;

pub use banded::{solve_banded, BandedSystem};
pub use field::Field;
pub use grid::{Grid1D, Layout};
pub use interp::Hermite;
pub use ops::{derivative, integrate, norms, Boundary, Norms, Order, MIN_POINTS};
