//! Finite-difference operators, quadrature and norms on uniform grids.

use serde::{Deserialize, Serialize};

use super::field::Field;
use super::grid::Layout;
use crate::error::{Result, SheetError};

pub const MIN_POINTS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Order {
    First,
    Second,
}

/// Ghost-point closure used at both ends of the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    /// Even reflection: zero normal derivative.
    Neumann,
    /// Odd reflection about a zero boundary value.
    DirichletZero,
}

/// Second-order central difference with ghost-point closure at both ends.
pub fn derivative(f: &Field, order: Order, bc: Boundary) -> Result<Field> {
    let n = f.len();
    if n < MIN_POINTS {
        return Err(SheetError::GridTooCoarse { n, min: MIN_POINTS });
    }
    let g = f.grid();
    let dx = g.dx();
    let v = f.values();
    let sign = match bc {
        Boundary::Neumann => 1.0,
        Boundary::DirichletZero => -1.0,
    };
    // ghost values on each side
    let (left, right) = match g.layout() {
        Layout::Nodes => (sign * v[1], sign * v[n - 2]),
        Layout::Cells => (sign * v[0], sign * v[n - 1]),
    };
    let at = |i: isize| -> f64 {
        if i < 0 {
            left
        } else if i as usize >= n {
            right
        } else {
            v[i as usize]
        }
    };
    let out = (0..n as isize)
        .map(|i| match order {
            Order::First => (at(i + 1) - at(i - 1)) / (2.0 * dx),
            Order::Second => (at(i + 1) - 2.0 * at(i) + at(i - 1)) / (dx * dx),
        })
        .collect();
    Field::new(*g, out)
}

/// Trapezoid rule on node grids, midpoint rule on cell grids.
pub fn integrate(f: &Field) -> f64 {
    f.grid()
        .weights()
        .iter()
        .zip(f.values())
        .map(|(w, v)| w * v)
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Norms {
    pub l2: f64,
    pub linf: f64,
    pub min: f64,
    pub max: f64,
}

pub fn norms(f: &Field) -> Norms {
    let sq: f64 = f
        .grid()
        .weights()
        .iter()
        .zip(f.values())
        .map(|(w, v)| w * v * v)
        .sum();
    Norms {
        l2: sq.sqrt(),
        linf: f.values().iter().fold(0.0, |m, v| f64::max(m, v.abs())),
        min: f.min(),
        max: f.max(),
    }
}
