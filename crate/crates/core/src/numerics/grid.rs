use serde::{Deserialize, Serialize};

use crate::error::{Result, SheetError};

/// Where the sample points sit inside `[0, length]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Layout {
    /// `n` points including both endpoints, spacing `length / (n - 1)`.
    Nodes,
    /// `n` cell centres `(j + 1/2) * dx`, spacing `length / n`.
    Cells,
}

/// Uniform 1D grid on `[0, length]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    n: usize,
    length: f64,
    layout: Layout,
}

impl Grid1D {
    /// Node-centred grid with `n` points including both endpoints.
    pub fn nodes(n: usize, length: f64) -> Result<Self> {
        Self::with_layout(n, length, Layout::Nodes)
    }

    /// Cell-centred grid with `n` cells.
    pub fn cells(n: usize, length: f64) -> Result<Self> {
        Self::with_layout(n, length, Layout::Cells)
    }

    pub fn with_layout(n: usize, length: f64, layout: Layout) -> Result<Self> {
        let min = match layout {
            Layout::Nodes => 2,
            Layout::Cells => 1,
        };
        if n < min {
            return Err(SheetError::InvalidGrid(format!(
                "{n} points, at least {min} required"
            )));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(SheetError::InvalidGrid(format!(
                "length must be positive and finite, got {length}"
            )));
        }
        Ok(Self { n, length, layout })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn dx(&self) -> f64 {
        match self.layout {
            Layout::Nodes => self.length / (self.n - 1) as f64,
            Layout::Cells => self.length / self.n as f64,
        }
    }

    pub fn coord(&self, i: usize) -> f64 {
        match self.layout {
            // pin the last node to `length` exactly
            Layout::Nodes if i + 1 == self.n => self.length,
            Layout::Nodes => i as f64 * self.dx(),
            Layout::Cells => (i as f64 + 0.5) * self.dx(),
        }
    }

    pub fn coords(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.coord(i)).collect()
    }

    /// Quadrature weights: trapezoid for nodes, midpoint for cells.
    pub fn weights(&self) -> Vec<f64> {
        let dx = self.dx();
        let mut w = vec![dx; self.n];
        if self.layout == Layout::Nodes {
            w[0] = 0.5 * dx;
            w[self.n - 1] = 0.5 * dx;
        }
        w
    }

    /// Midpoints between adjacent nodes of a node-centred grid.
    pub fn midpoints(&self) -> Vec<f64> {
        let x = self.coords();
        x.windows(2).map(|p| 0.5 * (p[0] + p[1])).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn node_grid_endpoints_and_spacing() {
        let g = Grid1D::nodes(11, 2.0).unwrap();
        let x = g.coords();
        assert_eq!(x[0], 0.0);
        assert_eq!(x[10], 2.0);
        for p in x.windows(2) {
            assert!((p[1] - p[0] - 0.2).abs() < 1e-15);
        }
        let w: f64 = g.weights().iter().sum();
        assert!((w - 2.0).abs() < 1e-15);
    }

    #[test]
    fn cell_grid_centres() {
        let g = Grid1D::cells(4, 1.0).unwrap();
        assert_eq!(g.coords(), vec![0.125, 0.375, 0.625, 0.875]);
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(Grid1D::nodes(1, 1.0).is_err());
        assert!(Grid1D::nodes(5, 0.0).is_err());
        assert!(Grid1D::nodes(5, f64::NAN).is_err());
    }
}
