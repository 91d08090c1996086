use crate::error::{Result, SheetError};

/// Square banded matrix with `bandwidth` diagonals on each side, plus a right-hand side.
///
/// Row `i` stores columns `i - bandwidth ..= i + bandwidth`; entries that fall
/// outside the matrix are ignored.
#[derive(Debug, Clone, PartialEq)]
pub struct BandedSystem {
    bandwidth: usize,
    rows: usize,
    bands: Vec<f64>,
    rhs: Vec<f64>,
}

impl BandedSystem {
    pub fn zeros(rows: usize, bandwidth: usize) -> Self {
        Self {
            bandwidth,
            rows,
            bands: vec![0.0; rows * (2 * bandwidth + 1)],
            rhs: vec![0.0; rows],
        }
    }

    pub fn identity(rows: usize, bandwidth: usize) -> Self {
        let mut sys = Self::zeros(rows, bandwidth);
        for i in 0..rows {
            sys.set(i, i, 1.0);
        }
        sys
    }

    /// Assembles the band of a linear operator by probing it with
    /// `2 * bandwidth + 1` coloured unit vectors.
    pub fn from_operator(
        rows: usize,
        bandwidth: usize,
        mut apply: impl FnMut(&[f64], &mut [f64]),
    ) -> Self {
        let mut sys = Self::zeros(rows, bandwidth);
        let stride = 2 * bandwidth + 1;
        let mut probe = vec![0.0; rows];
        let mut out = vec![0.0; rows];
        for colour in 0..stride.min(rows) {
            probe.iter_mut().for_each(|p| *p = 0.0);
            for j in (colour..rows).step_by(stride) {
                probe[j] = 1.0;
            }
            out.iter_mut().for_each(|o| *o = 0.0);
            apply(&probe, &mut out);
            for (i, &value) in out.iter().enumerate() {
                // the unique probed column within reach of row i
                let lo = i.saturating_sub(bandwidth);
                let offset = (colour + stride - lo % stride) % stride;
                let j = lo + offset;
                if j < rows && j <= i + bandwidth {
                    sys.set(i, j, value);
                }
            }
        }
        sys
    }

    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    pub fn set_rhs(&mut self, rhs: Vec<f64>) -> Result<()> {
        if rhs.len() != self.rows {
            return Err(SheetError::LengthMismatch {
                expected: self.rows,
                got: rhs.len(),
            });
        }
        self.rhs = rhs;
        Ok(())
    }

    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        if i >= self.rows || j >= self.rows || i.abs_diff(j) > self.bandwidth {
            return None;
        }
        Some(i * (2 * self.bandwidth + 1) + (j + self.bandwidth - i))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.slot(i, j).map_or(0.0, |k| self.bands[k])
    }

    /// Panics if `(i, j)` lies outside the band.
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        let k = self
            .slot(i, j)
            .unwrap_or_else(|| panic!("entry ({i}, {j}) outside band {}", self.bandwidth));
        self.bands[k] = value;
    }

    pub fn add(&mut self, i: usize, j: usize, value: f64) {
        let k = self
            .slot(i, j)
            .unwrap_or_else(|| panic!("entry ({i}, {j}) outside band {}", self.bandwidth));
        self.bands[k] += value;
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let bw = self.bandwidth;
        (0..self.rows)
            .map(|i| {
                let lo = i.saturating_sub(bw);
                let hi = (i + bw).min(self.rows - 1);
                (lo..=hi).map(|j| self.get(i, j) * x[j]).sum()
            })
            .collect()
    }

    fn inf_norm(&self) -> f64 {
        let bw = self.bandwidth;
        (0..self.rows)
            .map(|i| {
                let lo = i.saturating_sub(bw);
                let hi = (i + bw).min(self.rows - 1);
                (lo..=hi).map(|j| self.get(i, j).abs()).sum::<f64>()
            })
            .fold(0.0, f64::max)
    }

    /// `‖Ax − b‖∞ / ‖b‖∞`, zero when both vanish.
    pub fn relative_residual(&self, x: &[f64]) -> f64 {
        let r = self.residual_inf(x);
        let b = inf(&self.rhs);
        if r == 0.0 {
            0.0
        } else {
            r / b
        }
    }

    /// Normwise backward error `‖Ax − b‖∞ / (‖A‖∞‖x‖∞ + ‖b‖∞)`.
    pub fn backward_error(&self, x: &[f64]) -> f64 {
        let r = self.residual_inf(x);
        if r == 0.0 {
            return 0.0;
        }
        r / (self.inf_norm() * inf(x) + inf(&self.rhs))
    }

    fn residual_inf(&self, x: &[f64]) -> f64 {
        self.apply(x)
            .iter()
            .zip(&self.rhs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

fn inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| f64::max(m, x.abs()))
}

/// Banded LU without pivoting.
pub fn solve_banded(sys: &BandedSystem) -> Result<Vec<f64>> {
    let n = sys.rows;
    let bw = sys.bandwidth;
    let mut a = sys.clone();
    let mut x = sys.rhs.clone();
    for k in 0..n {
        let pivot = a.get(k, k);
        if pivot == 0.0 || !pivot.is_finite() {
            return Err(SheetError::SingularSystem { row: k });
        }
        let hi = (k + bw).min(n - 1);
        for i in k + 1..=hi {
            let m = a.get(i, k) / pivot;
            if m == 0.0 {
                continue;
            }
            a.set(i, k, 0.0);
            for j in k + 1..=hi {
                let v = a.get(i, j) - m * a.get(k, j);
                a.set(i, j, v);
            }
            x[i] -= m * x[k];
        }
    }
    for k in (0..n).rev() {
        let hi = (k + bw).min(n - 1);
        let s: f64 = (k + 1..=hi).map(|j| a.get(k, j) * x[j]).sum();
        x[k] = (x[k] - s) / a.get(k, k);
    }
    if let Some(index) = x.iter().position(|v| !v.is_finite()) {
        return Err(SheetError::NonFinite {
            what: "banded solution",
            index,
        });
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;

    #[test]
    fn identity_returns_rhs() {
        let mut sys = BandedSystem::identity(7, 2);
        let b = vec![1.0, -2.0, 3.5, 0.0, 4.0, 1e-3, 9.0];
        sys.set_rhs(b.clone()).unwrap();
        assert_eq!(solve_banded(&sys).unwrap(), b);
    }

    #[test]
    fn zero_pivot_reports_row() {
        let mut sys = BandedSystem::identity(4, 1);
        sys.set(2, 2, 0.0);
        assert_eq!(solve_banded(&sys), Err(SheetError::SingularSystem { row: 2 }));
    }

    #[test]
    fn shifted_neumann_laplacian_has_small_residual() {
        // I - L with L the Neumann Laplacian on nodes; rhs has zero mean
        let n = 129;
        let dx = 1.0 / (n - 1) as f64;
        let c = 1.0 / (dx * dx);
        let mut sys = BandedSystem::zeros(n, 1);
        for i in 0..n {
            sys.add(i, i, 1.0 + 2.0 * c);
            if i > 0 {
                sys.add(i, i - 1, -c);
            }
            if i + 1 < n {
                sys.add(i, i + 1, -c);
            }
        }
        sys.add(0, 1, -c);
        sys.add(n - 1, n - 2, -c);
        let b: Vec<f64> = (0..n).map(|i| (PI * i as f64 * dx).cos()).collect();
        sys.set_rhs(b).unwrap();
        let x = solve_banded(&sys).unwrap();
        assert!(sys.relative_residual(&x) <= 1e-12);
        let w: Vec<f64> = (0..n)
            .map(|i| if i == 0 || i == n - 1 { 0.5 * dx } else { dx })
            .collect();
        let mean: f64 = x.iter().zip(&w).map(|(a, b)| a * b).sum();
        assert!(mean.abs() <= 1e-12);
    }

    #[test]
    fn implicit_heat_step_matches_decay_factor() {
        let n = 257;
        let dx = 1.0 / (n - 1) as f64;
        let dt = 1e-3;
        let r = dt / (dx * dx);
        let mut sys = BandedSystem::zeros(n, 1);
        for i in 0..n {
            sys.add(i, i, 1.0 + 2.0 * r);
            if i > 0 {
                sys.add(i, i - 1, -r);
            }
            if i + 1 < n {
                sys.add(i, i + 1, -r);
            }
        }
        sys.add(0, 1, -r);
        sys.add(n - 1, n - 2, -r);
        let u0: Vec<f64> = (0..n).map(|i| (PI * i as f64 * dx).cos()).collect();
        sys.set_rhs(u0.clone()).unwrap();
        let u1 = solve_banded(&sys).unwrap();
        let exact = (-PI * PI * dt).exp();
        let err = u1
            .iter()
            .zip(&u0)
            .map(|(a, b)| (a - exact * b).abs())
            .fold(0.0, f64::max);
        assert!(err <= 0.5 * (PI * PI * dt).powi(2) + 1e-5);
    }

    #[test]
    fn probing_recovers_pentadiagonal_band() {
        let n = 11;
        let mut reference = BandedSystem::zeros(n, 2);
        for i in 0..n {
            for j in i.saturating_sub(2)..=(i + 2).min(n - 1) {
                reference.set(i, j, (1 + i * 7 + j * 3) as f64);
            }
        }
        let probed = BandedSystem::from_operator(n, 2, |x, out| {
            out.copy_from_slice(&reference.apply(x));
        });
        assert_eq!(probed, reference);
    }
}

#[cfg(test)]
mod proptests {
    use proptest::prelude::*;

    use super::*;

    proptest! {
        #[test]
        fn dominant_systems_solve_to_round_off(
            seed in proptest::collection::vec(-1.0f64..1.0, 40),
            rhs in proptest::collection::vec(-10.0f64..10.0, 8),
        ) {
            let n = 8;
            let mut sys = BandedSystem::zeros(n, 2);
            let mut k = 0;
            for i in 0..n {
                for j in i.saturating_sub(2)..=(i + 2).min(n - 1) {
                    if i != j {
                        sys.set(i, j, seed[k % seed.len()]);
                        k += 1;
                    }
                }
                sys.set(i, i, 5.0 + seed[i].abs());
            }
            sys.set_rhs(rhs).unwrap();
            let x = solve_banded(&sys).unwrap();
            prop_assert!(sys.relative_residual(&x) <= 1e-12);
        }
    }
}
