//! Initial profiles used by the experiments and tests.

use std::f64::consts::PI;

use crate::error::Result;
use crate::numerics::{Field, Grid1D};

/// `√(π² − 1)`: the mass of the special data on the unit interval.
pub fn special_mass() -> f64 {
    (PI * PI - 1.0).sqrt()
}

/// Mass label `s ∈ [0, 1]` of the point `x ∈ [0, 1]` for `h₀ = cos(πs) + π`.
pub fn special_label(x: f64) -> f64 {
    let r = ((PI - 1.0) / (PI + 1.0)).sqrt();
    let half = 0.5 * PI * x;
    2.0 / PI * half.sin().atan2(r * half.cos())
}

/// Position `x(s)` of label `s` for the same data.
pub fn special_position(s: f64) -> f64 {
    let r = ((PI - 1.0) / (PI + 1.0)).sqrt();
    let half = 0.5 * PI * s;
    2.0 / PI * (r * half.sin()).atan2(half.cos())
}

/// Which velocity accompanies `h₀ = cos(πs) + π`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpecialData {
    /// `v₀ = π sin(πs)/√(π² − 1)`, relaxing to the flat state.
    Flat,
    /// `v₀ = π sin(πs)`, relaxing to a nonflat stationary state.
    Stationary,
}

impl SpecialData {
    pub fn height(self, x: f64) -> f64 {
        (PI * special_label(x)).cos() + PI
    }

    pub fn velocity(self, x: f64) -> f64 {
        let s = special_label(x);
        match self {
            SpecialData::Flat => PI * (PI * s).sin() / special_mass(),
            SpecialData::Stationary => PI * (PI * s).sin(),
        }
    }

    /// `u₀(s) = M / h₀`.
    pub fn stretch(self, s: f64) -> f64 {
        special_mass() / ((PI * s).cos() + PI)
    }
}

/// `h₀ = 1 − 0.2 cos(πx/2)` on `[0, 2]`.
pub fn pinch_height(x: f64) -> f64 {
    1.0 - 0.2 * (0.5 * PI * x).cos()
}

/// `v₀ = π sin(πx/2)` on `[0, 2]`.
pub fn pinch_velocity(x: f64) -> f64 {
    PI * (0.5 * PI * x).sin()
}

/// `1 + amplitude · cos(π x / L)` sampled on `grid`.
pub fn cosine_bump(grid: Grid1D, amplitude: f64) -> Result<Field> {
    let l = grid.length();
    Field::from_fn(grid, |x| 1.0 + amplitude * (PI * x / l).cos())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn label_and_position_are_inverse() {
        for k in 0..=20 {
            let s = k as f64 / 20.0;
            assert!((special_label(special_position(s)) - s).abs() < 1e-14);
        }
        assert_eq!(special_label(0.0), 0.0);
        assert!((special_label(1.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn position_matches_mass_integral() {
        // x(s) = M ∫₀ˢ ds'/h₀(s') by Simpson's rule
        let m = special_mass();
        let s_end = 0.37;
        let k = 2000;
        let h = s_end / k as f64;
        let g = |s: f64| m / ((PI * s).cos() + PI);
        let mut acc = g(0.0) + g(s_end);
        for i in 1..k {
            acc += if i % 2 == 1 { 4.0 } else { 2.0 } * g(i as f64 * h);
        }
        assert!((acc * h / 3.0 - special_position(s_end)).abs() < 1e-12);
    }

    #[test]
    fn flat_velocity_is_compatible() {
        // v₀ = −h₀ₓ/h₀ with ν = 1
        let x = 0.3;
        let e = 1e-6;
        let d = (SpecialData::Flat.height(x + e) - SpecialData::Flat.height(x - e)) / (2.0 * e);
        let v = SpecialData::Flat.velocity(x);
        assert!((v + d / SpecialData::Flat.height(x)).abs() < 1e-8);
    }
}
