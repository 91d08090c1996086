use crate::error::{Result, SheetError};

/// Piecewise cubic Hermite interpolant on strictly increasing knots.
#[derive(Debug, Clone, PartialEq)]
pub struct Hermite {
    x: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
}

impl Hermite {
    pub fn new(x: Vec<f64>, y: Vec<f64>, d: Vec<f64>) -> Result<Self> {
        if y.len() != x.len() {
            return Err(SheetError::LengthMismatch {
                expected: x.len(),
                got: y.len(),
            });
        }
        if d.len() != x.len() {
            return Err(SheetError::LengthMismatch {
                expected: x.len(),
                got: d.len(),
            });
        }
        if x.len() < 2 {
            return Err(SheetError::InvalidGrid("interpolation needs two knots".into()));
        }
        if let Some(i) = x.windows(2).position(|p| !(p[1] > p[0])) {
            return Err(SheetError::InvalidGrid(format!(
                "knots not strictly increasing at index {}",
                i + 1
            )));
        }
        Ok(Self { x, y, d })
    }

    /// Monotone cubic (Fritsch-Carlson) with the given end slopes.
    pub fn pchip(x: Vec<f64>, y: Vec<f64>, end_slopes: (f64, f64)) -> Result<Self> {
        let n = x.len();
        if y.len() != n {
            return Err(SheetError::LengthMismatch {
                expected: n,
                got: y.len(),
            });
        }
        if n < 2 {
            return Err(SheetError::InvalidGrid("interpolation needs two knots".into()));
        }
        let h: Vec<f64> = x.windows(2).map(|p| p[1] - p[0]).collect();
        let delta: Vec<f64> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / h[k]).collect();
        let mut d = vec![0.0; n];
        d[0] = end_slopes.0;
        d[n - 1] = end_slopes.1;
        for k in 1..n - 1 {
            let (a, b) = (delta[k - 1], delta[k]);
            if a * b > 0.0 {
                let w1 = 2.0 * h[k] + h[k - 1];
                let w2 = h[k] + 2.0 * h[k - 1];
                d[k] = (w1 + w2) / (w1 / a + w2 / b);
            }
        }
        Self::new(x, y, d)
    }

    pub fn knots(&self) -> &[f64] {
        &self.x
    }

    /// Evaluates at `t`, clamped to the knot range.
    pub fn eval(&self, t: f64) -> f64 {
        let n = self.x.len();
        let t = t.clamp(self.x[0], self.x[n - 1]);
        let k = match self.x.partition_point(|&xi| xi <= t) {
            0 => 0,
            p => (p - 1).min(n - 2),
        };
        let h = self.x[k + 1] - self.x[k];
        let s = (t - self.x[k]) / h;
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        h00 * self.y[k] + h * h10 * self.d[k] + h01 * self.y[k + 1] + h * h11 * self.d[k + 1]
    }

    pub fn eval_many(&self, ts: &[f64]) -> Vec<f64> {
        ts.iter().map(|&t| self.eval(t)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_knot_values() {
        let x: Vec<f64> = (0..9).map(|i| i as f64 * 0.125).collect();
        let y: Vec<f64> = x.iter().map(|v| v * v).collect();
        let p = Hermite::pchip(x.clone(), y.clone(), (0.0, 2.0)).unwrap();
        for (a, b) in x.iter().zip(&y) {
            assert!((p.eval(*a) - b).abs() < 1e-15);
        }
    }

    #[test]
    fn exact_for_cubics_with_exact_slopes() {
        let x: Vec<f64> = (0..5).map(|i| i as f64 * 0.25).collect();
        let f = |t: f64| t * t * t - t;
        let df = |t: f64| 3.0 * t * t - 1.0;
        let p = Hermite::new(
            x.clone(),
            x.iter().map(|&t| f(t)).collect(),
            x.iter().map(|&t| df(t)).collect(),
        )
        .unwrap();
        for k in 0..=40 {
            let t = k as f64 / 40.0;
            assert!((p.eval(t) - f(t)).abs() < 1e-14);
        }
    }

    #[test]
    fn pchip_preserves_monotone_data() {
        let x = vec![0.0, 1.0, 2.0, 3.0, 4.0];
        let y = vec![0.0, 0.0, 1.0, 1.0, 5.0];
        let p = Hermite::pchip(x, y, (0.0, 0.0)).unwrap();
        let mut prev = p.eval(0.0);
        for k in 1..=400 {
            let v = p.eval(k as f64 / 100.0);
            assert!(v >= prev - 1e-15);
            prev = v;
        }
    }

    #[test]
    fn rejects_unsorted_knots() {
        assert!(Hermite::pchip(vec![0.0, 0.0, 1.0], vec![1.0; 3], (0.0, 0.0)).is_err());
    }
}
