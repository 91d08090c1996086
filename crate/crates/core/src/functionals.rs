//! Conserved and dissipated quantities, decay envelopes and exponential fits.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SheetError};
use crate::numerics::{derivative, integrate, norms, Boundary, Field, Order};

/// Physical parameters of the planar sheet.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SheetParams {
    pub sigma: f64,
    pub nu: f64,
    pub mass: f64,
}

impl SheetParams {
    pub fn new(sigma: f64, nu: f64, mass: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma >= 0.0) {
            return Err(SheetError::InvalidParameter {
                name: "sigma",
                reason: format!("must be finite and non-negative, got {sigma}"),
            });
        }
        if !(nu.is_finite() && nu >= 0.0) {
            return Err(SheetError::InvalidParameter {
                name: "nu",
                reason: format!("must be finite and non-negative, got {nu}"),
            });
        }
        if !(mass.is_finite() && mass > 0.0) {
            return Err(SheetError::InvalidParameter {
                name: "mass",
                reason: format!("must be positive, got {mass}"),
            });
        }
        Ok(Self { sigma, nu, mass })
    }

    /// Parameters whose mass is measured from `h`.
    pub fn for_height(sigma: f64, nu: f64, h: &Field) -> Result<Self> {
        Self::new(sigma, nu, mass_euler(h)?)
    }
}

/// The bound `y(t) ≤ amplitude · exp(−rate · t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayEnvelope {
    pub amplitude: f64,
    pub rate: f64,
}

impl DecayEnvelope {
    pub fn at(&self, t: f64) -> f64 {
        self.amplitude * (-self.rate * t).exp()
    }
}

/// One row of a diagnostics time series. Optional entries are left empty
/// when they do not apply to the solver that produced the sample.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DiagnosticSample {
    pub t: f64,
    pub mass: f64,
    pub energy: Option<f64>,
    pub entropy: Option<f64>,
    pub hx_l2sq: Option<f64>,
    pub h_min: Option<f64>,
    pub h_max: Option<f64>,
    pub u_minus_1_l2sq: Option<f64>,
    pub extra: BTreeMap<String, f64>,
}

impl DiagnosticSample {
    fn values(&self) -> impl Iterator<Item = f64> + '_ {
        [self.t, self.mass]
            .into_iter()
            .chain(self.energy)
            .chain(self.entropy)
            .chain(self.hx_l2sq)
            .chain(self.h_min)
            .chain(self.h_max)
            .chain(self.u_minus_1_l2sq)
            .chain(self.extra.values().copied())
    }
}

/// Time-ordered diagnostics.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DiagnosticsSeries {
    samples: Vec<DiagnosticSample>,
}

impl DiagnosticsSeries {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a sample; times must increase strictly and all entries be finite.
    pub fn push(&mut self, sample: DiagnosticSample) -> Result<()> {
        if let Some(last) = self.samples.last() {
            if !(sample.t > last.t) {
                return Err(SheetError::InvalidState(format!(
                    "sample time {} does not follow {}",
                    sample.t, last.t
                )));
            }
        }
        if let Some(index) = sample.values().position(|v| !v.is_finite()) {
            return Err(SheetError::NonFinite {
                what: "diagnostic sample",
                index,
            });
        }
        self.samples.push(sample);
        Ok(())
    }

    pub fn samples(&self) -> &[DiagnosticSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn last(&self) -> Option<&DiagnosticSample> {
        self.samples.last()
    }

    /// `(t, value)` pairs for samples where `pick` yields a value.
    pub fn track(&self, pick: impl Fn(&DiagnosticSample) -> Option<f64>) -> Vec<(f64, f64)> {
        self.samples
            .iter()
            .filter_map(|s| pick(s).map(|v| (s.t, v)))
            .collect()
    }

    /// Names of all extra columns, sorted.
    pub fn extra_names(&self) -> Vec<String> {
        let mut names: Vec<String> = self
            .samples
            .iter()
            .flat_map(|s| s.extra.keys().cloned())
            .collect();
        names.sort();
        names.dedup();
        names
    }
}

fn require_non_negative(h: &Field) -> Result<()> {
    match h.values().iter().position(|&v| v < 0.0) {
        Some(i) => Err(SheetError::InvalidState(format!(
            "negative height {:e} at index {i}",
            h.values()[i]
        ))),
        None => Ok(()),
    }
}

fn require_same_grid(a: &Field, b: &Field) -> Result<()> {
    if a.grid() != b.grid() {
        return Err(SheetError::LengthMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    Ok(())
}

pub fn mass_euler(h: &Field) -> Result<f64> {
    require_non_negative(h)?;
    Ok(integrate(h))
}

/// `∫ h_x² dx`.
pub fn hx_l2sq(h: &Field) -> Result<f64> {
    let hx = derivative(h, Order::First, Boundary::Neumann)?;
    Ok(norms(&hx).l2.powi(2))
}

/// `½ ∫ (h v² + σ h_x²) dx`.
pub fn energy_euler(h: &Field, v: &Field, p: &SheetParams) -> Result<f64> {
    require_non_negative(h)?;
    require_same_grid(h, v)?;
    let hx = derivative(h, Order::First, Boundary::Neumann)?;
    let density = Field::new(
        *h.grid(),
        (0..h.len())
            .map(|i| {
                let (hi, vi, gi) = (h.values()[i], v.values()[i], hx.values()[i]);
                hi * vi * vi + p.sigma * gi * gi
            })
            .collect(),
    )?;
    Ok(0.5 * integrate(&density))
}

/// `½ ∫ (h (v + ν h_x/h)² + σ h_x²) dx`.
pub fn entropy_euler(h: &Field, v: &Field, p: &SheetParams) -> Result<f64> {
    h.require_positive("height")?;
    require_same_grid(h, v)?;
    let hx = derivative(h, Order::First, Boundary::Neumann)?;
    let density = Field::new(
        *h.grid(),
        (0..h.len())
            .map(|i| {
                let (hi, vi, gi) = (h.values()[i], v.values()[i], hx.values()[i]);
                let w = vi + p.nu * gi / hi;
                hi * w * w + p.sigma * gi * gi
            })
            .collect(),
    )?;
    Ok(0.5 * integrate(&density))
}

/// `∫₀¹ u ds`.
pub fn lagrangian_mass(u: &Field) -> Result<f64> {
    u.require_positive("stretch")?;
    Ok(integrate(u))
}

/// Envelope for `‖h_x‖₂²`: amplitude `2 S₀ / σ`, rate `2 ν π²`.
pub fn decay_envelope_h1(s0: f64, p: &SheetParams) -> Result<DecayEnvelope> {
    if p.sigma <= 0.0 {
        return Err(SheetError::EnvelopeUndefined("requires sigma > 0"));
    }
    if p.nu <= 0.0 {
        return Err(SheetError::EnvelopeUndefined("requires nu > 0"));
    }
    if !(s0 >= 0.0) {
        return Err(SheetError::InvalidParameter {
            name: "S0",
            reason: format!("must be non-negative, got {s0}"),
        });
    }
    Ok(DecayEnvelope {
        amplitude: 2.0 * s0 / p.sigma,
        rate: 2.0 * p.nu * std::f64::consts::PI.powi(2),
    })
}

/// Envelope for `‖u − 1‖₂²` of the unforced stretch equation:
/// amplitude `∫(u₀ − 1)²`, rate `2ν (ln m / (m − 1))²` with `m = max u₀`.
pub fn decay_envelope_pme(u0: &Field, nu: f64) -> Result<DecayEnvelope> {
    if !(nu > 0.0) {
        return Err(SheetError::InvalidParameter {
            name: "nu",
            reason: format!("must be positive, got {nu}"),
        });
    }
    u0.require_positive("stretch")?;
    let amplitude = integrate(&u0.map(|u| (u - 1.0) * (u - 1.0))?);
    let m = u0.max();
    // ln(m)/(m − 1) → 1 as m → 1
    let ratio = if (m - 1.0).abs() < 1e-12 {
        1.0
    } else {
        m.ln() / (m - 1.0)
    };
    Ok(DecayEnvelope {
        amplitude,
        rate: 2.0 * nu * ratio * ratio,
    })
}

/// Samples below this are treated as numerical saturation and ignored by fits.
pub const FIT_FLOOR: f64 = 1e-12;
pub const FIT_MIN_SAMPLES: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpFit {
    pub amplitude: f64,
    pub rate: f64,
    pub r_squared: f64,
}

/// Least-squares line through `(t, ln y)` over samples with `t` in `window`
/// and `y > FIT_FLOOR`.
pub fn fit_exponential(series: &[(f64, f64)], window: (f64, f64)) -> Result<ExpFit> {
    let pts: Vec<(f64, f64)> = series
        .iter()
        .filter(|(t, y)| *t >= window.0 && *t <= window.1 && *y > FIT_FLOOR && y.is_finite())
        .map(|&(t, y)| (t, y.ln()))
        .collect();
    if pts.len() < FIT_MIN_SAMPLES {
        return Err(SheetError::InsufficientData {
            got: pts.len(),
            need: FIT_MIN_SAMPLES,
        });
    }
    let n = pts.len() as f64;
    let tm = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let ym = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let stt: f64 = pts.iter().map(|p| (p.0 - tm).powi(2)).sum();
    let sty: f64 = pts.iter().map(|p| (p.0 - tm) * (p.1 - ym)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - ym).powi(2)).sum();
    if stt == 0.0 {
        return Err(SheetError::InsufficientData {
            got: 1,
            need: FIT_MIN_SAMPLES,
        });
    }
    let slope = sty / stt;
    let intercept = ym - slope * tm;
    let sse: f64 = pts
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    let r_squared = if syy == 0.0 { 1.0 } else { 1.0 - sse / syy };
    Ok(ExpFit {
        amplitude: intercept.exp(),
        rate: -slope,
        r_squared,
    })
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::initial_data::{special_mass, SpecialData};
    use crate::numerics::Grid1D;

    fn unit(n: usize) -> Grid1D {
        Grid1D::nodes(n, 1.0).unwrap()
    }

    fn params(sigma: f64, nu: f64) -> SheetParams {
        SheetParams::new(sigma, nu, 1.0).unwrap()
    }

    #[test]
    fn mass_examples() {
        let h = Field::constant(unit(33), 2.5).unwrap();
        assert!((mass_euler(&h).unwrap() - 2.5).abs() < 1e-15);

        let h = Field::from_fn(unit(2049), |x| SpecialData::Flat.height(x)).unwrap();
        assert!((mass_euler(&h).unwrap() - special_mass()).abs() <= 1e-4);

        let g = Grid1D::nodes(513, 2.0).unwrap();
        let h = Field::from_fn(g, |x| 1.0 - 0.2 * (PI * x / 2.0).cos()).unwrap();
        assert!((mass_euler(&h).unwrap() - 2.0).abs() <= 1e-6);
    }

    #[test]
    fn negative_height_is_invalid() {
        let h = Field::from_fn(unit(9), |x| x - 0.5).unwrap();
        assert!(matches!(mass_euler(&h), Err(SheetError::InvalidState(_))));
    }

    #[test]
    fn energy_examples() {
        let g = unit(513);
        let flat = Field::constant(g, 3.0).unwrap();
        let zero = Field::constant(g, 0.0).unwrap();
        assert_eq!(energy_euler(&flat, &zero, &params(1.0, 1.0)).unwrap(), 0.0);

        let one = Field::constant(g, 1.0).unwrap();
        let v = Field::from_fn(g, |x| (PI * x).sin()).unwrap();
        assert!((energy_euler(&one, &v, &params(0.0, 1.0)).unwrap() - 0.25).abs() <= 1e-5);

        let h = Field::from_fn(g, |x| 1.0 + 0.1 * (PI * x).cos()).unwrap();
        let expected = 0.5 * (0.1 * PI).powi(2) * 0.5;
        assert!((energy_euler(&h, &zero, &params(1.0, 1.0)).unwrap() - expected).abs() <= 1e-4);
    }

    #[test]
    fn entropy_examples() {
        let g = unit(513);
        let flat = Field::constant(g, 3.0).unwrap();
        let zero = Field::constant(g, 0.0).unwrap();
        assert_eq!(entropy_euler(&flat, &zero, &params(1.0, 1.0)).unwrap(), 0.0);

        // v = −ν h_x / h with the same discrete h_x annihilates the kinetic part
        let nu = 0.7;
        let h = Field::from_fn(g, |x| 2.0 + (PI * x).cos()).unwrap();
        let hx = derivative(&h, Order::First, Boundary::Neumann).unwrap();
        let v = hx.zip_with(&h, |d, hh| -nu * d / hh).unwrap();
        assert!(entropy_euler(&h, &v, &params(0.0, nu)).unwrap().abs() <= 1e-28);

        // exact data: v = 1 on the interior
        let one = Field::constant(g, 1.0).unwrap();
        assert!((entropy_euler(&one, &one, &params(0.0, 0.0)).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn entropy_needs_positive_height() {
        let g = unit(9);
        let h = Field::from_fn(g, |x| x).unwrap();
        let v = Field::constant(g, 0.0).unwrap();
        assert!(matches!(
            entropy_euler(&h, &v, &params(1.0, 1.0)),
            Err(SheetError::PositivityViolation { index: 0, .. })
        ));
    }

    #[test]
    fn lagrangian_mass_examples() {
        assert!((lagrangian_mass(&Field::constant(unit(17), 1.0).unwrap()).unwrap() - 1.0).abs() < 1e-15);
        let u0 = Field::from_fn(unit(513), |s| SpecialData::Flat.stretch(s)).unwrap();
        assert!((lagrangian_mass(&u0).unwrap() - 1.0).abs() <= 1e-5);
        let a = 1.0 - 1.0 / special_mass();
        let c0 = -(1.0 + a * a).sqrt();
        let u_inf = Field::from_fn(unit(513), |s| -1.0 / (a * (PI * s).cos() + c0)).unwrap();
        assert!((lagrangian_mass(&u_inf).unwrap() - 1.0).abs() <= 1e-5);
    }

    #[test]
    fn h1_envelope_examples() {
        let e = decay_envelope_h1(0.0, &params(1.0, 1.0)).unwrap();
        assert_eq!(e.amplitude, 0.0);
        let e = decay_envelope_h1(0.5, &params(1.0, 0.5)).unwrap();
        assert_eq!(e.amplitude, 1.0);
        assert!((e.rate - PI * PI).abs() < 1e-14);
        let e = decay_envelope_h1(2.0, &params(1.0, 1.0)).unwrap();
        assert_eq!((e.amplitude, e.rate), (4.0, 2.0 * PI * PI));
        assert!(matches!(
            decay_envelope_h1(1.0, &params(0.0, 1.0)),
            Err(SheetError::EnvelopeUndefined(_))
        ));
    }

    #[test]
    fn pme_envelope_examples() {
        let e = decay_envelope_pme(&Field::constant(unit(33), 1.0).unwrap(), 1.0).unwrap();
        assert_eq!(e.amplitude, 0.0);
        assert_eq!(e.rate, 2.0);

        // special flat data: amplitude 0.0549, rate 1.4252 to the printed digits
        let u0 = Field::from_fn(unit(513), |s| SpecialData::Flat.stretch(s)).unwrap();
        let e = decay_envelope_pme(&u0, 1.0).unwrap();
        assert!((e.amplitude - 0.0549).abs() <= 5e-5);
        assert!((e.rate - 1.4252).abs() <= 5e-5);

        let u0 = Field::from_fn(unit(513), |s| 1.0 + 0.5 * (2.0 * PI * s).cos()).unwrap();
        let e = decay_envelope_pme(&u0, 1.0).unwrap();
        assert!((e.amplitude - 0.125).abs() <= 1e-5);
        let b = 2.0 * (1.5f64.ln() / 0.5).powi(2);
        assert!((e.rate - b).abs() <= 1e-12);
        assert!((b - 1.3152).abs() <= 1e-4);
    }

    #[test]
    fn fit_examples() {
        let exact: Vec<(f64, f64)> = (0..20)
            .map(|k| {
                let t = k as f64 * 0.1;
                (t, 3.0 * (-2.0 * t).exp())
            })
            .collect();
        let f = fit_exponential(&exact, (0.0, 10.0)).unwrap();
        assert!((f.amplitude - 3.0).abs() < 1e-12);
        assert!((f.rate - 2.0).abs() < 1e-12);
        assert!(f.r_squared >= 0.999999);

        let wobbly: Vec<(f64, f64)> = (0..200)
            .map(|k| {
                let t = k as f64 * 0.05;
                (t, (-t).exp() * (1.0 + 0.01 * (10.0 * t).sin()))
            })
            .collect();
        let f = fit_exponential(&wobbly, (0.0, 10.0)).unwrap();
        assert!((f.rate - 1.0).abs() <= 0.02);

        let flat: Vec<(f64, f64)> = (0..20).map(|k| (k as f64, 5.0)).collect();
        assert!(fit_exponential(&flat, (0.0, 100.0)).unwrap().rate.abs() <= 1e-10);

        assert_eq!(
            fit_exponential(&exact[..7], (0.0, 10.0)),
            Err(SheetError::InsufficientData { got: 7, need: 8 })
        );
    }

    #[test]
    fn series_rejects_non_increasing_time() {
        let mut s = DiagnosticsSeries::new();
        s.push(DiagnosticSample { t: 0.0, mass: 1.0, ..Default::default() }).unwrap();
        assert!(s.push(DiagnosticSample { t: 0.0, mass: 1.0, ..Default::default() }).is_err());
        let bad = DiagnosticSample { t: 1.0, mass: f64::NAN, ..Default::default() };
        assert!(s.push(bad).is_err());
    }
}

#[cfg(test)]
mod proptests {
    use std::f64::consts::PI;

    use proptest::prelude::*;

    use super::*;
    use crate::numerics::Grid1D;

    proptest! {
        #[test]
        fn energy_and_entropy_are_non_negative(
            a in -0.9f64..0.9, b in -2.0f64..2.0, sigma in 0.0f64..2.0, nu in 0.0f64..2.0,
        ) {
            let g = Grid1D::nodes(65, 1.0).unwrap();
            let h = Field::from_fn(g, |x| 1.0 + a * (PI * x).cos()).unwrap();
            let v = Field::from_fn(g, |x| b * (PI * x).sin()).unwrap();
            let p = SheetParams::new(sigma, nu, 1.0).unwrap();
            prop_assert!(energy_euler(&h, &v, &p).unwrap() >= 0.0);
            prop_assert!(entropy_euler(&h, &v, &p).unwrap() >= 0.0);
        }

        #[test]
        fn pme_rate_is_linear_in_nu(a in 0.05f64..0.9, nu in 0.01f64..5.0, lambda in 0.1f64..10.0) {
            let g = Grid1D::nodes(129, 1.0).unwrap();
            let u0 = Field::from_fn(g, |s| 1.0 + a * (2.0 * PI * s).cos()).unwrap();
            let e1 = decay_envelope_pme(&u0, nu).unwrap();
            let e2 = decay_envelope_pme(&u0, lambda * nu).unwrap();
            prop_assert_eq!(e1.amplitude, e2.amplitude);
            prop_assert!((e2.rate - lambda * e1.rate).abs() <= 1e-12 * e2.rate);
        }

        #[test]
        fn fit_recovers_envelope(amp in 1e-3f64..1e3, rate in 0.0f64..5.0) {
            let env = DecayEnvelope { amplitude: amp, rate };
            let pts: Vec<(f64, f64)> = (0..30).map(|k| { let t = k as f64 * 0.1; (t, env.at(t)) }).collect();
            let f = fit_exponential(&pts, (0.0, 3.0)).unwrap();
            prop_assert!((f.amplitude - amp).abs() <= 1e-10 * amp);
            prop_assert!((f.rate - rate).abs() <= 1e-10 * rate.max(1.0));
        }

        #[test]
        fn trapezoid_mass_is_exact_for_piecewise_linear(k in 1usize..6, a in 0.1f64..2.0, b in 0.1f64..2.0) {
            // linear h integrates exactly on any node grid
            let exact = 0.5 * (a + b);
            for n in [k * 8 + 1, k * 16 + 1] {
                let g = Grid1D::nodes(n, 1.0).unwrap();
                let h = Field::from_fn(g, |x| a + (b - a) * x).unwrap();
                prop_assert!((mass_euler(&h).unwrap() - exact).abs() <= 1e-14);
            }
        }
    }
}
