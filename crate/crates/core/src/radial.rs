//! Radially symmetric sheet on the unit disc.
//!
//! Heights sit at cell centres `r_j = (j + ½) dr`, velocities on the interior
//! cell faces `r = k dr`; there is no unknown at the axis, where the flux
//! vanishes by symmetry. Integrals carry the weight `r dr`.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SheetError};
use crate::euler::{RunStats, StepControls, StepStats, STEADY_TOL};
use crate::functionals::{DiagnosticSample, DiagnosticsSeries};
use crate::numerics::{Field, Grid1D, Layout, MIN_POINTS};
use crate::sheet_scheme::{advance, Geometry, SchemeParams, RUPTURE_HEIGHT};
use crate::stepping::{is_sample_time, stop_times, Stepper};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialParams {
    pub sigma: f64,
    pub mu: f64,
    /// `∫₀¹ h r dr`.
    pub mass: f64,
    /// Assumed lower bound on the height, monitored during runs.
    pub m_floor: f64,
}

impl RadialParams {
    pub fn new(sigma: f64, mu: f64, mass: f64, m_floor: f64) -> Result<Self> {
        let bad = |name: &'static str, reason: String| {
            Err(SheetError::InvalidParameter { name, reason })
        };
        if !(sigma.is_finite() && sigma >= 0.0) {
            return bad("sigma", format!("must be non-negative, got {sigma}"));
        }
        if !(mu.is_finite() && mu > 0.0) {
            return bad("mu", format!("must be positive, got {mu}"));
        }
        if !(mass.is_finite() && mass > 0.0) {
            return bad("mass", format!("must be positive, got {mass}"));
        }
        if !(m_floor.is_finite() && m_floor > 0.0) {
            return bad("m_floor", format!("must be positive, got {m_floor}"));
        }
        Ok(Self {
            sigma,
            mu,
            mass,
            m_floor,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialState {
    h: Field,
    faces: Vec<f64>,
    t: f64,
}

impl RadialState {
    /// Samples `h` at the cell centres and `v` on the interior faces.
    pub fn from_fn(
        cells: usize,
        h: impl Fn(f64) -> f64,
        v: impl Fn(f64) -> f64,
        t: f64,
    ) -> Result<Self> {
        let g = Grid1D::cells(cells, 1.0)?;
        let dr = g.dx();
        let faces = (1..cells).map(|k| v(k as f64 * dr)).collect();
        Self::from_faces(Field::from_fn(g, h)?, faces, t)
    }

    pub fn from_faces(h: Field, faces: Vec<f64>, t: f64) -> Result<Self> {
        let g = h.grid();
        if g.layout() != Layout::Cells || g.length() != 1.0 {
            return Err(SheetError::InvalidGrid(
                "radial states use a cell grid on [0, 1]".into(),
            ));
        }
        if g.n() < MIN_POINTS {
            return Err(SheetError::GridTooCoarse {
                n: g.n(),
                min: MIN_POINTS,
            });
        }
        if faces.len() + 1 != h.len() {
            return Err(SheetError::LengthMismatch {
                expected: h.len() - 1,
                got: faces.len(),
            });
        }
        if let Some(index) = faces.iter().position(|v| !v.is_finite()) {
            return Err(SheetError::NonFinite {
                what: "velocity",
                index,
            });
        }
        h.require_positive("height")?;
        Ok(Self { h, faces, t })
    }

    pub fn h(&self) -> &Field {
        &self.h
    }

    /// Velocity at the cell centres, averaged from the faces.
    pub fn v(&self) -> Field {
        let n = self.h.len();
        let at = |k: usize| -> f64 {
            if k == 0 || k == n {
                0.0
            } else {
                self.faces[k - 1]
            }
        };
        let values = (0..n).map(|j| 0.5 * (at(j) + at(j + 1))).collect();
        Field::new(*self.h.grid(), values).expect("finite velocity")
    }

    /// Velocity on the interior faces `r = k dr`, `k = 1..n`.
    pub fn face_velocity(&self) -> &[f64] {
        &self.faces
    }

    pub fn t(&self) -> f64 {
        self.t
    }
}

fn geometry(state: &RadialState) -> Geometry {
    Geometry::radial(state.h.len(), state.h.grid().dx())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialFunctionals {
    pub mass: f64,
    pub energy: f64,
    pub entropy: f64,
    pub hr_l2sq: f64,
    pub h_min: f64,
}

/// Mass, energy `½∫(hv² + σh_r²) r dr`, entropy
/// `½∫(h(v + 4μ h_r/h)² + σh_r²) r dr`, `∫h_r² r dr` and the minimum height.
/// Face quantities use the face-centred rule, so the energy is the one the
/// scheme dissipates.
pub fn radial_functionals(state: &RadialState, p: &RadialParams) -> Result<RadialFunctionals> {
    state.h.require_positive("height")?;
    let g = geometry(state);
    let h = state.h.values();
    let dr = g.d;
    let mut kinetic = 0.0;
    let mut gradient = 0.0;
    let mut entropy = 0.0;
    for k in 0..g.faces() {
        let weight = g.metric[k] * dr;
        let hf = 0.5 * (h[k] + h[k + 1]);
        let hr = (h[k + 1] - h[k]) / dr;
        let v = state.faces[k];
        kinetic += weight * hf * v * v;
        gradient += weight * hr * hr;
        let w = v + 4.0 * p.mu * hr / hf;
        entropy += weight * hf * w * w;
    }
    Ok(RadialFunctionals {
        mass: g.mass(h),
        energy: 0.5 * (kinetic + p.sigma * gradient),
        entropy: 0.5 * (entropy + p.sigma * gradient),
        hr_l2sq: gradient,
        h_min: state.h.min(),
    })
}

fn step_inner(
    state: &RadialState,
    p: &RadialParams,
    dt: f64,
    tol: f64,
    max_iters: usize,
) -> Result<(RadialState, StepStats)> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(SheetError::InvalidParameter {
            name: "dt",
            reason: format!("must be positive, got {dt}"),
        });
    }
    let g = geometry(state);
    let sp = SchemeParams {
        sigma: p.sigma,
        kappa: 4.0 * p.mu,
        tol,
        max_iters,
    };
    let a = advance(&g, &sp, state.h.values(), &state.faces, dt)?;
    let t = state.t + dt;
    let (index, h_min) = a
        .h
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, v)| if v < acc.1 { (i, v) } else { acc });
    if h_min <= RUPTURE_HEIGHT {
        return Err(SheetError::RuptureDetected { t, index, h_min });
    }
    Ok((
        RadialState {
            h: Field::new(*state.h.grid(), a.h)?,
            faces: a.v,
            t,
        },
        StepStats {
            iterations: a.iterations,
            linear_residual: a.linear_residual,
        },
    ))
}

pub fn radial_step(state: &RadialState, p: &RadialParams, dt: f64) -> Result<RadialState> {
    let c = StepControls::default();
    step_inner(state, p, dt, c.newton_tol, c.newton_max_iters).map(|(s, _)| s)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RadialTermination {
    ReachedTEnd,
    SteadyState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialOutcome {
    pub final_state: RadialState,
    pub diagnostics: DiagnosticsSeries,
    pub termination: RadialTermination,
    pub stats: RunStats,
}

fn radial_sample(state: &RadialState, p: &RadialParams) -> Result<DiagnosticSample> {
    let f = radial_functionals(state, p)?;
    let v = state.v();
    let g = state.h.grid();
    let v_l2 = g
        .coords()
        .iter()
        .zip(v.values())
        .map(|(r, v)| r * v * v * g.dx())
        .sum::<f64>()
        .sqrt();
    let mut s = DiagnosticSample {
        t: state.t,
        mass: f.mass,
        energy: Some(f.energy),
        entropy: Some(f.entropy),
        hx_l2sq: Some(f.hr_l2sq),
        h_min: Some(f.h_min),
        h_max: Some(state.h.max()),
        ..Default::default()
    };
    s.extra.insert("v_l2".into(), v_l2);
    Ok(s)
}

fn check_floor(state: &RadialState, p: &RadialParams) -> Result<()> {
    let h_min = state.h.min();
    if h_min < p.m_floor {
        return Err(SheetError::HypothesisViolated {
            t: state.t,
            h_min,
            m_floor: p.m_floor,
        });
    }
    Ok(())
}

pub fn radial_run(
    state0: &RadialState,
    p: &RadialParams,
    ctrl: &StepControls,
) -> Result<RadialOutcome> {
    radial_run_observed(state0, p, ctrl, &[], |_| {})
}

/// As [`radial_run`], landing on `snapshot_times` and handing each state there to `observer`.
pub fn radial_run_observed(
    state0: &RadialState,
    p: &RadialParams,
    ctrl: &StepControls,
    snapshot_times: &[f64],
    mut observer: impl FnMut(&RadialState),
) -> Result<RadialOutcome> {
    ctrl.validate()?;
    check_floor(state0, p)?;
    let mut state = state0.clone();
    let mut diagnostics = DiagnosticsSeries::new();
    let mut stats = RunStats::default();
    let dr = state.h.grid().dx();
    let t0 = state.t;
    // mean height of the disc: mass / ∫₀¹ r dr
    let level = 2.0 * radial_functionals(&state, p)?.mass;
    diagnostics.push(radial_sample(&state, p)?)?;
    for &ts in snapshot_times {
        if (ts - t0).abs() <= 1e-12 {
            observer(&state);
        }
    }
    let steady = |s: &RadialState| {
        let dh = s.h.values().iter().fold(0.0, |m: f64, h| m.max((h - level).abs()));
        let dv = s.faces.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
        dh + dv <= STEADY_TOL
    };
    let finish = |state: RadialState,
                  mut diagnostics: DiagnosticsSeries,
                  termination: RadialTermination,
                  stats: RunStats|
     -> Result<RadialOutcome> {
        if diagnostics.last().map(|s| s.t) != Some(state.t) {
            diagnostics.push(radial_sample(&state, p)?)?;
        }
        Ok(RadialOutcome {
            final_state: state,
            diagnostics,
            termination,
            stats,
        })
    };
    if steady(&state) {
        return finish(state, diagnostics, RadialTermination::SteadyState, stats);
    }
    let mut stepper = Stepper::new(*ctrl);
    for stop in stop_times(t0, ctrl, snapshot_times) {
        while state.t < stop {
            let vmax = state.faces.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
            let limit = if vmax > 0.0 { ctrl.cfl * dr / vmax } else { f64::INFINITY };
            let dt = stepper.propose(state.t, stop, limit);
            match step_inner(&state, p, dt, ctrl.newton_tol, ctrl.newton_max_iters) {
                Ok((mut next, s)) => {
                    if (next.t - stop).abs() <= 1e-12 * stop.max(1.0) {
                        next.t = stop;
                    }
                    stats.record(&s);
                    stepper.accepted(dt);
                    state = next;
                    check_floor(&state, p)?;
                    if steady(&state) {
                        return finish(state, diagnostics, RadialTermination::SteadyState, stats);
                    }
                }
                Err(SheetError::StepRejected(_)) => {
                    stats.rejected += 1;
                    if !stepper.rejected(dt) {
                        return Err(SheetError::StiffnessFailure { t: state.t, dt });
                    }
                }
                Err(e) => return Err(e),
            }
        }
        if is_sample_time(state.t, t0, ctrl) {
            diagnostics.push(radial_sample(&state, p)?)?;
        }
        if snapshot_times
            .iter()
            .any(|&ts| (ts - state.t).abs() <= 1e-12 * ts.max(1.0))
        {
            observer(&state);
        }
    }
    finish(state, diagnostics, RadialTermination::ReachedTEnd, stats)
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;

    fn params(sigma: f64, mu: f64) -> RadialParams {
        RadialParams::new(sigma, mu, 0.5, 0.1).unwrap()
    }

    #[test]
    fn flat_state_is_fixed_and_steady() {
        let s = RadialState::from_fn(32, |_| 1.0, |_| 0.0, 0.0).unwrap();
        let p = params(1.0, 1.0);
        let next = radial_step(&s, &p, 0.1).unwrap();
        assert_eq!(next.h(), s.h());
        assert_eq!(next.face_velocity(), s.face_velocity());
        let f = radial_functionals(&s, &p).unwrap();
        assert_eq!((f.energy, f.entropy, f.hr_l2sq), (0.0, 0.0, 0.0));
        let out = radial_run(&s, &p, &StepControls::default()).unwrap();
        assert_eq!(out.termination, RadialTermination::SteadyState);
    }

    #[test]
    fn functionals_match_closed_forms() {
        let s = RadialState::from_fn(400, |_| 1.0, |r| r * (1.0 - r), 0.0).unwrap();
        let f = radial_functionals(&s, &params(0.0, 1.0)).unwrap();
        assert!((f.energy - 1.0 / 120.0).abs() <= 1e-5);
        assert!((f.mass - 0.5).abs() <= 1e-12);

        let s = RadialState::from_fn(400, |r| 1.0 + 0.1 * (PI * r).cos(), |_| 0.0, 0.0).unwrap();
        let f = radial_functionals(&s, &params(1.0, 1.0)).unwrap();
        assert!((f.hr_l2sq - 0.01 * PI * PI / 4.0).abs() <= 1e-4);
    }

    #[test]
    fn energy_decreases_and_mass_is_conserved() {
        let mut s = RadialState::from_fn(
            64,
            |_| 1.0,
            |r| 0.2 * (-(r - 0.5f64).powi(2) / 0.02).exp() * r * (1.0 - r),
            0.0,
        )
        .unwrap();
        let p = params(0.0, 1.0);
        let f0 = radial_functionals(&s, &p).unwrap();
        let mut e = f0.energy;
        for _ in 0..100 {
            s = radial_step(&s, &p, 1e-3).unwrap();
            let f = radial_functionals(&s, &p).unwrap();
            assert!(f.energy <= e);
            assert!((f.mass - f0.mass).abs() <= 1e-10 * f0.mass);
            e = f.energy;
        }
    }

    #[test]
    fn floor_violation_is_reported() {
        let s = RadialState::from_fn(32, |r| 1.0 + 0.5 * (PI * r).cos(), |_| 0.0, 0.0).unwrap();
        let p = RadialParams::new(1.0, 1.0, 0.5, 0.9).unwrap();
        assert!(matches!(
            radial_run(&s, &p, &StepControls::default()),
            Err(SheetError::HypothesisViolated { .. })
        ));
    }

    #[test]
    fn gradient_norm_decays_at_least_at_the_envelope_rate() {
        let s = RadialState::from_fn(128, |r| 1.0 + 0.1 * (PI * r).cos(), |_| 0.0, 0.0).unwrap();
        let p = RadialParams::new(1.0, 1.0, 0.5, 0.5).unwrap();
        let ctrl = StepControls {
            t_end: 4.0,
            sample_every: 0.05,
            ..StepControls::default()
        };
        let out = radial_run(&s, &p, &ctrl).unwrap();
        let track = out.diagnostics.track(|d| d.hx_l2sq);
        let fit = crate::functionals::fit_exponential(&track, (0.5, 4.0)).unwrap();
        assert!(fit.rate >= 0.95 * 0.25);
        assert!(out.final_state.h().min() >= 0.5);
    }
}
