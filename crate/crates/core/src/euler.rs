//! Time integration of the planar sheet equations in the Euler frame.
//!
//! Heights sit on grid nodes and velocities on the midpoints between them,
//! with the walls at the end nodes. The continuity equation is advanced in
//! flux form, so the discrete mass changes only by round-off.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SheetError};
use crate::functionals::{
    energy_euler, entropy_euler, hx_l2sq, mass_euler, DiagnosticSample, DiagnosticsSeries,
    SheetParams,
};
use crate::numerics::{norms, Field, Grid1D, Layout, MIN_POINTS};
use crate::sheet_scheme::{advance, Geometry, SchemeParams, RUPTURE_HEIGHT};
use crate::stepping::{is_sample_time, stop_times, Stepper};
pub use crate::stepping::{RunStats, StepControls, StepStats};

/// Below this `‖h − M/L‖∞ + ‖v‖∞` a run is declared steady.
pub const STEADY_TOL: f64 = 1e-9;

/// Height on nodes, velocity on the midpoints between nodes, and time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SheetState {
    h: Field,
    faces: Vec<f64>,
    t: f64,
}

impl SheetState {
    /// Samples `h` at the nodes and `v` at the midpoints.
    pub fn from_fn(
        grid: Grid1D,
        h: impl Fn(f64) -> f64,
        v: impl Fn(f64) -> f64,
        t: f64,
    ) -> Result<Self> {
        check_grid(&grid)?;
        let h = Field::from_fn(grid, h)?;
        let faces = grid.midpoints().into_iter().map(v).collect();
        Self::from_faces(h, faces, t)
    }

    /// Builds a state from nodal velocities, interpolated to midpoints with
    /// a four-point stencil that is odd about each wall.
    pub fn new(h: Field, v: Field, t: f64) -> Result<Self> {
        check_grid(h.grid())?;
        if v.grid() != h.grid() {
            return Err(SheetError::LengthMismatch {
                expected: h.len(),
                got: v.len(),
            });
        }
        let n = v.len();
        let vn = v.values();
        let at = |i: isize| -> f64 {
            if i < 0 {
                -vn[(-i) as usize]
            } else if i as usize >= n {
                -vn[2 * (n - 1) - i as usize]
            } else {
                vn[i as usize]
            }
        };
        let faces = (0..n as isize - 1)
            .map(|f| (9.0 * (at(f) + at(f + 1)) - (at(f - 1) + at(f + 2))) / 16.0)
            .collect();
        Self::from_faces(h, faces, t)
    }

    pub fn from_faces(h: Field, faces: Vec<f64>, t: f64) -> Result<Self> {
        check_grid(h.grid())?;
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
        if !(t.is_finite() && t >= 0.0) {
            return Err(SheetError::InvalidState(format!("time must be >= 0, got {t}")));
        }
        h.require_positive("height")?;
        Ok(Self { h, faces, t })
    }

    pub fn h(&self) -> &Field {
        &self.h
    }

    /// Velocity at the nodes; exactly zero at both walls.
    pub fn v(&self) -> Field {
        let f = &self.faces;
        let m = f.len() as isize;
        let at = |k: isize| -> f64 {
            if k < 0 {
                -f[(-k - 1) as usize]
            } else if k >= m {
                -f[(2 * m - 1 - k) as usize]
            } else {
                f[k as usize]
            }
        };
        let n = self.h.len();
        let values = (0..n as isize)
            .map(|i| {
                if i == 0 || i == n as isize - 1 {
                    0.0
                } else {
                    (9.0 * (at(i - 1) + at(i)) - (at(i - 2) + at(i + 1))) / 16.0
                }
            })
            .collect();
        Field::new(*self.h.grid(), values).expect("finite velocity")
    }

    /// Velocity at the midpoints between nodes.
    pub fn face_velocity(&self) -> &[f64] {
        &self.faces
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn grid(&self) -> &Grid1D {
        self.h.grid()
    }

    /// The energy the scheme dissipates exactly.
    pub fn scheme_energy(&self, sigma: f64) -> f64 {
        geometry(self.grid()).energy(self.h.values(), &self.faces, sigma)
    }
}

fn check_grid(g: &Grid1D) -> Result<()> {
    if g.layout() != Layout::Nodes {
        return Err(SheetError::InvalidGrid("Euler states use node grids".into()));
    }
    if g.n() < MIN_POINTS {
        return Err(SheetError::GridTooCoarse {
            n: g.n(),
            min: MIN_POINTS,
        });
    }
    Ok(())
}

fn geometry(g: &Grid1D) -> Geometry {
    Geometry::planar(g.n(), g.dx())
}

fn step_inner(
    state: &SheetState,
    p: &SheetParams,
    dt: f64,
    tol: f64,
    max_iters: usize,
) -> Result<(SheetState, StepStats)> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(SheetError::InvalidParameter {
            name: "dt",
            reason: format!("must be positive, got {dt}"),
        });
    }
    let g = geometry(state.grid());
    let sp = SchemeParams {
        sigma: p.sigma,
        kappa: p.nu,
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
    let h = Field::new(*state.grid(), a.h)?;
    let next = SheetState {
        h,
        faces: a.v,
        t,
    };
    Ok((
        next,
        StepStats {
            iterations: a.iterations,
            linear_residual: a.linear_residual,
        },
    ))
}

/// One step of length `dt` with the default iteration controls.
pub fn step(state: &SheetState, p: &SheetParams, dt: f64) -> Result<SheetState> {
    let c = StepControls::default();
    step_inner(state, p, dt, c.newton_tol, c.newton_max_iters).map(|(s, _)| s)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Termination {
    ReachedTEnd,
    RuptureDetected { t: f64, index: usize, h_min: f64 },
    SteadyState,
    /// The caller's stop condition held at a sample.
    StopCondition,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub final_state: SheetState,
    pub diagnostics: DiagnosticsSeries,
    pub termination: Termination,
    pub stats: RunStats,
}

/// Diagnostics of one state.
pub fn sample(state: &SheetState, p: &SheetParams) -> Result<DiagnosticSample> {
    let h = state.h();
    let v = state.v();
    let mut s = DiagnosticSample {
        t: state.t,
        mass: mass_euler(h)?,
        energy: Some(energy_euler(h, &v, p)?),
        entropy: Some(entropy_euler(h, &v, p)?),
        hx_l2sq: Some(hx_l2sq(h)?),
        h_min: Some(h.min()),
        h_max: Some(h.max()),
        ..Default::default()
    };
    s.extra.insert("v_l2".into(), norms(&v).l2);
    s.extra
        .insert("scheme_energy".into(), state.scheme_energy(p.sigma));
    Ok(s)
}

fn steady_distance(state: &SheetState, level: f64) -> f64 {
    let dh = state
        .h
        .values()
        .iter()
        .fold(0.0, |m: f64, h| m.max((h - level).abs()));
    let dv = state.faces.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
    dh + dv
}

pub fn run(state0: &SheetState, p: &SheetParams, ctrl: &StepControls) -> Result<RunOutcome> {
    run_observed(state0, p, ctrl, &[], |_| {})
}

/// As [`run`], also landing exactly on each of `snapshot_times` and handing
/// the state there to `observer`.
pub fn run_observed(
    state0: &SheetState,
    p: &SheetParams,
    ctrl: &StepControls,
    snapshot_times: &[f64],
    observer: impl FnMut(&SheetState),
) -> Result<RunOutcome> {
    drive(state0, p, ctrl, snapshot_times, observer, |_| false)
}

/// As [`run`], ending early at the first sample for which `until` holds.
pub fn run_until(
    state0: &SheetState,
    p: &SheetParams,
    ctrl: &StepControls,
    until: impl FnMut(&DiagnosticSample) -> bool,
) -> Result<RunOutcome> {
    drive(state0, p, ctrl, &[], |_| {}, until)
}

fn drive(
    state0: &SheetState,
    p: &SheetParams,
    ctrl: &StepControls,
    snapshot_times: &[f64],
    mut observer: impl FnMut(&SheetState),
    mut until: impl FnMut(&DiagnosticSample) -> bool,
) -> Result<RunOutcome> {
    ctrl.validate()?;
    let mut diagnostics = DiagnosticsSeries::new();
    let mut stats = RunStats::default();
    let mut state = state0.clone();
    let level = mass_euler(state.h())? / state.grid().length();
    let dx = state.grid().dx();
    let t0 = state.t;
    diagnostics.push(sample(&state, p)?)?;
    for &ts in snapshot_times {
        if (ts - t0).abs() <= 1e-12 {
            observer(&state);
        }
    }
    let finish = |state: SheetState,
                  mut diagnostics: DiagnosticsSeries,
                  termination: Termination,
                  stats: RunStats|
     -> Result<RunOutcome> {
        if diagnostics.last().map(|s| s.t) != Some(state.t) {
            diagnostics.push(sample(&state, p)?)?;
        }
        Ok(RunOutcome {
            final_state: state,
            diagnostics,
            termination,
            stats,
        })
    };
    if steady_distance(&state, level) <= STEADY_TOL {
        return finish(state, diagnostics, Termination::SteadyState, stats);
    }
    let mut stepper = Stepper::new(*ctrl);
    for stop in stop_times(t0, ctrl, snapshot_times) {
        while state.t < stop {
            let vmax = state.faces.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
            let limit = if vmax > 0.0 { ctrl.cfl * dx / vmax } else { f64::INFINITY };
            let dt = stepper.propose(state.t, stop, limit);
            match step_inner(&state, p, dt, ctrl.newton_tol, ctrl.newton_max_iters) {
                Ok((mut next, s)) => {
                    if (next.t - stop).abs() <= 1e-12 * stop.max(1.0) {
                        next.t = stop;
                    }
                    stats.record(&s);
                    stepper.accepted(dt);
                    state = next;
                    if steady_distance(&state, level) <= STEADY_TOL {
                        return finish(state, diagnostics, Termination::SteadyState, stats);
                    }
                }
                Err(SheetError::RuptureDetected { t, index, h_min }) => {
                    let termination = Termination::RuptureDetected { t, index, h_min };
                    return finish(state, diagnostics, termination, stats);
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
        if snapshot_times
            .iter()
            .any(|&ts| (ts - state.t).abs() <= 1e-12 * ts.max(1.0))
        {
            observer(&state);
        }
        if is_sample_time(state.t, t0, ctrl) {
            let s = sample(&state, p)?;
            let stop_now = until(&s);
            diagnostics.push(s)?;
            if stop_now {
                return finish(state, diagnostics, Termination::StopCondition, stats);
            }
        }
    }
    finish(state, diagnostics, Termination::ReachedTEnd, stats)
}

/// `(t, h_min)` at every sample.
pub fn min_height_trace(diag: &DiagnosticsSeries) -> Vec<(f64, f64)> {
    diag.track(|s| s.h_min)
}
