//! Mass-label coordinates and the zero-surface-tension stretch equation.
//!
//! The label `s ∈ [0, 1]` is the normalised cumulative mass, so that
//! `x_s = L u` and `u = K / h` with `K = M / L`. Without surface tension the
//! stretch obeys `u_t = (ν/L²)(u⁻² u_s)_s + f(s)`, advanced here in flux form
//! so that `∫u ds` is preserved to round-off. The stepping and stationary
//! routines take the diffusivity `ν/L²` as their `nu` argument.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SheetError};
use crate::functionals::{lagrangian_mass, DiagnosticSample, DiagnosticsSeries};
use crate::numerics::{integrate, norms, Field, Grid1D, Hermite, Layout, MIN_POINTS};
use crate::stepping::{is_sample_time, stop_times, RunStats, StepControls, StepStats, Stepper};

/// Tolerance on `|∫u ds − 1|` for a valid state.
pub const UNIT_MASS_TOL: f64 = 1e-10;
/// Tolerance on `|∫f ds|` for data to count as compatible with the walls.
pub const COMPATIBILITY_TOL: f64 = 1e-6;
/// Below this `‖u_t‖∞` a stretch run is declared steady.
pub const PME_STEADY_TOL: f64 = 1e-11;

const NEWTON_TOL: f64 = 1e-11;
const NEWTON_MAX_ITERS: usize = 30;

/// Stretch on a node grid over `s ∈ [0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LagrangianState {
    u: Field,
    t: f64,
}

impl LagrangianState {
    pub fn new(u: Field, t: f64) -> Result<Self> {
        check_label_grid(u.grid())?;
        let m = lagrangian_mass(&u)?;
        if (m - 1.0).abs() > UNIT_MASS_TOL {
            return Err(SheetError::InvalidState(format!(
                "stretch integrates to {m}, expected 1"
            )));
        }
        Ok(Self { u, t })
    }

    /// Rescales `u` to unit integral first.
    pub fn normalised(u: Field, t: f64) -> Result<Self> {
        let m = lagrangian_mass(&u)?;
        Self::new(u.map(|v| v / m)?, t)
    }

    pub fn u(&self) -> &Field {
        &self.u
    }

    pub fn t(&self) -> f64 {
        self.t
    }
}

fn check_label_grid(g: &Grid1D) -> Result<()> {
    if g.layout() != Layout::Nodes || g.length() != 1.0 {
        return Err(SheetError::InvalidGrid(
            "labels live on a node grid over [0, 1]".into(),
        ));
    }
    if g.n() < MIN_POINTS {
        return Err(SheetError::GridTooCoarse {
            n: g.n(),
            min: MIN_POINTS,
        });
    }
    Ok(())
}

/// Source term of the stretch equation; integrates to zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForcingProfile {
    f: Field,
}

impl ForcingProfile {
    pub fn new(f: Field) -> Result<Self> {
        check_label_grid(f.grid())?;
        let integral = integrate(&f);
        if integral.abs() > 1e-8 {
            return Err(SheetError::IncompatibleData { integral });
        }
        Ok(Self { f })
    }

    pub fn zero(grid: Grid1D) -> Result<Self> {
        Self::new(Field::constant(grid, 0.0)?)
    }

    pub fn f(&self) -> &Field {
        &self.f
    }

    pub fn sup(&self) -> f64 {
        norms(&self.f).linf
    }
}

/// Stationary solution of the forced stretch equation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationaryProfile {
    pub u_inf: Field,
    /// Height on the uniform grid over `[0, L]`.
    pub h_inf: Field,
    /// Positions of the labels.
    pub x_inf: Field,
    pub c0: f64,
    /// `K = M / L`.
    pub k: f64,
}

impl StationaryProfile {
    /// `K / u∞`, the height carried by each label.
    pub fn height_at_labels(&self) -> Field {
        let k = self.k;
        self.u_inf.map(|u| k / u).expect("positive stretch")
    }
}

/// Label-to-position map of an initial height.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialMap {
    pub x_of_s: Field,
    /// `M / L`.
    pub k: f64,
}

/// Central differences inside, fourth-order one-sided stencils at both ends.
fn gradient(values: &[f64], dx: f64) -> Vec<f64> {
    let n = values.len();
    let one_sided = |f: [f64; 5]| {
        (-25.0 * f[0] + 48.0 * f[1] - 36.0 * f[2] + 16.0 * f[3] - 3.0 * f[4]) / (12.0 * dx)
    };
    (0..n)
        .map(|i| {
            if i == 0 {
                one_sided([values[0], values[1], values[2], values[3], values[4]])
            } else if i == n - 1 {
                let v = values;
                -one_sided([v[n - 1], v[n - 2], v[n - 3], v[n - 4], v[n - 5]])
            } else {
                (values[i + 1] - values[i - 1]) / (2.0 * dx)
            }
        })
        .collect()
}

/// Running integral by the trapezoid rule with the end-slope correction,
/// fourth-order for smooth data.
fn cumulative(values: &[f64], slopes: &[f64], dx: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    let mut acc = 0.0;
    out.push(0.0);
    for i in 0..values.len() - 1 {
        acc += 0.5 * dx * (values[i] + values[i + 1]) + dx * dx * (slopes[i] - slopes[i + 1]) / 12.0;
        out.push(acc);
    }
    out
}

fn label_grid(n: usize) -> Result<Grid1D> {
    Grid1D::nodes(n, 1.0)
}

fn require_node_grid(g: &Grid1D) -> Result<()> {
    if g.layout() != Layout::Nodes {
        return Err(SheetError::InvalidGrid("expected a node grid".into()));
    }
    if g.n() < MIN_POINTS {
        return Err(SheetError::GridTooCoarse {
            n: g.n(),
            min: MIN_POINTS,
        });
    }
    Ok(())
}

/// `x(s)` on a label grid with as many points as `h0`, from `s(x) = ∫₀ˣ h₀ / M`.
pub fn initial_map(h0: &Field) -> Result<InitialMap> {
    require_node_grid(h0.grid())?;
    h0.require_positive("height")?;
    let g = h0.grid();
    let dx = g.dx();
    let h = h0.values();
    let hx = gradient(h, dx);
    let mass = cumulative(h, &hx, dx);
    let total = *mass.last().expect("non-empty");
    let s: Vec<f64> = mass.iter().map(|m| m / total).collect();
    // dx/ds = M / h
    let slopes: Vec<f64> = h.iter().map(|hi| total / hi).collect();
    let map = Hermite::new(s, g.coords(), slopes)?;
    let labels = label_grid(g.n())?;
    let mut x = map.eval_many(&labels.coords());
    x[0] = 0.0;
    *x.last_mut().expect("non-empty") = g.length();
    Ok(InitialMap {
        x_of_s: Field::new(labels, x)?,
        k: total / g.length(),
    })
}

fn interpolant(f: &Field) -> Result<Hermite> {
    Hermite::pchip(f.grid().coords(), f.values().to_vec(), (0.0, 0.0))
}

/// `u(s) = K / h(x(s))` rescaled to unit integral, with `K = M / L`.
pub fn to_lagrangian(h: &Field, x_of_s: &Field, mass: f64) -> Result<LagrangianState> {
    require_node_grid(h.grid())?;
    h.require_positive("height")?;
    let k = mass / h.grid().length();
    let hi = interpolant(h)?;
    let u = x_of_s.map(|x| k / hi.eval(x))?;
    LagrangianState::normalised(u, 0.0).map(|s| LagrangianState { t: 0.0, ..s })
}

/// Height on the uniform grid over `[0, length]`, and the label positions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EulerProfile {
    pub h: Field,
    pub x_of_s: Field,
}

/// Inverse of [`to_lagrangian`]: positions from `x = L ∫₀ˢ u`, heights `K / u`.
pub fn from_lagrangian(state: &LagrangianState, mass: f64, length: f64) -> Result<EulerProfile> {
    let u = state.u();
    let g = *u.grid();
    let ds = g.dx();
    let us = gradient(u.values(), ds);
    let mut x: Vec<f64> = cumulative(u.values(), &us, ds)
        .into_iter()
        .map(|c| c * length)
        .collect();
    x[0] = 0.0;
    *x.last_mut().expect("non-empty") = length;
    let k = mass / length;
    let heights: Vec<f64> = u.values().iter().map(|v| k / v).collect();
    let hi = Hermite::pchip(x.clone(), heights, (0.0, 0.0))?;
    let xg = Grid1D::nodes(g.n(), length)?;
    let h = Field::new(xg, hi.eval_many(&xg.coords()))?;
    Ok(EulerProfile {
        h,
        x_of_s: Field::new(g, x)?,
    })
}

/// `f(s) = (K/h₀)[v₀ + ν h₀ₓ/h₀]ₓ` at the labels of `h0`, shifted to exactly
/// zero discrete mean after the compatibility check.
pub fn forcing(h0: &Field, v0: &Field, nu: f64) -> Result<ForcingProfile> {
    require_node_grid(h0.grid())?;
    h0.require_positive("height")?;
    if v0.grid() != h0.grid() {
        return Err(SheetError::LengthMismatch {
            expected: h0.len(),
            got: v0.len(),
        });
    }
    let grid = h0.grid();
    let dx = grid.dx();
    let h = h0.values();
    let hx = gradient(h, dx);
    let g: Vec<f64> = (0..h.len())
        .map(|i| v0.values()[i] + nu * hx[i] / h[i])
        .collect();
    let n = g.len();
    // ∫ f ds = (g(L) − g(0)) / L
    let integral = (g[n - 1] - g[0]) / grid.length();
    if integral.abs() > COMPATIBILITY_TOL {
        return Err(SheetError::IncompatibleData { integral });
    }
    let map = initial_map(h0)?;
    let gx = gradient(&g, dx);
    let k = map.k;
    let density: Vec<f64> = (0..n).map(|i| k * gx[i] / h[i]).collect();
    let ends = (
        (density[1] - density[0]) / dx,
        (density[n - 1] - density[n - 2]) / dx,
    );
    let fi = Hermite::pchip(grid.coords(), density, ends)?;
    let f = map.x_of_s.map(|x| fi.eval(x))?;
    let mean = integrate(&f);
    ForcingProfile::new(f.map(|v| v - mean)?)
}

/// `ν ∂_s(u⁻² u_s) + f` in flux form: cell `i` receives the difference of the
/// fluxes `ν (z_i − z_{i+1}) / ds` with `z = 1/u`, and no flux through the walls.
fn operator(u: &[f64], f: &[f64], w: &[f64], ds: f64, diff: f64, out: &mut [f64]) {
    let n = u.len();
    out.copy_from_slice(f);
    for i in 0..n - 1 {
        let flux = diff * (1.0 / u[i] - 1.0 / u[i + 1]) / ds;
        out[i] += flux / w[i];
        out[i + 1] -= flux / w[i + 1];
    }
}

/// Solves `u − c·L(u) = rhs` by damped Newton from `guess`.
fn implicit_solve(
    guess: &[f64],
    rhs: &[f64],
    c: f64,
    f: &[f64],
    w: &[f64],
    ds: f64,
    diff: f64,
) -> Result<(Vec<f64>, usize, f64)> {
    let n = guess.len();
    let mut u = guess.to_vec();
    let mut lu = vec![0.0; n];
    let mut worst: f64 = 0.0;
    for iteration in 1..=NEWTON_MAX_ITERS {
        operator(&u, f, w, ds, diff, &mut lu);
        let g: Vec<f64> = (0..n).map(|i| u[i] - c * lu[i] - rhs[i]).collect();
        // Jacobian: I − c ∂L/∂u, tridiagonal
        let mut sys = crate::numerics::BandedSystem::identity(n, 1);
        for i in 0..n - 1 {
            // ∂flux/∂u_i = −diff/(ds u_i²), ∂flux/∂u_{i+1} = diff/(ds u_{i+1}²)
            let a = -diff / (ds * u[i] * u[i]);
            let b = diff / (ds * u[i + 1] * u[i + 1]);
            sys.add(i, i, -c * a / w[i]);
            sys.add(i, i + 1, -c * b / w[i]);
            sys.add(i + 1, i, c * a / w[i + 1]);
            sys.add(i + 1, i + 1, c * b / w[i + 1]);
        }
        sys.set_rhs(g.iter().map(|x| -x).collect())?;
        let delta = crate::numerics::solve_banded(&sys)
            .map_err(|e| SheetError::StepRejected(e.to_string()))?;
        worst = worst.max(sys.relative_residual(&delta));
        let mut lambda = 1.0;
        loop {
            if (0..n).all(|i| u[i] + lambda * delta[i] > 0.0) {
                break;
            }
            lambda *= 0.5;
            if lambda < 1e-6 {
                return Err(SheetError::StepRejected(
                    "Newton update cannot keep the stretch positive".into(),
                ));
            }
        }
        for i in 0..n {
            u[i] += lambda * delta[i];
        }
        let size = delta.iter().fold(0.0, |m: f64, d| m.max(d.abs())) * lambda;
        if !size.is_finite() {
            return Err(SheetError::StepRejected("Newton update not finite".into()));
        }
        if size <= NEWTON_TOL && lambda == 1.0 {
            return Ok((u, iteration, worst));
        }
    }
    Err(SheetError::StepRejected(format!(
        "Newton did not converge in {NEWTON_MAX_ITERS} iterations"
    )))
}

const GAMMA: f64 = 2.0 - std::f64::consts::SQRT_2;

fn pme_step_inner(
    state: &LagrangianState,
    f: &ForcingProfile,
    nu: f64,
    dt: f64,
) -> Result<(LagrangianState, StepStats)> {
    if !(nu > 0.0) {
        return Err(SheetError::InvalidParameter {
            name: "nu",
            reason: format!("must be positive, got {nu}"),
        });
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(SheetError::InvalidParameter {
            name: "dt",
            reason: format!("must be positive, got {dt}"),
        });
    }
    if f.f().grid() != state.u.grid() {
        return Err(SheetError::LengthMismatch {
            expected: state.u.len(),
            got: f.f().len(),
        });
    }
    let g = state.u.grid();
    let w = g.weights();
    let ds = g.dx();
    let u0 = state.u.values();
    let fv = f.f().values();
    let n = u0.len();
    let mut l0 = vec![0.0; n];
    operator(u0, fv, &w, ds, nu, &mut l0);

    // trapezoid stage to t + γ dt
    let c1 = 0.5 * GAMMA * dt;
    let rhs1: Vec<f64> = (0..n).map(|i| u0[i] + c1 * l0[i]).collect();
    let (ug, it1, r1) = implicit_solve(u0, &rhs1, c1, fv, &w, ds, nu)?;
    // BDF2 stage to t + dt
    let c2 = (1.0 - GAMMA) / (2.0 - GAMMA) * dt;
    // (1/(γ(2−γ))) u_γ − ((1−γ)²/(γ(2−γ))) u_n, arranged to be exact for constants
    let b = (1.0 - GAMMA).powi(2) / (GAMMA * (2.0 - GAMMA));
    let rhs2: Vec<f64> = (0..n).map(|i| ug[i] + b * (ug[i] - u0[i])).collect();
    let (u1, it2, r2) = implicit_solve(&ug, &rhs2, c2, fv, &w, ds, nu)?;

    let t = state.t + dt;
    let u_min = u1.iter().copied().fold(f64::INFINITY, f64::min);
    if !(u_min > 0.0) {
        return Err(SheetError::PositivityLost { t, u_min });
    }
    Ok((
        LagrangianState {
            u: Field::new(*g, u1)?,
            t,
        },
        StepStats {
            iterations: it1 + it2,
            linear_residual: r1.max(r2),
        },
    ))
}

/// One second-order, L-stable step of `u_t = ν(u⁻²u_s)_s + f`.
pub fn pme_step(
    state: &LagrangianState,
    f: &ForcingProfile,
    nu: f64,
    dt: f64,
) -> Result<LagrangianState> {
    pme_step_inner(state, f, nu, dt).map(|(s, _)| s)
}

/// `‖ν(u⁻²u_s)_s + f‖∞`.
pub fn stretch_rate(state: &LagrangianState, f: &ForcingProfile, nu: f64) -> f64 {
    let g = state.u.grid();
    let mut out = vec![0.0; g.n()];
    operator(state.u.values(), f.f().values(), &g.weights(), g.dx(), nu, &mut out);
    out.iter().fold(0.0, |m: f64, v| m.max(v.abs()))
}

/// The a-priori bounds on the stretch: `u ≤ ‖u₀‖∞ + ‖f‖∞ t`, and whether
/// the data meet the positivity hypothesis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaxPrincipleEnvelope {
    pub upper: f64,
    pub lower_positive: bool,
}

pub fn max_principle_envelope(u0: &Field, f: &ForcingProfile, t: f64) -> MaxPrincipleEnvelope {
    let upper = norms(u0).linf + f.sup() * t;
    MaxPrincipleEnvelope {
        upper,
        lower_positive: u0.min() > 0.0 && upper.is_finite(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PmeTermination {
    ReachedTEnd,
    SteadyState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PmeOutcome {
    pub final_state: LagrangianState,
    pub diagnostics: DiagnosticsSeries,
    pub termination: PmeTermination,
    pub stats: RunStats,
}

fn pme_sample(
    state: &LagrangianState,
    u0: &Field,
    f: &ForcingProfile,
    nu: f64,
) -> Result<DiagnosticSample> {
    let u = state.u();
    let dev = u.map(|v| (v - 1.0) * (v - 1.0))?;
    let mut s = DiagnosticSample {
        t: state.t,
        mass: lagrangian_mass(u)?,
        u_minus_1_l2sq: Some(integrate(&dev)),
        ..Default::default()
    };
    let env = max_principle_envelope(u0, f, state.t);
    s.extra.insert("u_min".into(), u.min());
    s.extra.insert("u_max".into(), u.max());
    s.extra.insert("u_upper_bound".into(), env.upper);
    s.extra.insert("u_t_inf".into(), stretch_rate(state, f, nu));
    Ok(s)
}

/// Adaptive TR-BDF2 integration to `ctrl.t_end` or a steady state.
pub fn pme_run(
    state0: &LagrangianState,
    f: &ForcingProfile,
    nu: f64,
    ctrl: &StepControls,
) -> Result<PmeOutcome> {
    pme_run_observed(state0, f, nu, ctrl, &[], |_| {})
}

/// As [`pme_run`], landing on `snapshot_times` and handing each state there to `observer`.
pub fn pme_run_observed(
    state0: &LagrangianState,
    f: &ForcingProfile,
    nu: f64,
    ctrl: &StepControls,
    snapshot_times: &[f64],
    mut observer: impl FnMut(&LagrangianState),
) -> Result<PmeOutcome> {
    ctrl.validate()?;
    let u0 = state0.u.clone();
    let mut state = state0.clone();
    let mut diagnostics = DiagnosticsSeries::new();
    let mut stats = RunStats::default();
    let t0 = state.t;
    diagnostics.push(pme_sample(&state, &u0, f, nu)?)?;
    for &ts in snapshot_times {
        if (ts - t0).abs() <= 1e-12 {
            observer(&state);
        }
    }
    let finish = |state: LagrangianState,
                  mut diagnostics: DiagnosticsSeries,
                  termination: PmeTermination,
                  stats: RunStats|
     -> Result<PmeOutcome> {
        if diagnostics.last().map(|s| s.t) != Some(state.t) {
            diagnostics.push(pme_sample(&state, &u0, f, nu)?)?;
        }
        Ok(PmeOutcome {
            final_state: state,
            diagnostics,
            termination,
            stats,
        })
    };
    if stretch_rate(&state, f, nu) <= PME_STEADY_TOL {
        return finish(state, diagnostics, PmeTermination::SteadyState, stats);
    }
    let mut stepper = Stepper::new(*ctrl);
    for stop in stop_times(t0, ctrl, snapshot_times) {
        while state.t < stop {
            let dt = stepper.propose(state.t, stop, f64::INFINITY);
            match pme_step_inner(&state, f, nu, dt) {
                Ok((mut next, s)) => {
                    if (next.t - stop).abs() <= 1e-12 * stop.max(1.0) {
                        next.t = stop;
                    }
                    stats.record(&s);
                    stepper.accepted(dt);
                    state = next;
                    if stretch_rate(&state, f, nu) <= PME_STEADY_TOL {
                        return finish(state, diagnostics, PmeTermination::SteadyState, stats);
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
            diagnostics.push(pme_sample(&state, &u0, f, nu)?)?;
        }
        if snapshot_times
            .iter()
            .any(|&ts| (ts - state.t).abs() <= 1e-12 * ts.max(1.0))
        {
            observer(&state);
        }
    }
    finish(state, diagnostics, PmeTermination::ReachedTEnd, stats)
}

/// Solves `ν(1/u∞)_ss = f` with zero-flux ends and `∫u∞ ds = 1`.
///
/// Writing `1/u∞ = F − c0` with `F` the zero-mean particular solution, `c0`
/// is found by bisection on the unit-mass condition. The result is an exact
/// fixed point of the discrete operator used by [`pme_step`].
pub fn stationary_profile(
    f: &ForcingProfile,
    nu: f64,
    mass: f64,
    length: f64,
) -> Result<StationaryProfile> {
    if !(nu > 0.0) {
        return Err(SheetError::InvalidParameter {
            name: "nu",
            reason: format!("must be positive, got {nu}"),
        });
    }
    let g = *f.f().grid();
    let w = g.weights();
    let ds = g.dx();
    let fv = f.f().values();
    let n = g.n();
    // z_{i+1} − z_i = (ds/ν) Σ_{j≤i} w_j f_j
    let mut z = vec![0.0; n];
    let mut flux = 0.0;
    for i in 0..n - 1 {
        flux += w[i] * fv[i];
        z[i + 1] = z[i] + ds * flux / nu;
    }
    let mean: f64 = z.iter().zip(&w).map(|(a, b)| a * b).sum();
    let big_f: Vec<f64> = z.iter().map(|v| v - mean).collect();
    let f_min = big_f.iter().copied().fold(f64::INFINITY, f64::min);
    let f_sup = big_f.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
    let unit_mass = |c0: f64| -> f64 {
        big_f
            .iter()
            .zip(&w)
            .map(|(fi, wi)| wi / (fi - c0))
            .sum::<f64>()
            - 1.0
    };
    // mass decreases from +∞ as c0 → min F⁻ to 0⁺ as c0 → −∞
    let mut lo = -(f_sup + 1.0);
    while unit_mass(lo) > 0.0 {
        lo = 2.0 * lo - 1.0;
        if lo < -1e12 {
            return Err(SheetError::NoStationaryProfile(
                "no lower bracket for the integration constant".into(),
            ));
        }
    }
    let mut hi = f_min;
    if unit_mass(lo) == 0.0 {
        hi = lo;
    } else if !(unit_mass(lo) < 0.0) {
        return Err(SheetError::NoStationaryProfile(
            "unit-mass condition cannot be bracketed".into(),
        ));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if unit_mass(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let c0 = 0.5 * (lo + hi);
    let u: Vec<f64> = big_f.iter().map(|fi| 1.0 / (fi - c0)).collect();
    if u.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(SheetError::NoStationaryProfile(
            "stretch not positive for any admissible constant".into(),
        ));
    }
    // renormalise the last round-off of the bisection
    let u_field = Field::new(g, u)?;
    let state = LagrangianState::normalised(u_field, 0.0)?;
    let profile = from_lagrangian(&state, mass, length)?;
    Ok(StationaryProfile {
        u_inf: state.u,
        h_inf: profile.h,
        x_inf: profile.x_of_s,
        c0,
        k: mass / length,
    })
}

/// `‖ν(1/u)_ss − f‖∞` in the discrete flux form.
pub fn stationary_residual(u: &Field, f: &ForcingProfile, nu: f64) -> f64 {
    let g = u.grid();
    let mut out = vec![0.0; g.n()];
    operator(u.values(), f.f().values(), &g.weights(), g.dx(), nu, &mut out);
    out.iter().fold(0.0, |m: f64, v| m.max(v.abs()))
}
