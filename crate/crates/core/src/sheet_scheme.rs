//! Staggered conservative scheme shared by the planar and radial solvers.
//!
//! Heights live in control volumes, velocities on the interior faces between
//! them; the wall faces carry zero velocity. One step is the implicit
//! midpoint rule written so that the discrete energy
//! `½ Σ V_f H_f v_f² + ½ σ Σ V_f g_f²` can only decrease, solved by fixed-point
//! iteration with the nonlinear coefficients frozen at the previous iterate.

use crate::error::{Result, SheetError};
use crate::numerics::{solve_banded, BandedSystem};

/// Below this height the sheet is considered ruptured.
pub const RUPTURE_HEIGHT: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Geometry {
    /// Control-volume measures, one per height unknown.
    pub vol: Vec<f64>,
    /// Face metric for each interior face (1 in the plane, `r` in the radial case).
    pub metric: Vec<f64>,
    /// Distance between neighbouring height unknowns.
    pub d: f64,
    /// Face radii when the hoop-stress term is present.
    pub hoop_radius: Option<Vec<f64>>,
}

impl Geometry {
    /// Node-centred planar grid with half volumes at the walls.
    pub fn planar(n: usize, dx: f64) -> Self {
        let mut vol = vec![dx; n];
        vol[0] = 0.5 * dx;
        vol[n - 1] = 0.5 * dx;
        Self {
            vol,
            metric: vec![1.0; n - 1],
            d: dx,
            hoop_radius: None,
        }
    }

    /// `cells` radial cells on `[0, 1]` with centres `(j + ½) dr`.
    pub fn radial(cells: usize, dr: f64) -> Self {
        let vol = (0..cells).map(|j| (j as f64 + 0.5) * dr * dr).collect();
        let faces: Vec<f64> = (1..cells).map(|k| k as f64 * dr).collect();
        Self {
            vol,
            metric: faces.clone(),
            d: dr,
            hoop_radius: Some(faces),
        }
    }

    pub fn cells(&self) -> usize {
        self.vol.len()
    }

    pub fn faces(&self) -> usize {
        self.metric.len()
    }

    fn face_volume(&self, f: usize) -> f64 {
        self.metric[f] * self.d
    }

    pub fn mass(&self, h: &[f64]) -> f64 {
        self.vol.iter().zip(h).map(|(w, h)| w * h).sum()
    }

    /// Face heights as the mean of the two neighbouring cells.
    pub fn face_heights(&self, h: &[f64]) -> Vec<f64> {
        h.windows(2).map(|p| 0.5 * (p[0] + p[1])).collect()
    }

    /// `(kinetic, surface)` parts of the conserved-or-dissipated energy.
    pub fn energy_parts(&self, h: &[f64], v: &[f64]) -> (f64, f64) {
        let hf = self.face_heights(h);
        let mut kinetic = 0.0;
        let mut surface = 0.0;
        for f in 0..self.faces() {
            let vf = self.face_volume(f);
            let g = (h[f + 1] - h[f]) / self.d;
            kinetic += 0.5 * vf * hf[f] * v[f] * v[f];
            surface += 0.5 * vf * g * g;
        }
        (kinetic, surface)
    }

    pub fn energy(&self, h: &[f64], v: &[f64], sigma: f64) -> f64 {
        let (k, s) = self.energy_parts(h, v);
        k + sigma * s
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct SchemeParams {
    pub sigma: f64,
    /// Viscous prefactor: ν in the plane, 4μ in the radial case.
    pub kappa: f64,
    pub tol: f64,
    pub max_iters: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Advanced {
    pub h: Vec<f64>,
    pub v: Vec<f64>,
    pub iterations: usize,
    pub linear_residual: f64,
}

/// Coefficients frozen for one fixed-point iteration.
struct Frozen {
    /// Midpoint cell heights.
    hbar: Vec<f64>,
    /// Midpoint face heights.
    hface: Vec<f64>,
    /// Kinetic pressure in each cell.
    pkin: Vec<f64>,
}

impl Frozen {
    fn new(g: &Geometry, h: &[f64], hk: &[f64], v: &[f64], vk: &[f64]) -> Self {
        let hbar: Vec<f64> = h.iter().zip(hk).map(|(a, b)| 0.5 * (a + b)).collect();
        let hface = g.face_heights(&hbar);
        let mut pkin = vec![0.0; g.cells()];
        for f in 0..g.faces() {
            let q = 0.5 * (v[f] * v[f] + vk[f] * vk[f]);
            let share = g.face_volume(f) * q;
            pkin[f] += share;
            pkin[f + 1] += share;
        }
        for (p, w) in pkin.iter_mut().zip(&g.vol) {
            *p /= 4.0 * w;
        }
        Self { hbar, hface, pkin }
    }
}

/// New heights from the midpoint velocity `vbar` by the flux-form continuity update.
fn continuity(g: &Geometry, fz: &Frozen, h: &[f64], vbar: &[f64], dt: f64, out: &mut [f64]) {
    out.copy_from_slice(h);
    for f in 0..g.faces() {
        let flux = g.metric[f] * fz.hface[f] * vbar[f] * dt;
        out[f] -= flux / g.vol[f];
        out[f + 1] += flux / g.vol[f + 1];
    }
}

/// Momentum residual `R(x)` for the candidate new velocity `x`.
///
/// Passing zero for `v`, `h` and `with_kinetic = false` gives the linear part.
#[allow(clippy::too_many_arguments)]
fn residual(
    g: &Geometry,
    p: &SchemeParams,
    fz: &Frozen,
    x: &[f64],
    v: &[f64],
    h: &[f64],
    with_kinetic: bool,
    dt: f64,
    out: &mut [f64],
) {
    let nc = g.cells();
    let nf = g.faces();
    let vbar: Vec<f64> = x.iter().zip(v).map(|(a, b)| 0.5 * (a + b)).collect();
    let mut hn = vec![0.0; nc];
    continuity(g, fz, h, &vbar, dt, &mut hn);
    // midpoint height gradient on faces, zero at the walls
    let grad: Vec<f64> = (0..nf)
        .map(|f| 0.5 * ((h[f + 1] + hn[f + 1]) - (h[f] + hn[f])) / g.d)
        .collect();
    let mut pressure = vec![0.0; nc];
    for c in 0..nc {
        let left = if c > 0 { g.metric[c - 1] * grad[c - 1] } else { 0.0 };
        let right = if c < nf { g.metric[c] * grad[c] } else { 0.0 };
        pressure[c] = p.sigma * (left - right) / g.vol[c];
        if with_kinetic {
            pressure[c] += fz.pkin[c];
        }
    }
    let q: Vec<f64> = (0..nc)
        .map(|c| {
            let left = if c > 0 { g.metric[c - 1] * vbar[c - 1] } else { 0.0 };
            let right = if c < nf { g.metric[c] * vbar[c] } else { 0.0 };
            fz.hbar[c] * (right - left) / g.vol[c]
        })
        .collect();
    for f in 0..nf {
        let mut visc = (q[f + 1] - q[f]) / g.d;
        if let Some(r) = &g.hoop_radius {
            visc -= vbar[f] * (fz.hbar[f + 1] - fz.hbar[f]) / (2.0 * r[f] * g.d);
        }
        visc *= p.kappa / fz.hface[f];
        out[f] = x[f] - v[f] + dt * (pressure[f + 1] - pressure[f]) / g.d - dt * visc;
    }
}

fn inf_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// One implicit-midpoint step from `(h, v)`.
pub(crate) fn advance(
    g: &Geometry,
    p: &SchemeParams,
    h: &[f64],
    v: &[f64],
    dt: f64,
) -> Result<Advanced> {
    let nc = g.cells();
    let nf = g.faces();
    let zeros_v = vec![0.0; nf];
    let zeros_h = vec![0.0; nc];
    let scale = h.iter().chain(v).fold(0.0, |m: f64, x| m.max(x.abs()));
    let mut hk = h.to_vec();
    let mut vk = v.to_vec();
    let mut linear_residual: f64 = 0.0;
    let mut previous_update = f64::INFINITY;
    for iteration in 1..=p.max_iters {
        let fz = Frozen::new(g, h, &hk, v, &vk);
        if let Some(f) = fz.hface.iter().position(|&x| !(x > 0.0)) {
            return Err(SheetError::StepRejected(format!(
                "midpoint face height {:e} at face {f}",
                fz.hface[f]
            )));
        }
        let mut sys = BandedSystem::from_operator(nf, 2, |x, out| {
            residual(g, p, &fz, x, &zeros_v, &zeros_h, false, dt, out)
        });
        let mut r0 = vec![0.0; nf];
        residual(g, p, &fz, &zeros_v, v, h, true, dt, &mut r0);
        sys.set_rhs(r0.iter().map(|r| -r).collect())?;
        let x = solve_banded(&sys).map_err(|e| SheetError::StepRejected(e.to_string()))?;
        linear_residual = linear_residual.max(sys.relative_residual(&x));

        let vbar: Vec<f64> = x.iter().zip(v).map(|(a, b)| 0.5 * (a + b)).collect();
        let mut hn = vec![0.0; nc];
        continuity(g, &fz, h, &vbar, dt, &mut hn);

        let update = inf_diff(&x, &vk).max(inf_diff(&hn, &hk));
        let step = inf_diff(&x, v).max(inf_diff(&hn, h));
        hk = hn;
        vk = x;
        let stalled = iteration > 1 && update >= previous_update && update <= p.tol;
        if update <= p.tol * step.min(1.0) || update <= 1e-15 * scale || stalled {
            return Ok(Advanced {
                h: hk,
                v: vk,
                iterations: iteration,
                linear_residual,
            });
        }
        if !update.is_finite() || (iteration > 3 && update > previous_update) {
            return Err(SheetError::StepRejected(format!(
                "fixed-point iteration diverging (update {update:e})"
            )));
        }
        previous_update = update;
    }
    Err(SheetError::StepRejected(format!(
        "fixed-point iteration did not converge in {} iterations",
        p.max_iters
    )))
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;

    fn params(sigma: f64, kappa: f64) -> SchemeParams {
        SchemeParams {
            sigma,
            kappa,
            tol: 1e-12,
            max_iters: 60,
        }
    }

    fn planar_data(n: usize) -> (Geometry, Vec<f64>, Vec<f64>) {
        let dx = 1.0 / (n - 1) as f64;
        let g = Geometry::planar(n, dx);
        let h = (0..n).map(|i| 1.0 + 0.3 * (PI * i as f64 * dx).cos()).collect();
        let v = (0..n - 1)
            .map(|f| 0.8 * (2.0 * PI * (f as f64 + 0.5) * dx).sin())
            .collect();
        (g, h, v)
    }

    #[test]
    fn flat_state_is_fixed() {
        let g = Geometry::planar(33, 1.0 / 32.0);
        let h = vec![2.0; 33];
        let v = vec![0.0; 32];
        let a = advance(&g, &params(1.0, 1.0), &h, &v, 0.1).unwrap();
        assert_eq!(a.h, h);
        assert_eq!(a.v, v);
    }

    #[test]
    fn planar_step_conserves_mass_and_dissipates_exactly() {
        let (g, h, v) = planar_data(65);
        let p = params(1.0, 0.5);
        let e0 = g.energy(&h, &v, p.sigma);
        let a = advance(&g, &p, &h, &v, 1e-3).unwrap();
        assert!((g.mass(&a.h) - g.mass(&h)).abs() <= 1e-15 * g.mass(&h));
        // energy drop equals the discrete viscous dissipation
        let hbar: Vec<f64> = h.iter().zip(&a.h).map(|(x, y)| 0.5 * (x + y)).collect();
        let vbar: Vec<f64> = v.iter().zip(&a.v).map(|(x, y)| 0.5 * (x + y)).collect();
        let mut diss = 0.0;
        for c in 0..g.cells() {
            let left = if c > 0 { vbar[c - 1] } else { 0.0 };
            let right = if c < g.faces() { vbar[c] } else { 0.0 };
            let div = (right - left) / g.vol[c];
            diss += g.vol[c] * hbar[c] * div * div;
        }
        let e1 = g.energy(&a.h, &a.v, p.sigma);
        assert!(e1 < e0);
        assert!(((e0 - e1) - 1e-3 * p.kappa * diss).abs() <= 1e-11 * e0);
    }

    #[test]
    fn inviscid_step_conserves_energy() {
        let (g, h, v) = planar_data(65);
        let p = params(1.0, 0.0);
        let a = advance(&g, &p, &h, &v, 1e-3).unwrap();
        let e0 = g.energy(&h, &v, 1.0);
        assert!((g.energy(&a.h, &a.v, 1.0) - e0).abs() <= 1e-11 * e0);
    }

    #[test]
    fn radial_step_dissipates() {
        let cells = 64;
        let dr = 1.0 / cells as f64;
        let g = Geometry::radial(cells, dr);
        let h: Vec<f64> = (0..cells)
            .map(|j| 1.0 + 0.2 * (PI * (j as f64 + 0.5) * dr).cos())
            .collect();
        let v: Vec<f64> = (1..cells)
            .map(|k| {
                let r = k as f64 * dr;
                2.0 * r * (1.0 - r)
            })
            .collect();
        let p = params(1.0, 4.0);
        let mut hs = h.clone();
        let mut vs = v.clone();
        let mut e = g.energy(&hs, &vs, 1.0);
        for _ in 0..20 {
            let a = advance(&g, &p, &hs, &vs, 1e-3).unwrap();
            let e1 = g.energy(&a.h, &a.v, 1.0);
            assert!(e1 <= e);
            assert!((g.mass(&a.h) - g.mass(&h)).abs() <= 1e-14);
            e = e1;
            hs = a.h;
            vs = a.v;
        }
    }
}
