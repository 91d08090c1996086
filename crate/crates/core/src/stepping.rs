//! Step-size control shared by the time integrators.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SheetError};

/// Step-size and iteration controls shared by all time integrators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepControls {
    pub dt_init: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    pub cfl: f64,
    pub newton_tol: f64,
    pub newton_max_iters: usize,
    pub t_end: f64,
    pub sample_every: f64,
}

impl Default for StepControls {
    fn default() -> Self {
        Self {
            dt_init: 1e-4,
            dt_min: 1e-10,
            dt_max: 1e-2,
            cfl: 0.5,
            newton_tol: 1e-10,
            newton_max_iters: 50,
            t_end: 1.0,
            sample_every: 0.01,
        }
    }
}

impl StepControls {
    pub fn validate(&self) -> Result<()> {
        let bad = |name: &'static str, reason: String| {
            Err(SheetError::InvalidParameter { name, reason })
        };
        if !(self.dt_min > 0.0 && self.dt_min <= self.dt_init && self.dt_init <= self.dt_max) {
            return bad(
                "dt_init",
                format!(
                    "need 0 < dt_min <= dt_init <= dt_max, got {} / {} / {}",
                    self.dt_min, self.dt_init, self.dt_max
                ),
            );
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return bad("cfl", format!("must lie in (0, 1], got {}", self.cfl));
        }
        if !(self.newton_tol > 0.0 && self.newton_tol <= 1e-6) {
            return bad(
                "newton_tol",
                format!("must lie in (0, 1e-6], got {}", self.newton_tol),
            );
        }
        if self.newton_max_iters == 0 {
            return bad("newton_max_iters", "must be positive".into());
        }
        if !(self.t_end.is_finite() && self.t_end >= 0.0) {
            return bad("t_end", format!("must be finite and >= 0, got {}", self.t_end));
        }
        if !(self.sample_every > 0.0) {
            return bad(
                "sample_every",
                format!("must be positive, got {}", self.sample_every),
            );
        }
        Ok(())
    }
}

/// Per-step solver statistics.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StepStats {
    pub iterations: usize,
    pub linear_residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RunStats {
    pub accepted: usize,
    pub rejected: usize,
    pub max_iterations: usize,
    /// Largest `‖Ax − b‖∞ / ‖b‖∞` over all linear solves.
    pub max_linear_residual: f64,
}

impl RunStats {
    pub(crate) fn record(&mut self, s: &StepStats) {
        self.accepted += 1;
        self.max_iterations = self.max_iterations.max(s.iterations);
        self.max_linear_residual = self.max_linear_residual.max(s.linear_residual);
    }
}

/// Drives an adaptive time loop: CFL-limited step sizes, halving on
/// rejection, exact landing on every stop time.
pub(crate) struct Stepper {
    pub ctrl: StepControls,
    pub dt: f64,
    pub consecutive_rejections: usize,
}

impl Stepper {
    pub fn new(ctrl: StepControls) -> Self {
        Self {
            ctrl,
            dt: ctrl.dt_init,
            consecutive_rejections: 0,
        }
    }

    /// Step to try from `t` without passing `stop`; `speed_limit` is the
    /// CFL bound.
    pub fn propose(&self, t: f64, stop: f64, speed_limit: f64) -> f64 {
        let dt = self.dt.min(speed_limit).max(self.ctrl.dt_min);
        let remaining = stop - t;
        if dt >= remaining * (1.0 - 1e-12) {
            remaining
        } else if dt > 0.5 * remaining {
            // avoid leaving a sliver before the stop
            0.5 * remaining
        } else {
            dt
        }
    }

    pub fn accepted(&mut self, dt_used: f64) {
        self.consecutive_rejections = 0;
        if dt_used >= 0.999 * self.dt {
            self.dt = (self.dt * 1.25).min(self.ctrl.dt_max);
        }
    }

    /// Returns `false` once the step is pinned at `dt_min`.
    pub fn rejected(&mut self, dt_used: f64) -> bool {
        self.consecutive_rejections += 1;
        if dt_used <= self.ctrl.dt_min * (1.0 + 1e-12) && self.consecutive_rejections > 3 {
            return false;
        }
        self.dt = (0.5 * dt_used).max(self.ctrl.dt_min);
        true
    }
}

/// Sample and snapshot times merged into the list of stops after `t0`.
pub(crate) fn stop_times(t0: f64, ctrl: &StepControls, extra: &[f64]) -> Vec<f64> {
    let mut stops: Vec<f64> = Vec::new();
    let mut k = 1usize;
    loop {
        let t = t0 + k as f64 * ctrl.sample_every;
        if t >= ctrl.t_end - 1e-12 * ctrl.t_end.max(1.0) {
            break;
        }
        stops.push(t);
        k += 1;
    }
    stops.extend(extra.iter().copied().filter(|&t| t > t0 && t < ctrl.t_end));
    stops.push(ctrl.t_end);
    stops.sort_by(|a, b| a.total_cmp(b));
    stops.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs().max(1.0));
    stops
}

pub(crate) fn is_sample_time(t: f64, t0: f64, ctrl: &StepControls) -> bool {
    let k = ((t - t0) / ctrl.sample_every).round();
    (t - t0 - k * ctrl.sample_every).abs() <= 1e-9 * ctrl.sample_every
        || (t - ctrl.t_end).abs() <= 1e-12 * ctrl.t_end.max(1.0)
}

