//! Experiment runners. Each run writes its own artifacts; the summary is
//! assembled once every run has finished.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sheetlab_core::euler::{min_height_trace, run_observed, RunStats, SheetState, StepControls, Termination};
use sheetlab_core::functionals::{
    decay_envelope_pme, fit_exponential, DiagnosticSample, DiagnosticsSeries, SheetParams, FIT_FLOOR,
};
use sheetlab_core::initial_data::{pinch_height, pinch_velocity, special_mass, SpecialData};
use sheetlab_core::lagrangian::{
    forcing, from_lagrangian, initial_map, pme_run_observed, stationary_profile, stationary_residual,
    to_lagrangian, ForcingProfile, LagrangianState,
};
use sheetlab_core::numerics::{Field, Grid1D};
use sheetlab_core::radial::{radial_functionals, radial_run_observed, RadialParams, RadialState};

use crate::config::{ExperimentConfig, Kind};
use crate::error::{CliError, Result};
use crate::output::{emit_csv, emit_json, emit_profiles, Snapshot};

/// Relative mass drift allowed over a run.
pub const MASS_TOL: f64 = 1e-10;
/// Per-sample increase of a dissipated functional allowed, relative to its initial value.
pub const DISSIPATION_TOL: f64 = 1e-12;
/// Slack on the maximum-principle bound.
pub const MAX_PRINCIPLE_SLACK: f64 = 1e-9;
/// Slack on the unforced stretch envelope.
pub const PME_ENVELOPE_SLACK: f64 = 1.02;
/// Fraction of the envelope rate the radial fit must reach.
pub const RADIAL_RATE_FRACTION: f64 = 0.95;
/// Terminal distance to the flat or stationary profile.
pub const RELAXATION_TOL: f64 = 1e-3;
/// Recovery level of the minimum height, as a fraction of `M / L`.
pub const RECOVERY_FRACTION: f64 = 0.5;
/// Largest spread of `h_min / ν²` across a sweep.
pub const COLLAPSE_SPREAD: f64 = 4.0;
/// Frame mismatch allowed at the base resolution.
pub const FRAME_MISMATCH_TOL: f64 = 5e-3;
/// Smallest mismatch reduction when the grid is refined.
pub const FRAME_CONVERGENCE_RATIO: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub limit: Option<f64>,
}

impl Check {
    pub fn at_most(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self {
            name: name.into(),
            passed: value <= limit,
            value: value.is_finite().then_some(value),
            limit: Some(limit),
        }
    }

    pub fn at_least(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self {
            name: name.into(),
            passed: value >= limit,
            value: value.is_finite().then_some(value),
            limit: Some(limit),
        }
    }

    pub fn holds(name: impl Into<String>, passed: bool, value: Option<f64>) -> Self {
        Self {
            name: name.into(),
            passed,
            value: value.filter(|v| v.is_finite()),
            limit: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub label: String,
    pub parameters: BTreeMap<String, f64>,
    pub passed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub termination: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stats: Option<RunStats>,
    pub metrics: BTreeMap<String, f64>,
    pub checks: Vec<Check>,
    pub diagnostics_csv: Vec<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profiles_csv: Option<PathBuf>,
}

impl RunReport {
    pub fn metric(&self, name: &str) -> Option<f64> {
        self.metrics.get(name).copied()
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub kind: Kind,
    pub config: ExperimentConfig,
    pub runs: Vec<RunReport>,
    pub metrics: BTreeMap<String, f64>,
    pub checks: Vec<Check>,
    pub passed: bool,
}

impl Summary {
    pub fn run(&self, label: &str) -> Option<&RunReport> {
        self.runs.iter().find(|r| r.label == label)
    }

    pub fn metric(&self, name: &str) -> Option<f64> {
        self.metrics.get(name).copied()
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// Every check of the experiment and its runs, labelled `run/check`.
    pub fn all_checks(&self) -> Vec<(String, &Check)> {
        let mut out: Vec<(String, &Check)> = self
            .runs
            .iter()
            .flat_map(|r| r.checks.iter().map(move |c| (format!("{}/{}", r.label, c.name), c)))
            .collect();
        out.extend(self.checks.iter().map(|c| (c.name.clone(), c)));
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunArtifacts {
    pub summary_json: PathBuf,
    pub diagnostics_csv: Vec<PathBuf>,
    pub profiles_csv: Vec<PathBuf>,
    pub summary: Summary,
}

/// What a finished run hands back before its files are written.
#[derive(Default)]
struct RunOutput {
    termination: Option<Value>,
    stats: Option<RunStats>,
    metrics: BTreeMap<String, f64>,
    checks: Vec<Check>,
    diagnostics: Vec<(&'static str, DiagnosticsSeries)>,
    snapshots: Vec<Snapshot>,
}

impl RunOutput {
    fn metric(&mut self, name: impl Into<String>, value: f64) {
        if value.is_finite() {
            self.metrics.insert(name.into(), value);
        }
    }
}

struct RunId {
    label: String,
    parameters: BTreeMap<String, f64>,
}

fn run_id(label: impl Into<String>, parameters: &[(&str, f64)]) -> RunId {
    RunId {
        label: label.into(),
        parameters: parameters.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
    }
}

/// Writes a run's files; a solver error becomes a failed report, an I/O error is returned.
fn record(dir: &Path, id: RunId, result: Result<RunOutput>) -> Result<RunReport> {
    let out = match result {
        Ok(out) => out,
        Err(e @ (CliError::Io { .. } | CliError::Csv { .. })) => return Err(e),
        Err(e) => {
            return Ok(RunReport {
                label: id.label,
                parameters: id.parameters,
                passed: false,
                error: Some(e.to_string()),
                termination: None,
                stats: None,
                metrics: BTreeMap::new(),
                checks: Vec::new(),
                diagnostics_csv: Vec::new(),
                profiles_csv: None,
            })
        }
    };
    let mut diagnostics_csv = Vec::new();
    for (name, series) in &out.diagnostics {
        let file = if name.is_empty() {
            format!("{}_diagnostics.csv", id.label)
        } else {
            format!("{}_{name}_diagnostics.csv", id.label)
        };
        diagnostics_csv.push(emit_csv(series, &dir.join(file))?);
    }
    let profiles_csv = if out.snapshots.is_empty() {
        None
    } else {
        Some(emit_profiles(
            &out.snapshots,
            &dir.join(format!("{}_profiles.csv", id.label)),
        )?)
    };
    Ok(RunReport {
        label: id.label,
        parameters: id.parameters,
        passed: out.checks.iter().all(|c| c.passed),
        error: None,
        termination: out.termination,
        stats: out.stats,
        metrics: out.metrics,
        checks: out.checks,
        diagnostics_csv,
        profiles_csv,
    })
}

/// Largest relative deviation of the sampled mass from its first value.
pub fn mass_drift(series: &DiagnosticsSeries) -> f64 {
    let s = series.samples();
    let Some(m0) = s.first().map(|d| d.mass) else {
        return 0.0;
    };
    s.iter()
        .map(|d| (d.mass - m0).abs() / m0.abs().max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max)
}

/// Largest increase between consecutive samples, relative to the first value.
pub fn worst_increase(series: &DiagnosticsSeries, pick: impl Fn(&DiagnosticSample) -> Option<f64>) -> f64 {
    let track = series.track(pick);
    let Some(&(_, y0)) = track.first() else {
        return 0.0;
    };
    let scale = y0.abs().max(f64::MIN_POSITIVE);
    track
        .windows(2)
        .map(|w| (w[1].1 - w[0].1) / scale)
        .fold(0.0, f64::max)
}

fn mass_check(series: &DiagnosticsSeries) -> Check {
    Check::at_most("mass_conservation", mass_drift(series), MASS_TOL)
}

fn dissipation_checks(series: &DiagnosticsSeries, sigma: f64) -> Vec<Check> {
    let mut out = vec![Check::at_most(
        "energy_non_increasing",
        worst_increase(series, |d| d.energy),
        DISSIPATION_TOL,
    )];
    if sigma > 0.0 {
        out.push(Check::at_most(
            "entropy_non_increasing",
            worst_increase(series, |d| d.entropy),
            DISSIPATION_TOL,
        ));
    }
    out
}

/// Worst excess of `max u` over the maximum-principle bound, and the smallest `min u`.
fn max_principle_checks(series: &DiagnosticsSeries) -> Vec<Check> {
    let excess = series
        .samples()
        .iter()
        .map(|d| d.extra["u_max"] - d.extra["u_upper_bound"])
        .fold(f64::NEG_INFINITY, f64::max);
    let u_min = series
        .samples()
        .iter()
        .map(|d| d.extra["u_min"])
        .fold(f64::INFINITY, f64::min);
    vec![
        Check::at_most("max_principle_upper", excess, MAX_PRINCIPLE_SLACK),
        Check::holds("max_principle_positive", u_min > 0.0, Some(u_min)),
    ]
}

fn to_value(v: &impl Serialize) -> Option<Value> {
    serde_json::to_value(v).ok()
}

fn euler_snapshot(s: &SheetState) -> Snapshot {
    Snapshot {
        t: s.t(),
        coord_name: "x",
        coord: s.grid().coords(),
        fields: vec![
            ("h".into(), s.h().values().to_vec()),
            ("v".into(), s.v().into_values()),
        ],
    }
}

fn label_snapshot(s: &LagrangianState) -> Snapshot {
    Snapshot {
        t: s.t(),
        coord_name: "s",
        coord: s.u().grid().coords(),
        fields: vec![("u".into(), s.u().values().to_vec())],
    }
}

fn special_state(data: SpecialData, n: usize) -> Result<(Grid1D, SheetState)> {
    let g = Grid1D::nodes(n, 1.0)?;
    let s = SheetState::from_fn(g, |x| data.height(x), |x| data.velocity(x), 0.0)?;
    Ok((g, s))
}

fn nu_of(cfg: &ExperimentConfig) -> f64 {
    cfg.nu.expect("validated config carries nu")
}

/// Runs `cfg`, writing every artifact under `out_dir`.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: &Path) -> Result<RunArtifacts> {
    std::fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
    let (runs, metrics, checks) = match cfg.kind {
        Kind::MinHeightThreshold => threshold(cfg, out_dir)?,
        Kind::RelaxationFlat => relaxation_flat(cfg, out_dir)?,
        Kind::RelaxationStationary => relaxation_stationary(cfg, out_dir)?,
        Kind::DecayRate => decay_rate(cfg, out_dir)?,
        Kind::RadialDecay => radial_decay(cfg, out_dir)?,
        Kind::CrossValidate => cross_validate(cfg, out_dir)?,
    };
    let passed = runs.iter().all(|r| r.passed) && checks.iter().all(|c| c.passed);
    let summary = Summary {
        kind: cfg.kind,
        config: cfg.clone(),
        runs,
        metrics,
        checks,
        passed,
    };
    let summary_json = emit_json(&summary, &out_dir.join("summary.json"))?;
    Ok(RunArtifacts {
        summary_json,
        diagnostics_csv: summary.runs.iter().flat_map(|r| r.diagnostics_csv.clone()).collect(),
        profiles_csv: summary.runs.iter().filter_map(|r| r.profiles_csv.clone()).collect(),
        summary,
    })
}

type Outcome = (Vec<RunReport>, BTreeMap<String, f64>, Vec<Check>);

fn threshold_run(cfg: &ExperimentConfig, nu: f64, sigma: f64) -> Result<RunOutput> {
    let g = Grid1D::nodes(cfg.n, cfg.length)?;
    let s0 = SheetState::from_fn(g, pinch_height, pinch_velocity, 0.0)?;
    let p = SheetParams::for_height(sigma, nu, s0.h())?;
    let mut out = RunOutput::default();
    let mut snaps = Vec::new();
    let run = run_observed(&s0, &p, &cfg.controls, &cfg.snapshot_times, |s| {
        snaps.push(euler_snapshot(s))
    })?;
    let level = p.mass / cfg.length;
    let track = min_height_trace(&run.diagnostics);
    let (t_dip, dip) = track
        .iter()
        .copied()
        .fold((0.0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
    let first = track[0].1;
    let last = track[track.len() - 1].1;
    let recovered_at = track
        .iter()
        .find(|&&(t, h)| t > t_dip && h >= RECOVERY_FRACTION * level)
        .map(|p| p.0);
    let ruptured = matches!(run.termination, Termination::RuptureDetected { .. });

    out.metric("mass_over_length", level);
    out.metric("h_min_initial", first);
    out.metric("h_min_dip", dip);
    out.metric("t_dip", t_dip);
    out.metric("dip_over_nu2", dip / (nu * nu));
    out.metric("h_min_final", last);
    out.metric("recovered", if last >= RECOVERY_FRACTION * level { 1.0 } else { 0.0 });
    if let Some(t) = recovered_at {
        out.metric("t_recovered", t);
    }
    out.checks.push(Check::holds("h_min_positive", !ruptured && dip > 0.0, Some(dip)));
    out.checks.push(Check::holds("h_min_dips", dip < first, Some(dip)));
    // without surface tension the sheet settles on a non-flat profile, so recovery is only reported
    if sigma > 0.0 {
        out.checks.push(Check::at_least(
            "h_min_recovers",
            last,
            RECOVERY_FRACTION * level,
        ));
    }
    out.checks.push(mass_check(&run.diagnostics));
    out.checks.extend(dissipation_checks(&run.diagnostics, sigma));
    out.termination = to_value(&run.termination);
    out.stats = Some(run.stats);
    out.diagnostics.push(("", run.diagnostics));
    out.snapshots = snaps;
    Ok(out)
}

fn threshold(cfg: &ExperimentConfig, dir: &Path) -> Result<Outcome> {
    let jobs: Vec<(f64, f64)> = cfg
        .sigma
        .iter()
        .flat_map(|&s| cfg.sweep.iter().map(move |&nu| (nu, s)))
        .collect();
    let runs = jobs
        .par_iter()
        .map(|&(nu, sigma)| {
            let id = run_id(format!("nu{nu}_sigma{sigma}"), &[("nu", nu), ("sigma", sigma)]);
            record(dir, id, threshold_run(cfg, nu, sigma))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut metrics = BTreeMap::new();
    let mut checks = Vec::new();
    for &sigma in &cfg.sigma {
        let ratios: Vec<f64> = runs
            .iter()
            .filter(|r| r.parameters["sigma"] == sigma)
            .filter_map(|r| r.metric("dip_over_nu2"))
            .collect();
        if ratios.len() < 2 {
            continue;
        }
        let hi = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
        let name = format!("dip_ratio_spread_sigma{sigma}");
        metrics.insert(name.clone(), hi / lo);
        if sigma > 0.0 {
            checks.push(Check::at_most(name, hi / lo, COLLAPSE_SPREAD));
        }
    }
    Ok((runs, metrics, checks))
}

fn relaxation_flat(cfg: &ExperimentConfig, dir: &Path) -> Result<Outcome> {
    let body = || -> Result<RunOutput> {
        let (_, s0) = special_state(SpecialData::Flat, cfg.n)?;
        let p = SheetParams::for_height(cfg.sigma(), nu_of(cfg), s0.h())?;
        let mut snaps = Vec::new();
        let run = run_observed(&s0, &p, &cfg.controls, &cfg.snapshot_times, |s| {
            snaps.push(euler_snapshot(s))
        })?;
        let target = special_mass();
        let h = run.final_state.h();
        let dh = h.values().iter().fold(0.0, |m: f64, x| m.max((x - target).abs()));
        let dv = run.final_state.v().values().iter().fold(0.0, |m: f64, x| m.max(x.abs()));
        let mut out = RunOutput::default();
        out.metric("flat_height", target);
        out.metric("terminal_h_distance", dh);
        out.metric("terminal_v_max", dv);
        out.checks.push(Check::at_most("terminal_distance_to_flat", dh.max(dv), RELAXATION_TOL));
        out.checks.push(mass_check(&run.diagnostics));
        out.checks.extend(dissipation_checks(&run.diagnostics, cfg.sigma()));
        out.termination = to_value(&run.termination);
        out.stats = Some(run.stats);
        out.diagnostics.push(("", run.diagnostics));
        out.snapshots = snaps;
        Ok(out)
    };
    let report = record(dir, run_id("euler", &[("nu", nu_of(cfg)), ("sigma", cfg.sigma())]), body())?;
    Ok((vec![report], BTreeMap::new(), Vec::new()))
}

fn relaxation_stationary(cfg: &ExperimentConfig, dir: &Path) -> Result<Outcome> {
    let nu = nu_of(cfg);
    let params = [("nu", nu), ("sigma", 0.0)];
    let data = SpecialData::Stationary;
    let setup = || -> Result<_> {
        let (g, s0) = special_state(data, cfg.n)?;
        let h0 = Field::from_fn(g, |x| data.height(x))?;
        let v0 = Field::from_fn(g, |x| data.velocity(x))?;
        let p = SheetParams::for_height(0.0, nu, &h0)?;
        let f = forcing(&h0, &v0, nu)?;
        let prof = stationary_profile(&f, nu, p.mass, 1.0)?;
        Ok((s0, h0, p, f, prof))
    };
    let (s0, h0, p, f, prof) = match setup() {
        Ok(v) => v,
        Err(e) => {
            let report = record(dir, run_id("stationary", &params), Err(e))?;
            return Ok((vec![report], BTreeMap::new(), Vec::new()));
        }
    };

    let mut stat = RunOutput::default();
    stat.metric("c0", prof.c0);
    stat.metric("forcing_sup", f.sup());
    stat.metric("h_inf_min", prof.h_inf.min());
    stat.metric("h_inf_max", prof.h_inf.max());
    stat.metric("residual", stationary_residual(&prof.u_inf, &f, nu));
    stat.snapshots = vec![
        Snapshot {
            t: f64::INFINITY,
            coord_name: "x",
            coord: prof.h_inf.grid().coords(),
            fields: vec![("h".into(), prof.h_inf.values().to_vec())],
        },
        Snapshot {
            t: f64::INFINITY,
            coord_name: "s",
            coord: prof.u_inf.grid().coords(),
            fields: vec![
                ("u".into(), prof.u_inf.values().to_vec()),
                ("x_of_s".into(), prof.x_inf.values().to_vec()),
            ],
        },
    ];
    let stationary = record(dir, run_id("stationary", &params), Ok(stat))?;

    let euler = || -> Result<RunOutput> {
        let mut snaps = Vec::new();
        let run = run_observed(&s0, &p, &cfg.controls, &cfg.snapshot_times, |s| {
            snaps.push(euler_snapshot(s))
        })?;
        let mut out = RunOutput::default();
        let dist = run.final_state.h().max_abs_diff(&prof.h_inf);
        out.metric("terminal_h_distance", dist);
        out.checks.push(Check::at_most("terminal_distance_to_stationary", dist, RELAXATION_TOL));
        out.checks.push(mass_check(&run.diagnostics));
        out.checks.extend(dissipation_checks(&run.diagnostics, 0.0));
        out.termination = to_value(&run.termination);
        out.stats = Some(run.stats);
        out.diagnostics.push(("", run.diagnostics));
        out.snapshots = snaps;
        Ok(out)
    };
    let lagrangian = || -> Result<RunOutput> {
        let map = initial_map(&h0)?;
        let u0 = to_lagrangian(&h0, &map.x_of_s, p.mass)?;
        let mut snaps = Vec::new();
        let run = pme_run_observed(&u0, &f, nu, &cfg.controls, &cfg.snapshot_times, |s| {
            snaps.push(label_snapshot(s))
        })?;
        let mut out = RunOutput::default();
        out.metric("terminal_u_distance", run.final_state.u().max_abs_diff(&prof.u_inf));
        out.checks.push(mass_check(&run.diagnostics));
        out.checks.extend(max_principle_checks(&run.diagnostics));
        out.termination = to_value(&run.termination);
        out.stats = Some(run.stats);
        out.diagnostics.push(("", run.diagnostics));
        out.snapshots = snaps;
        Ok(out)
    };
    let (e, l) = rayon::join(
        || record(dir, run_id("euler", &params), euler()),
        || record(dir, run_id("lagrangian", &params), lagrangian()),
    );
    let mut metrics = BTreeMap::new();
    metrics.insert("c0".into(), prof.c0);
    Ok((vec![stationary, e?, l?], metrics, Vec::new()))
}

fn decay_rate(cfg: &ExperimentConfig, dir: &Path) -> Result<Outcome> {
    let nu = nu_of(cfg);
    let body = || -> Result<RunOutput> {
        let g = Grid1D::nodes(cfg.n, 1.0)?;
        let u0 = LagrangianState::normalised(Field::from_fn(g, |s| SpecialData::Flat.stretch(s))?, 0.0)?;
        let f = ForcingProfile::zero(g)?;
        let env = decay_envelope_pme(u0.u(), nu)?;
        let mut snaps = Vec::new();
        let run = pme_run_observed(&u0, &f, nu, &cfg.controls, &cfg.snapshot_times, |s| {
            snaps.push(label_snapshot(s))
        })?;
        let track = run.diagnostics.track(|d| d.u_minus_1_l2sq);
        let above: Vec<(f64, f64)> = track.iter().copied().filter(|&(_, y)| y > FIT_FLOOR).collect();
        let ratio = above
            .iter()
            .map(|&(t, y)| y / env.at(t))
            .fold(0.0, f64::max);
        let mut out = RunOutput::default();
        out.metric("envelope_amplitude", env.amplitude);
        out.metric("envelope_rate", env.rate);
        out.metric("u0_sup", u0.u().max());
        out.metric("envelope_ratio_max", ratio);
        out.metric("samples_above_floor", above.len() as f64);
        if let Some(&(t, _)) = track.iter().find(|&&(_, y)| y <= FIT_FLOOR) {
            out.metric("t_floor", t);
        }
        out.checks.push(Check::at_most("envelope_bound", ratio, PME_ENVELOPE_SLACK));
        match fit_exponential(&track, (0.0, cfg.controls.t_end)) {
            Ok(fit) => {
                out.metric("fitted_rate", fit.rate);
                out.metric("fitted_amplitude", fit.amplitude);
                out.metric("fit_r_squared", fit.r_squared);
                out.checks.push(Check::at_least("fitted_rate_at_least_envelope", fit.rate, env.rate));
            }
            Err(e) => {
                out.checks.push(Check::holds("fitted_rate_at_least_envelope", false, None));
                out.termination = Some(Value::String(format!("fit failed: {e}")));
            }
        }
        out.checks.push(mass_check(&run.diagnostics));
        out.checks.extend(max_principle_checks(&run.diagnostics));
        if out.termination.is_none() {
            out.termination = to_value(&run.termination);
        }
        out.stats = Some(run.stats);
        out.diagnostics.push(("", run.diagnostics));
        out.snapshots = snaps;
        Ok(out)
    };
    let report = record(dir, run_id("lagrangian", &[("nu", nu), ("sigma", 0.0)]), body())?;
    Ok((vec![report], BTreeMap::new(), Vec::new()))
}

fn radial_decay(cfg: &ExperimentConfig, dir: &Path) -> Result<Outcome> {
    let sigma = cfg.sigma();
    let mu = cfg.mu.expect("validated config carries mu");
    let m_floor = cfg.m_floor.expect("validated config carries m_floor");
    let body = || -> Result<RunOutput> {
        let s0 = RadialState::from_fn(cfg.n, |r| 1.0 + 0.1 * (PI * r).cos(), |_| 0.0, 0.0)?;
        let probe = RadialParams::new(sigma, mu, 1.0, m_floor)?;
        let mass = radial_functionals(&s0, &probe)?.mass;
        let p = RadialParams::new(sigma, mu, mass, m_floor)?;
        let mut snaps = Vec::new();
        let run = radial_run_observed(&s0, &p, &cfg.controls, &cfg.snapshot_times, |s| {
            snaps.push(Snapshot {
                t: s.t(),
                coord_name: "r",
                coord: s.h().grid().coords(),
                fields: vec![
                    ("h".into(), s.h().values().to_vec()),
                    ("v".into(), s.v().into_values()),
                ],
            })
        })?;
        let mut out = RunOutput::default();
        let h_min = run
            .diagnostics
            .track(|d| d.h_min)
            .iter()
            .map(|p| p.1)
            .fold(f64::INFINITY, f64::min);
        out.metric("h_min", h_min);
        out.metric("envelope_rate", mu / 4.0);
        out.metric("entropy_worst_increase", worst_increase(&run.diagnostics, |d| d.entropy));
        out.checks.push(Check::at_least("h_min_above_m_floor", h_min, m_floor));
        out.checks.push(mass_check(&run.diagnostics));
        out.checks.push(Check::at_most(
            "energy_non_increasing",
            worst_increase(&run.diagnostics, |d| d.energy),
            DISSIPATION_TOL,
        ));
        let track = run.diagnostics.track(|d| d.hx_l2sq);
        match fit_exponential(&track, (0.0, cfg.controls.t_end)) {
            Ok(fit) => {
                out.metric("fitted_rate", fit.rate);
                out.metric("fitted_amplitude", fit.amplitude);
                out.metric("fit_r_squared", fit.r_squared);
                if sigma > 0.0 {
                    out.checks.push(Check::at_least(
                        "decay_rate",
                        fit.rate,
                        RADIAL_RATE_FRACTION * mu / 4.0,
                    ));
                }
            }
            Err(e) if sigma > 0.0 => {
                out.checks.push(Check::holds("decay_rate", false, None));
                out.metrics.insert("fit_samples".into(), 0.0);
                out.termination = Some(Value::String(format!("fit failed: {e}")));
            }
            Err(_) => {}
        }
        if out.termination.is_none() {
            out.termination = to_value(&run.termination);
        }
        out.stats = Some(run.stats);
        out.diagnostics.push(("", run.diagnostics));
        out.snapshots = snaps;
        Ok(out)
    };
    let params = [("mu", mu), ("sigma", sigma), ("m_floor", m_floor)];
    let report = record(dir, run_id("radial", &params), body())?;
    Ok((vec![report], BTreeMap::new(), Vec::new()))
}

/// Euler and mass-label runs of the same data on `n` nodes, compared at the snapshot times.
fn frames_at(cfg: &ExperimentConfig, n: usize) -> Result<RunOutput> {
    let nu = nu_of(cfg);
    let data = SpecialData::Stationary;
    let (g, s0) = special_state(data, n)?;
    let h0 = Field::from_fn(g, |x| data.height(x))?;
    let v0 = Field::from_fn(g, |x| data.velocity(x))?;
    let p = SheetParams::for_height(0.0, nu, &h0)?;
    // tie the time step to the grid so both errors shrink together
    let dt_max = cfg.controls.dt_max.min(g.dx());
    let ctrl = StepControls {
        dt_max,
        dt_init: cfg.controls.dt_init.min(dt_max),
        dt_min: cfg.controls.dt_min.min(dt_max),
        ..cfg.controls
    };
    let times = &cfg.snapshot_times;
    let mut euler_h: Vec<(f64, Field)> = Vec::new();
    let euler = run_observed(&s0, &p, &ctrl, times, |s| euler_h.push((s.t(), s.h().clone())))?;
    let map = initial_map(&h0)?;
    let u0 = to_lagrangian(&h0, &map.x_of_s, p.mass)?;
    let f = forcing(&h0, &v0, nu)?;
    let mut label_h: Vec<(f64, Result<Field>)> = Vec::new();
    let pme = pme_run_observed(&u0, &f, nu, &ctrl, times, |s| {
        label_h.push((s.t(), from_lagrangian(s, p.mass, 1.0).map(|e| e.h).map_err(CliError::from)))
    })?;
    let mut out = RunOutput::default();
    let mut worst: f64 = 0.0;
    let mut snaps = Vec::new();
    for ((t, he), (tl, hl)) in euler_h.iter().zip(label_h) {
        let hl = hl?;
        debug_assert_eq!(*t, tl);
        let d = he.max_abs_diff(&hl);
        worst = worst.max(d);
        out.metric(format!("mismatch_t{t}"), d);
        snaps.push(Snapshot {
            t: *t,
            coord_name: "x",
            coord: g.coords(),
            fields: vec![
                ("h_euler".into(), he.values().to_vec()),
                ("h_lagrangian".into(), hl.values().to_vec()),
            ],
        });
    }
    if euler_h.len() != times.len() {
        return Err(CliError::Parse(format!(
            "euler run ended at t = {} before the last comparison time",
            euler.final_state.t()
        )));
    }
    out.metric("max_mismatch", worst);
    out.metric("dt_max", dt_max);
    let mut euler_mass = mass_check(&euler.diagnostics);
    euler_mass.name = "euler_mass_conservation".into();
    let mut label_mass = mass_check(&pme.diagnostics);
    label_mass.name = "lagrangian_mass_conservation".into();
    out.checks.push(euler_mass);
    out.checks.push(label_mass);
    out.termination = to_value(&euler.termination);
    out.stats = Some(euler.stats);
    out.diagnostics.push(("euler", euler.diagnostics));
    out.diagnostics.push(("lagrangian", pme.diagnostics));
    out.snapshots = snaps;
    Ok(out)
}

fn cross_validate(cfg: &ExperimentConfig, dir: &Path) -> Result<Outcome> {
    let nu = nu_of(cfg);
    let sizes = [cfg.n, 2 * cfg.n - 1];
    let runs = sizes
        .par_iter()
        .map(|&n| {
            let id = run_id(format!("n{n}"), &[("nu", nu), ("sigma", 0.0), ("n", n as f64)]);
            record(dir, id, frames_at(cfg, n))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut metrics = BTreeMap::new();
    let mut checks = Vec::new();
    let coarse = runs[0].metric("max_mismatch");
    let fine = runs[1].metric("max_mismatch");
    if let Some(c) = coarse {
        metrics.insert("mismatch_base".into(), c);
        checks.push(Check::at_most("mismatch_at_base_resolution", c, FRAME_MISMATCH_TOL));
    }
    if let (Some(c), Some(f)) = (coarse, fine) {
        let ratio = if f > 0.0 { c / f } else { f64::INFINITY };
        metrics.insert("mismatch_refined".into(), f);
        if ratio.is_finite() {
            metrics.insert("convergence_ratio".into(), ratio);
        }
        checks.push(Check::at_least("mismatch_convergence", ratio, FRAME_CONVERGENCE_RATIO));
    }
    Ok((runs, metrics, checks))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    #[test]
    fn checks_compare_against_limits() {
        assert!(Check::at_most("a", 1.0, 1.0).passed);
        assert!(!Check::at_most("a", f64::NAN, 1.0).passed);
        assert!(!Check::at_least("a", 0.5, 1.0).passed);
        assert_eq!(Check::at_most("a", f64::INFINITY, 1.0).value, None);
    }

    #[test]
    fn drift_and_increase_of_a_short_series() {
        let mut s = DiagnosticsSeries::new();
        for (i, (m, e)) in [(1.0, 4.0), (1.0 + 1e-12, 3.0), (1.0, 3.0 + 4e-12)].into_iter().enumerate() {
            s.push(DiagnosticSample {
                t: i as f64,
                mass: m,
                energy: Some(e),
                ..Default::default()
            })
            .unwrap();
        }
        assert!((mass_drift(&s) - 1e-12).abs() < 1e-16);
        assert!((worst_increase(&s, |d| d.energy) - 1e-12).abs() < 1e-15);
        assert_eq!(worst_increase(&s, |d| d.entropy), 0.0);
    }

    #[test]
    fn short_flat_relaxation_writes_its_artifacts() {
        let cfg = parse_config(r#"{"kind":"relaxation-flat","n":33,"t_end":0.2,"sample_every":0.1}"#).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let art = run_experiment(&cfg, dir.path()).unwrap();
        assert!(art.summary_json.exists());
        assert_eq!(art.diagnostics_csv.len(), 1);
        assert_eq!(art.profiles_csv.len(), 1);
        let run = art.summary.run("euler").unwrap();
        assert!(run.check("mass_conservation").unwrap().passed);
        assert!(run.check("energy_non_increasing").unwrap().passed);
        // t_end is far too short to relax
        assert!(!run.check("terminal_distance_to_flat").unwrap().passed);
        assert!(!art.summary.passed);
    }

    #[test]
    fn a_failing_sweep_member_leaves_the_others_alone() {
        // the coarse grid cannot follow the smaller viscosity through the dip
        let cfg = parse_config(
            r#"{"kind":"min-height-threshold","n":9,"sweep":[0.5,1e-4],"sigma":0,"t_end":0.5,"dt_min":1e-4}"#,
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let art = run_experiment(&cfg, dir.path()).unwrap();
        assert_eq!(art.summary.runs.len(), 2);
        let ok = art.summary.run("nu0.5_sigma0").unwrap();
        assert!(ok.passed, "{ok:?}");
        let bad = art.summary.run("nu0.0001_sigma0").unwrap();
        assert!(!bad.passed);
        assert!(!art.summary.passed);
        assert!(dir.path().join("nu0.5_sigma0_diagnostics.csv").exists());
    }
}
