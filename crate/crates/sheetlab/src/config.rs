//! Experiment configuration: a flat JSON object with per-kind defaults.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sheetlab_core::euler::StepControls;
use sheetlab_core::numerics::MIN_POINTS;
use sheetlab_core::SheetError;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    MinHeightThreshold,
    RelaxationFlat,
    RelaxationStationary,
    DecayRate,
    RadialDecay,
    CrossValidate,
}

impl Kind {
    pub const ALL: [Kind; 6] = [
        Kind::MinHeightThreshold,
        Kind::RelaxationFlat,
        Kind::RelaxationStationary,
        Kind::DecayRate,
        Kind::RadialDecay,
        Kind::CrossValidate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Kind::MinHeightThreshold => "min-height-threshold",
            Kind::RelaxationFlat => "relaxation-flat",
            Kind::RelaxationStationary => "relaxation-stationary",
            Kind::DecayRate => "decay-rate",
            Kind::RadialDecay => "radial-decay",
            Kind::CrossValidate => "cross-validate",
        }
    }

    fn defaults(self) -> Defaults {
        let base = Defaults {
            n: 513,
            length: 1.0,
            sigma: vec![0.0],
            nu: Some(1.0),
            mu: None,
            m_floor: None,
            t_end: 20.0,
            sample_every: 0.05,
            sweep: Vec::new(),
            snapshot_times: vec![0.0, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0],
        };
        match self {
            Kind::MinHeightThreshold => Defaults {
                length: 2.0,
                sigma: vec![0.0, 1.0],
                nu: None,
                t_end: 5.0,
                sample_every: 0.01,
                sweep: vec![0.1, 0.05],
                snapshot_times: vec![0.0, 0.5, 1.0, 1.5, 2.0, 5.0],
                ..base
            },
            Kind::RelaxationFlat | Kind::RelaxationStationary => base,
            Kind::DecayRate => Defaults {
                t_end: 5.0,
                sample_every: 0.02,
                snapshot_times: vec![0.0, 0.1, 0.25, 0.5, 1.0, 2.0, 5.0],
                ..base
            },
            Kind::RadialDecay => Defaults {
                n: 256,
                sigma: vec![1.0],
                nu: None,
                mu: Some(1.0),
                m_floor: Some(0.5),
                t_end: 4.0,
                sample_every: 0.02,
                snapshot_times: vec![0.0, 0.25, 0.5, 1.0, 2.0, 4.0],
                ..base
            },
            Kind::CrossValidate => Defaults {
                n: 257,
                t_end: 2.0,
                snapshot_times: vec![0.1, 0.25, 0.5, 1.0, 2.0],
                ..base
            },
        }
    }

    /// Keys this kind accepts beyond the common ones.
    fn accepts(self, key: &str) -> bool {
        match key {
            "length" | "sweep" => self == Kind::MinHeightThreshold,
            "nu" => !matches!(self, Kind::RadialDecay | Kind::MinHeightThreshold),
            "mu" | "m_floor" => self == Kind::RadialDecay,
            _ => true,
        }
    }

    /// Whether the experiment runs in the mass-label frame, which needs `sigma = 0`.
    fn needs_zero_sigma(self) -> bool {
        matches!(
            self,
            Kind::RelaxationStationary | Kind::DecayRate | Kind::CrossValidate
        )
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Kind {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        Kind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Kind::ALL.iter().map(|k| k.name()).collect();
                CliError::invalid("kind", format!("unknown kind {s:?}; expected one of {}", names.join(", ")))
            })
    }
}

struct Defaults {
    n: usize,
    length: f64,
    sigma: Vec<f64>,
    nu: Option<f64>,
    mu: Option<f64>,
    m_floor: Option<f64>,
    t_end: f64,
    sample_every: f64,
    sweep: Vec<f64>,
    snapshot_times: Vec<f64>,
}

pub const KEYS: [&str; 18] = [
    "kind",
    "sigma",
    "nu",
    "mu",
    "n",
    "length",
    "t_end",
    "dt_init",
    "dt_min",
    "dt_max",
    "cfl",
    "newton_tol",
    "newton_max_iters",
    "sample_every",
    "sweep",
    "snapshot_times",
    "m_floor",
    "output_dir",
];

/// A validated experiment with every default filled in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub kind: Kind,
    /// Surface tension; only the threshold sweep takes more than one value.
    pub sigma: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m_floor: Option<f64>,
    pub n: usize,
    pub length: f64,
    pub controls: StepControls,
    /// Viscosities of the threshold sweep.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sweep: Vec<f64>,
    pub snapshot_times: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn defaults(kind: Kind) -> Self {
        let mut obj = Map::new();
        obj.insert("kind".into(), Value::String(kind.name().into()));
        parse_value(Value::Object(obj)).expect("defaults are valid")
    }

    /// The single surface tension of every kind but the threshold sweep.
    pub fn sigma(&self) -> f64 {
        self.sigma[0]
    }
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    parse_config_with(text, &[])
}

/// Parses `text`, then applies `key=value` overrides before validation.
pub fn parse_config_with(text: &str, overrides: &[String]) -> Result<ExperimentConfig> {
    let mut value: Value =
        serde_json::from_str(text).map_err(|e| CliError::Parse(format!("not valid JSON: {e}")))?;
    for o in overrides {
        apply_override(&mut value, o)?;
    }
    parse_value(value)
}

/// Sets `key` from `key=value`; the value is read as JSON when it parses, as a string otherwise.
pub fn apply_override(config: &mut Value, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Parse(format!("override {assignment:?} is not key=value")))?;
    let key = key.trim();
    let value = serde_json::from_str(raw.trim()).unwrap_or_else(|_| Value::String(raw.trim().into()));
    let obj = config
        .as_object_mut()
        .ok_or_else(|| CliError::Parse("config must be a JSON object".into()))?;
    obj.insert(key.to_string(), value);
    Ok(())
}

fn number(obj: &Map<String, Value>, key: &str) -> Result<Option<f64>> {
    match obj.get(key) {
        None => Ok(None),
        Some(v) => v
            .as_f64()
            .map(Some)
            .ok_or_else(|| CliError::invalid(key, format!("expected a number, got {v}"))),
    }
}

fn count(obj: &Map<String, Value>, key: &str) -> Result<Option<usize>> {
    match obj.get(key) {
        None => Ok(None),
        Some(v) => v
            .as_u64()
            .map(|n| Some(n as usize))
            .ok_or_else(|| CliError::invalid(key, format!("expected a non-negative integer, got {v}"))),
    }
}

fn numbers(obj: &Map<String, Value>, key: &str, scalar_ok: bool) -> Result<Option<Vec<f64>>> {
    let bad = |v: &Value| CliError::invalid(key, format!("expected a list of numbers, got {v}"));
    match obj.get(key) {
        None => Ok(None),
        Some(Value::Array(items)) => items
            .iter()
            .map(|v| v.as_f64().ok_or_else(|| bad(v)))
            .collect::<Result<Vec<_>>>()
            .map(Some),
        Some(v) if scalar_ok => v.as_f64().map(|x| Some(vec![x])).ok_or_else(|| bad(v)),
        Some(v) => Err(bad(v)),
    }
}

fn positive(key: &str, v: f64) -> Result<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(CliError::invalid(key, format!("must be positive, got {v}")))
    }
}

fn from_core(e: SheetError) -> CliError {
    match e {
        SheetError::InvalidParameter { name, reason } => CliError::invalid(name, reason),
        other => CliError::Solver(other),
    }
}

/// Validates a JSON object and fills in defaults.
pub fn parse_value(value: Value) -> Result<ExperimentConfig> {
    let obj = match value {
        Value::Object(obj) => obj,
        _ => return Err(CliError::Parse("config must be a JSON object".into())),
    };
    for key in obj.keys() {
        if !KEYS.contains(&key.as_str()) {
            return Err(CliError::invalid(key.as_str(), "unknown key"));
        }
    }
    let kind: Kind = match obj.get("kind") {
        None => return Err(CliError::MissingKey("kind")),
        Some(Value::String(s)) => s.parse()?,
        Some(v) => return Err(CliError::invalid("kind", format!("expected a string, got {v}"))),
    };
    for key in obj.keys() {
        if !kind.accepts(key) {
            return Err(CliError::invalid(key.as_str(), format!("not used by {kind}")));
        }
    }
    let d = kind.defaults();

    let sigma = numbers(&obj, "sigma", true)?.unwrap_or(d.sigma);
    if sigma.is_empty() || (kind != Kind::MinHeightThreshold && sigma.len() != 1) {
        return Err(CliError::invalid("sigma", format!("{kind} takes a single value")));
    }
    for &s in &sigma {
        if !(s.is_finite() && s >= 0.0) {
            return Err(CliError::invalid("sigma", format!("must be non-negative, got {s}")));
        }
        if kind.needs_zero_sigma() && s != 0.0 {
            return Err(CliError::invalid(
                "sigma",
                format!("{kind} runs without surface tension and needs sigma = 0"),
            ));
        }
    }
    let nu = match number(&obj, "nu")? {
        Some(v) => Some(positive("nu", v)?),
        None => d.nu,
    };
    let mu = match number(&obj, "mu")? {
        Some(v) => Some(positive("mu", v)?),
        None => d.mu,
    };
    let m_floor = match number(&obj, "m_floor")? {
        Some(v) => Some(positive("m_floor", v)?),
        None => d.m_floor,
    };
    let n = count(&obj, "n")?.unwrap_or(d.n);
    if n < MIN_POINTS {
        return Err(CliError::invalid("n", format!("need at least {MIN_POINTS} points, got {n}")));
    }
    let length = positive("length", number(&obj, "length")?.unwrap_or(d.length))?;

    let mut controls = StepControls {
        t_end: d.t_end,
        sample_every: d.sample_every,
        ..StepControls::default()
    };
    let fields: [(&str, &mut f64); 7] = [
        ("t_end", &mut controls.t_end),
        ("dt_init", &mut controls.dt_init),
        ("dt_min", &mut controls.dt_min),
        ("dt_max", &mut controls.dt_max),
        ("cfl", &mut controls.cfl),
        ("newton_tol", &mut controls.newton_tol),
        ("sample_every", &mut controls.sample_every),
    ];
    for (key, slot) in fields {
        if let Some(v) = number(&obj, key)? {
            *slot = v;
        }
    }
    if let Some(v) = count(&obj, "newton_max_iters")? {
        controls.newton_max_iters = v;
    }
    controls.validate().map_err(from_core)?;

    let sweep = match numbers(&obj, "sweep", false)? {
        Some(s) if s.is_empty() => return Err(CliError::invalid("sweep", "must not be empty")),
        Some(s) => s,
        None => d.sweep,
    };
    for &v in &sweep {
        positive("sweep", v)?;
    }

    let t_end = controls.t_end;
    let snapshot_times = match numbers(&obj, "snapshot_times", false)? {
        Some(mut ts) => {
            if let Some(&t) = ts.iter().find(|&&t| !(t >= 0.0 && t <= t_end)) {
                return Err(CliError::invalid(
                    "snapshot_times",
                    format!("{t} lies outside [0, t_end = {t_end}]"),
                ));
            }
            ts.sort_by(f64::total_cmp);
            ts.dedup();
            ts
        }
        None => {
            let mut ts: Vec<f64> = d.snapshot_times.into_iter().filter(|&t| t < t_end).collect();
            ts.push(t_end);
            ts
        }
    };
    if kind == Kind::CrossValidate && !snapshot_times.iter().any(|&t| t > 0.0) {
        return Err(CliError::invalid("snapshot_times", "cross-validate needs a comparison time after 0"));
    }

    let output_dir = match obj.get("output_dir") {
        None => None,
        Some(Value::String(s)) => Some(PathBuf::from(s)),
        Some(v) => return Err(CliError::invalid("output_dir", format!("expected a path string, got {v}"))),
    };

    Ok(ExperimentConfig {
        kind,
        sigma,
        nu,
        mu,
        m_floor,
        n,
        length,
        controls,
        sweep,
        snapshot_times,
        output_dir,
    })
}
