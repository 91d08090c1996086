use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sheetlab::{parse_config_with, run_experiment, CliError, Kind};

#[derive(Parser)]
#[command(name = "sheetlab", version, about = "Viscous thin-sheet experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Output directory; defaults to the config's output_dir or sheetlab-out/<kind>.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Set a config key, e.g. --override nu=0.5 (repeatable).
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Minimum-height sweep over viscosities with the pinch-off data.
    MinHeightThreshold(KindArgs),
    /// Relaxation of the flat-limit data.
    RelaxationFlat(KindArgs),
    /// Relaxation towards the forced stationary profile.
    RelaxationStationary(KindArgs),
    /// Decay of the unforced stretch against its envelope.
    DecayRate(KindArgs),
    /// Decay of the radial sheet.
    RadialDecay(KindArgs),
    /// Euler and mass-label frames on the same data.
    CrossValidate(KindArgs),
}

#[derive(Args)]
struct KindArgs {
    /// Optional JSON config; its kind must match the subcommand.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

fn load(path: &PathBuf) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Io {
        path: path.clone(),
        source: e,
    })
}

fn execute(cli: Cli) -> Result<bool, CliError> {
    let (text, common, kind) = match cli.command {
        Command::Run { config, common } => (load(&config)?, common, None),
        Command::MinHeightThreshold(a) => kind_args(a, Kind::MinHeightThreshold)?,
        Command::RelaxationFlat(a) => kind_args(a, Kind::RelaxationFlat)?,
        Command::RelaxationStationary(a) => kind_args(a, Kind::RelaxationStationary)?,
        Command::DecayRate(a) => kind_args(a, Kind::DecayRate)?,
        Command::RadialDecay(a) => kind_args(a, Kind::RadialDecay)?,
        Command::CrossValidate(a) => kind_args(a, Kind::CrossValidate)?,
    };
    let cfg = parse_config_with(&text, &common.overrides)?;
    if let Some(k) = kind {
        if cfg.kind != k {
            return Err(CliError::InvalidValue {
                key: "kind".into(),
                reason: format!("config says {} but the subcommand is {k}", cfg.kind),
            });
        }
    }
    let out = common
        .out
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("sheetlab-out").join(cfg.kind.name()));
    let art = run_experiment(&cfg, &out)?;
    for (name, check) in art.summary.all_checks() {
        let mark = if check.passed { "PASS" } else { "FAIL" };
        match (check.value, check.limit) {
            (Some(v), Some(l)) => println!("{mark} {name}: {v:.6e} (limit {l:.6e})"),
            (Some(v), None) => println!("{mark} {name}: {v:.6e}"),
            _ => println!("{mark} {name}"),
        }
    }
    for run in art.summary.runs.iter().filter(|r| r.error.is_some()) {
        println!("FAIL {}: {}", run.label, run.error.as_deref().unwrap_or_default());
    }
    println!("summary: {}", art.summary_json.display());
    Ok(art.summary.passed)
}

fn kind_args(a: KindArgs, kind: Kind) -> Result<(String, Common, Option<Kind>), CliError> {
    let text = match &a.config {
        Some(path) => load(path)?,
        None => format!(r#"{{"kind":"{}"}}"#, kind.name()),
    };
    Ok((text, a.common, Some(kind)))
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
