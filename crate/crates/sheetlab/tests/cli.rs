use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use sheetlab::output::read_table;

fn sheetlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sheetlab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("config.json");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn unknown_kind_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"kind": "blow-up"}"#);
    let o = sheetlab(&["run", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("kind"), "{}", stderr(&o));
}

#[test]
fn unknown_key_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"kind": "radial-decay", "viscosity": 1}"#);
    let o = sheetlab(&["run", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("viscosity"), "{}", stderr(&o));
}

#[test]
fn invalid_value_names_its_key() {
    let dir = tempfile::tempdir().unwrap();
    let o = sheetlab(&[
        "radial-decay",
        "--out",
        dir.path().to_str().unwrap(),
        "--override",
        "n=2",
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("`n`"), "{}", stderr(&o));
    assert!(!dir.path().join("summary.json").exists());
}

#[test]
fn subcommand_rejects_a_config_of_another_kind() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"kind": "decay-rate"}"#);
    let o = sheetlab(&["radial-decay", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("kind"), "{}", stderr(&o));
}

#[test]
fn radial_run_writes_its_artifacts_and_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("radial");
    let o = sheetlab(&[
        "radial-decay",
        "--out",
        out.to_str().unwrap(),
        "--override",
        "n=64",
        "--override",
        "t_end=1",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
    assert!(stdout(&o).contains("PASS radial/mass_conservation"), "{}", stdout(&o));

    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["kind"], "radial-decay");
    assert_eq!(summary["config"]["n"], 64);
    assert_eq!(summary["passed"], true);

    let diag = read_table(&out.join("radial_diagnostics.csv")).unwrap();
    assert_eq!(&diag.header[..2], ["t", "mass"]);
    assert!(diag.rows.len() > 10);
    let profiles = read_table(&out.join("radial_profiles.csv")).unwrap();
    assert!(profiles.header.iter().any(|c| c == "r"));
    assert!(profiles.rows.iter().all(|r| r[0].is_some()));
}

#[test]
fn failed_check_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"kind": "relaxation-flat", "n": 65, "t_end": 0.2}"#,
    );
    let out = dir.path().join("flat");
    let o = sheetlab(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1), "{}{}", stdout(&o), stderr(&o));
    assert!(stdout(&o).contains("FAIL euler/terminal_distance_to_flat"), "{}", stdout(&o));
    assert!(out.join("summary.json").exists());
}

#[test]
fn output_dir_from_config_is_used() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("from-config");
    let cfg = write_config(
        dir.path(),
        &format!(
            r#"{{"kind": "radial-decay", "n": 32, "t_end": 0.5, "output_dir": {:?}}}"#,
            out.to_str().unwrap()
        ),
    );
    let o = sheetlab(&["run", "--config", &cfg]);
    assert!(o.status.code().is_some_and(|c| c < 2), "{}", stderr(&o));
    assert!(out.join("summary.json").exists());
}
