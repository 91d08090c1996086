//! CSV and JSON artifacts, each written to a temporary file and renamed into place.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use sheetlab_core::functionals::DiagnosticsSeries;
use tempfile::NamedTempFile;

use crate::error::{CliError, Result};

/// Fixed diagnostics columns; extras follow in name order.
pub const DIAGNOSTIC_COLUMNS: [&str; 8] = [
    "t",
    "mass",
    "energy",
    "entropy",
    "hx_l2sq",
    "h_min",
    "h_max",
    "u_minus_1_l2sq",
];

/// Profiles of one state on its grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    /// Name of the coordinate column, e.g. `x`, `s` or `r`.
    pub coord_name: &'static str,
    pub coord: Vec<f64>,
    pub fields: Vec<(String, Vec<f64>)>,
}

/// A parsed CSV: header and cells, `None` where a cell is empty.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
}

fn format_cell(v: Option<f64>) -> String {
    match v {
        Some(v) => format!("{v:.16e}"),
        None => String::new(),
    }
}

/// Writes through a temporary file in the destination directory, then renames it.
pub fn atomic_write(path: &Path, fill: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<PathBuf> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let tmp = NamedTempFile::new_in(dir).map_err(|e| CliError::io(dir, e))?;
    {
        let mut w = BufWriter::new(tmp.as_file());
        fill(&mut w)?;
        w.flush().map_err(|e| CliError::io(path, e))?;
    }
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(path.to_path_buf())
}

fn write_rows(path: &Path, header: &[String], rows: &[Vec<Option<f64>>]) -> Result<PathBuf> {
    atomic_write(path, |w| {
        let csv_err = |source| CliError::Csv {
            path: path.to_path_buf(),
            source,
        };
        let mut out = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(w);
        out.write_record(header).map_err(csv_err)?;
        for row in rows {
            out.write_record(row.iter().map(|v| format_cell(*v)))
                .map_err(csv_err)?;
        }
        out.flush().map_err(|e| CliError::io(path, e))
    })
}

pub fn diagnostics_header(series: &DiagnosticsSeries) -> Vec<String> {
    DIAGNOSTIC_COLUMNS
        .iter()
        .map(|c| c.to_string())
        .chain(series.extra_names())
        .collect()
}

/// One row per sample under [`diagnostics_header`].
pub fn diagnostics_rows(series: &DiagnosticsSeries) -> Vec<Vec<Option<f64>>> {
    let extras = series.extra_names();
    series
        .samples()
        .iter()
        .map(|s| {
            let mut row = vec![
                Some(s.t),
                Some(s.mass),
                s.energy,
                s.entropy,
                s.hx_l2sq,
                s.h_min,
                s.h_max,
                s.u_minus_1_l2sq,
            ];
            row.extend(extras.iter().map(|k| s.extra.get(k).copied()));
            row
        })
        .collect()
}

pub fn emit_csv(series: &DiagnosticsSeries, path: &Path) -> Result<PathBuf> {
    write_rows(path, &diagnostics_header(series), &diagnostics_rows(series))
}

/// Long format: one row per grid point per snapshot.
pub fn emit_profiles(snapshots: &[Snapshot], path: &Path) -> Result<PathBuf> {
    let mut coords: Vec<&'static str> = Vec::new();
    let mut fields: Vec<String> = Vec::new();
    for s in snapshots {
        if !coords.contains(&s.coord_name) {
            coords.push(s.coord_name);
        }
        for (name, _) in &s.fields {
            if !fields.contains(name) {
                fields.push(name.clone());
            }
        }
    }
    let mut header = vec!["t".to_string()];
    header.extend(coords.iter().map(|c| c.to_string()));
    header.extend(fields.iter().cloned());
    let mut rows = Vec::new();
    for s in snapshots {
        for (i, &c) in s.coord.iter().enumerate() {
            let mut row = vec![Some(s.t)];
            row.extend(coords.iter().map(|&name| (name == s.coord_name).then_some(c)));
            row.extend(fields.iter().map(|f| {
                s.fields
                    .iter()
                    .find(|(name, _)| name == f)
                    .and_then(|(_, v)| v.get(i).copied())
            }));
            rows.push(row);
        }
    }
    write_rows(path, &header, &rows)
}

pub fn emit_json(value: &impl Serialize, path: &Path) -> Result<PathBuf> {
    atomic_write(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        w.write_all(b"\n").map_err(|e| CliError::io(path, e))
    })
}

pub fn read_table(path: &Path) -> Result<Table> {
    let csv_err = |source| CliError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut rdr = csv::Reader::from_path(path).map_err(csv_err)?;
    let header = rdr
        .headers()
        .map_err(csv_err)?
        .iter()
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let row = rec
            .iter()
            .map(|cell| {
                if cell.is_empty() {
                    Ok(None)
                } else {
                    cell.parse::<f64>().map(Some).map_err(|e| {
                        CliError::Parse(format!("{}: bad number {cell:?}: {e}", path.display()))
                    })
                }
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok(Table { header, rows })
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;
    use sheetlab_core::functionals::DiagnosticSample;

    use super::*;

    fn series(n: usize) -> DiagnosticsSeries {
        let mut s = DiagnosticsSeries::new();
        for i in 0..n {
            let mut d = DiagnosticSample {
                t: i as f64 * 0.1,
                mass: 1.0 / 3.0,
                energy: Some((i as f64).exp()),
                h_min: Some(0.1 + i as f64),
                ..Default::default()
            };
            d.extra.insert("v_l2".into(), 1e-300 * i as f64);
            s.push(d).unwrap();
        }
        s
    }

    #[test]
    fn empty_series_is_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let path = emit_csv(&DiagnosticsSeries::new(), &dir.path().join("d.csv")).unwrap();
        let text = fs::read_to_string(path).unwrap();
        assert_eq!(text, format!("{}\n", DIAGNOSTIC_COLUMNS.join(",")));
    }

    #[test]
    fn three_samples_give_four_lf_lines() {
        let dir = tempfile::tempdir().unwrap();
        let path = emit_csv(&series(3), &dir.path().join("d.csv")).unwrap();
        let text = fs::read_to_string(path).unwrap();
        assert!(!text.contains('\r'));
        assert_eq!(text.lines().count(), 4);
        assert!(text.starts_with("t,mass,energy,entropy,hx_l2sq,h_min,h_max,u_minus_1_l2sq,v_l2\n"));
        // entropy is absent in every row
        assert!(text.lines().nth(1).unwrap().contains(",,"));
    }

    #[test]
    fn profiles_leave_foreign_columns_empty() {
        let dir = tempfile::tempdir().unwrap();
        let snaps = vec![
            Snapshot {
                t: 0.0,
                coord_name: "x",
                coord: vec![0.0, 1.0],
                fields: vec![("h".into(), vec![1.0, 2.0])],
            },
            Snapshot {
                t: 1.0,
                coord_name: "s",
                coord: vec![0.5],
                fields: vec![("u".into(), vec![3.0])],
            },
        ];
        let path = emit_profiles(&snaps, &dir.path().join("p.csv")).unwrap();
        let table = read_table(&path).unwrap();
        assert_eq!(table.header, ["t", "x", "s", "h", "u"]);
        assert_eq!(table.rows.len(), 3);
        assert_eq!(table.rows[2], [Some(1.0), None, Some(0.5), None, Some(3.0)]);
    }

    #[test]
    fn json_is_written_whole() {
        let dir = tempfile::tempdir().unwrap();
        let path = emit_json(&serde_json::json!({"a": [1, 2]}), &dir.path().join("s.json")).unwrap();
        let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
        assert_eq!(v["a"][1], 2);
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    proptest! {
        #[test]
        fn csv_round_trip_is_bit_exact(values in prop::collection::vec(
            prop_oneof![any::<f64>().prop_filter("finite", |v| v.is_finite()), Just(f64::MIN_POSITIVE), Just(-0.0)],
            1..40,
        )) {
            let mut s = DiagnosticsSeries::new();
            for (i, &v) in values.iter().enumerate() {
                s.push(DiagnosticSample { t: i as f64, mass: 1.0, energy: Some(v), ..Default::default() }).unwrap();
            }
            let dir = tempfile::tempdir().unwrap();
            let path = emit_csv(&s, &dir.path().join("d.csv")).unwrap();
            let table = read_table(&path).unwrap();
            for (row, v) in table.rows.iter().zip(&values) {
                prop_assert_eq!(row[2].unwrap().to_bits(), v.to_bits());
            }
        }
    }
}
