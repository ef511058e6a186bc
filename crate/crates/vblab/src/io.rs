//! Dataset, sidecar and trace files.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use vblab_core::vb::VbTrace;

use crate::config::SCHEMA_VERSION;
use crate::error::{CliError, Result};
use crate::json::{self, format_float};

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(|e| csv_error(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(source) => CliError::io(path, source),
        other => CliError::Parse {
            path: path.to_path_buf(),
            line,
            message: format!("{other:?}"),
        },
    }
}

fn format_y(y: f64, integer: bool) -> String {
    if integer {
        format!("{}", y as u64)
    } else {
        format_float(y)
    }
}

pub fn write_dataset(path: &Path, ys: &[f64], integer: bool) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["index", "y"])
        .map_err(|e| csv_error(path, e))?;
    for (i, y) in ys.iter().enumerate() {
        w.write_record([i.to_string(), format_y(*y, integer)])
            .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Reads an `index,y` dataset; indices must run 0, 1, 2, … in order.
pub fn read_dataset(path: &Path, integer: bool) -> Result<Vec<f64>> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let header = r.headers().map_err(|e| csv_error(path, e))?.clone();
    if header.iter().collect::<Vec<_>>() != ["index", "y"] {
        return Err(CliError::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: "expected header `index,y`".into(),
        });
    }
    let mut ys = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        let bad = |message: String| CliError::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        let index: usize = rec[0]
            .trim()
            .parse()
            .map_err(|_| bad(format!("index `{}` is not a non-negative integer", &rec[0])))?;
        if index != ys.len() {
            return Err(bad(format!("expected index {}, found {index}", ys.len())));
        }
        let y: f64 = rec[1]
            .trim()
            .parse()
            .map_err(|_| bad(format!("y `{}` is not a number", &rec[1])))?;
        if !y.is_finite() {
            return Err(bad("y must be finite".into()));
        }
        if integer && (y < 0.0 || y.fract() != 0.0) {
            return Err(bad(format!(
                "count model needs non-negative integers, got {y}"
            )));
        }
        ys.push(y);
    }
    Ok(ys)
}

/// JSON sidecar written next to a simulated dataset.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct DatasetMeta {
    pub schema_version: String,
    pub model: String,
    pub theta_star: Vec<f64>,
    pub seed: u64,
    pub n: usize,
    pub generator: String,
}

impl DatasetMeta {
    pub fn new(model: &str, theta_star: &[f64], seed: u64, n: usize) -> Self {
        Self {
            schema_version: SCHEMA_VERSION.into(),
            model: model.into(),
            theta_star: theta_star.to_vec(),
            seed,
            n,
            generator: "chacha8-substream-per-index".into(),
        }
    }

    /// `dataset.csv` → `dataset.meta.json`.
    pub fn path_for(dataset: &Path) -> PathBuf {
        dataset.with_extension("meta.json")
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        json::write(path, self)
    }

    pub fn read(path: &Path) -> Result<Option<Self>> {
        if !path.exists() {
            return Ok(None);
        }
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text)
            .map(Some)
            .map_err(|e| CliError::Parse {
                path: path.to_path_buf(),
                line: e.line() as u64,
                message: e.to_string(),
            })
    }
}

/// `iter,theta_1..theta_m,free_energy,step_norm`; the first row has no step.
pub fn write_trace(path: &Path, trace: &VbTrace) -> Result<()> {
    let m = trace.iterates.first().map_or(0, |t| t.len());
    let mut w = writer(path)?;
    let mut header = vec!["iter".to_string()];
    header.extend((1..=m).map(|j| format!("theta_{j}")));
    header.push("free_energy".into());
    header.push("step_norm".into());
    w.write_record(&header).map_err(|e| csv_error(path, e))?;
    for (k, theta) in trace.iterates.iter().enumerate() {
        let mut row = vec![k.to_string()];
        row.extend(theta.iter().map(|v| format_float(*v)));
        row.push(format_float(trace.free_energy[k]));
        row.push(if k == 0 {
            String::new()
        } else {
            format_float(trace.step_norms[k - 1])
        });
        w.write_record(&row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Plot grid: `theta,q_n,normal_limit` (or `theta_1,theta_2,…` for m = 2).
pub fn write_density(path: &Path, rows: &[(Vec<f64>, f64, f64)]) -> Result<()> {
    let m = rows.first().map_or(1, |r| r.0.len());
    let mut w = writer(path)?;
    let mut header: Vec<String> = if m == 1 {
        vec!["theta".into()]
    } else {
        (1..=m).map(|j| format!("theta_{j}")).collect()
    };
    header.push("q_n".into());
    header.push("normal_limit".into());
    w.write_record(&header).map_err(|e| csv_error(path, e))?;
    for (t, q, p) in rows {
        let mut row: Vec<String> = t.iter().map(|v| format_float(*v)).collect();
        row.push(format_float(*q));
        row.push(format_float(*p));
        w.write_record(&row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}
