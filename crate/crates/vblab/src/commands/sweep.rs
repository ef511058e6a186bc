use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use vblab_core::asymptotics::{aggregate_sweep, sweep_cell, ErrorMetric, SweepCell, SweepSettings};

use super::elapsed_ms;
use crate::config::{ExperimentConfig, InitChoice};
use crate::error::{CliError, Result};
use crate::json;

pub const MIN_GRID: usize = 3;
pub const MIN_SEEDS: usize = 10;

#[derive(Serialize)]
struct CellOut {
    n: usize,
    seed: u64,
    fixed_point: Option<Vec<f64>>,
    error: Option<f64>,
    /// Distance along `(1, −1)/√2`, which the data do not identify.
    difference_error: Option<f64>,
    iterations: usize,
    converged: bool,
    contraction: Option<f64>,
    ratio_eigenvalues: Vec<f64>,
    failure: Option<String>,
}

#[derive(Serialize)]
struct RowOut {
    n: usize,
    median_error: Option<f64>,
    median_contraction: Option<f64>,
    contraction_reference: Option<f64>,
    mean_ratio_eigenvalues: Vec<f64>,
    exact_reference: f64,
    half_reference: f64,
    cells: usize,
    failures: usize,
}

#[derive(Serialize)]
struct Aggregate {
    metric: &'static str,
    slope: Option<f64>,
    rows: Vec<RowOut>,
}

#[derive(Serialize)]
struct SweepReport<'a> {
    schema_version: &'static str,
    command: &'static str,
    config: &'a ExperimentConfig,
    cells: Vec<CellOut>,
    aggregate: Aggregate,
    #[serde(skip_serializing_if = "Option::is_none")]
    timing_ms: Option<f64>,
}

fn cell_out(c: SweepCell, theta_star: &[f64], sum_identified: bool) -> CellOut {
    let ok = c.failure.is_none();
    let difference_error = (ok && sum_identified).then(|| {
        let d = (c.fixed_point[0] - c.fixed_point[1]) - (theta_star[0] - theta_star[1]);
        d.abs() / 2f64.sqrt()
    });
    CellOut {
        n: c.n,
        seed: c.seed,
        error: ok.then_some(c.error),
        difference_error,
        fixed_point: ok.then_some(c.fixed_point),
        iterations: c.iterations,
        converged: c.converged,
        contraction: c.contraction,
        ratio_eigenvalues: c.ratio_eigenvalues,
        failure: c.failure,
    }
}

pub fn sweep(cfg: &ExperimentConfig, jobs: Option<usize>, timing: bool) -> Result<Vec<PathBuf>> {
    let start = Instant::now();
    let grid = cfg.grid(MIN_GRID)?;
    if cfg.seeds.len() < MIN_SEEDS {
        return Err(CliError::config(
            "seeds",
            format!("a sweep needs at least {MIN_SEEDS} seeds"),
        ));
    }
    let theta = cfg.theta_star()?.to_vec();
    let model = cfg.model.build();
    let settings = SweepSettings {
        prior: cfg.prior()?,
        tol: cfg.tol,
        max_iter: cfg.max_iter,
        init: match &cfg.init {
            InitChoice::Default => None,
            InitChoice::Vector(v) => Some(v.clone()),
        },
        metric: if cfg.model.sum_identified() {
            ErrorMetric::IdentifiableSum
        } else {
            ErrorMetric::Euclidean
        },
    };
    let mut seeds = cfg.seeds.clone();
    seeds.sort_unstable();
    let pairs: Vec<(usize, u64)> = grid
        .iter()
        .flat_map(|&n| seeds.iter().map(move |&s| (n, s)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| CliError::config("jobs", e.to_string()))?;
    let model_ref = model.as_ref();
    let cells: Vec<SweepCell> = pool.install(|| {
        pairs
            .par_iter()
            .map(|&(n, s)| sweep_cell(model_ref, &theta, n, s, &settings))
            .collect()
    });
    let agg = aggregate_sweep(&cells);
    let rows = agg
        .rows
        .into_iter()
        .map(|r| {
            let nf = r.n as f64;
            RowOut {
                n: r.n,
                median_error: r.median_error,
                median_contraction: r.median_contraction,
                contraction_reference: contraction_reference(cfg, r.n),
                mean_ratio_eigenvalues: r.mean_ratio_eigenvalues,
                exact_reference: nf / (nf + cfg.alpha0),
                half_reference: 0.5,
                cells: r.cells,
                failures: r.failures,
            }
        })
        .collect();
    let report = SweepReport {
        schema_version: crate::config::SCHEMA_VERSION,
        command: "sweep",
        config: cfg,
        cells: cells
            .into_iter()
            .map(|c| cell_out(c, &theta, cfg.model.sum_identified()))
            .collect(),
        aggregate: Aggregate {
            metric: settings.metric.as_str(),
            slope: agg.slope,
            rows,
        },
        timing_ms: elapsed_ms(start, timing),
    };
    cfg.ensure_output_dir()?;
    let path = cfg.out_path("sweep_report.json");
    json::write(&path, &report)?;
    Ok(vec![path])
}

/// Per-step error ratio of the slowest direction; none when the map is
/// constant.
fn contraction_reference(cfg: &ExperimentConfig, n: usize) -> Option<f64> {
    cfg.model
        .closed_form_spectral_norm(n, cfg.alpha0)
        .filter(|v| *v > 0.0)
}
