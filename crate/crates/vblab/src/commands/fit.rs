use std::path::PathBuf;
use std::time::Instant;

use serde::Serialize;
use vblab_core::vb::{default_init, jacobian_phi, run_vb, VbConfig, VbTrace};
use vblab_core::{Error, ExpFamily};

use super::{elapsed_ms, load_dataset};
use crate::cli::DataArgs;
use crate::config::{ExperimentConfig, InitChoice};
use crate::error::Result;
use crate::io::write_trace;
use crate::json;
use crate::report::{rows, DatasetInfo, HyperparamsOut};

/// Outcome of the iteration; a non-converged run is data, not an error.
#[derive(Debug, Clone, Serialize)]
pub struct FitSummary {
    pub fixed_point: Option<Vec<f64>>,
    pub hyperparams: Option<HyperparamsOut>,
    pub iterations: usize,
    pub converged: bool,
    pub failure: Option<String>,
    pub final_free_energy: Option<f64>,
    pub monotonicity_violations: usize,
    pub mean_method: Option<&'static str>,
    pub jacobian: Option<Vec<Vec<f64>>>,
    pub spectral_norm: Option<f64>,
    pub jacobian_failure: Option<String>,
}

/// Runs the iteration and the Jacobian at its end point.
pub fn run_fit(
    model: &dyn ExpFamily,
    cfg: &ExperimentConfig,
    ys: &[f64],
) -> Result<(FitSummary, Option<VbTrace>)> {
    let prior = cfg.prior()?;
    let init = match &cfg.init {
        InitChoice::Default => default_init(model, ys, &prior)?.into_vec(),
        InitChoice::Vector(v) => v.clone(),
    };
    let vb = VbConfig::new(init, prior.clone())
        .with_tol(cfg.tol)
        .with_max_iter(cfg.max_iter);
    let trace = match run_vb(model, ys, &vb) {
        Ok(t) => t,
        Err(Error::NonConvergence(msg)) => {
            let summary = FitSummary {
                fixed_point: None,
                hyperparams: None,
                iterations: 0,
                converged: false,
                failure: Some(msg),
                final_free_energy: None,
                monotonicity_violations: 0,
                mean_method: None,
                jacobian: None,
                spectral_norm: None,
                jacobian_failure: None,
            };
            return Ok((summary, None));
        }
        Err(e) => return Err(e.into()),
    };
    let (jacobian, spectral_norm, jacobian_failure) =
        match jacobian_phi(model, trace.fixed_point(), ys, &prior) {
            Ok((j, s)) => (Some(rows(&j)), Some(s), None),
            Err(e) => (None, None, Some(e.to_string())),
        };
    let summary = FitSummary {
        fixed_point: Some(trace.fixed_point().to_vec()),
        hyperparams: Some((&trace.final_hyperparams).into()),
        iterations: trace.iterations,
        converged: trace.converged,
        failure: (!trace.converged).then(|| format!("iteration cap {} reached", cfg.max_iter)),
        final_free_energy: trace.free_energy.last().copied(),
        monotonicity_violations: trace.monotonicity_violations().len(),
        mean_method: Some(trace.mean_method.as_str()),
        jacobian,
        spectral_norm,
        jacobian_failure,
    };
    Ok((summary, Some(trace)))
}

#[derive(Serialize)]
struct FitReport<'a> {
    schema_version: &'static str,
    command: &'static str,
    config: &'a ExperimentConfig,
    dataset: DatasetInfo,
    #[serde(flatten)]
    fit: FitSummary,
    trace_file: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    timing_ms: Option<f64>,
}

pub fn fit(cfg: &ExperimentConfig, data: &DataArgs, timing: bool) -> Result<Vec<PathBuf>> {
    let start = Instant::now();
    let (path, ys) = load_dataset(cfg, data)?;
    let model = cfg.model.build();
    let (summary, trace) = run_fit(model.as_ref(), cfg, &ys)?;
    cfg.ensure_output_dir()?;
    let mut written = Vec::new();
    let trace_path = cfg.out_path("trace.csv");
    if let Some(t) = &trace {
        write_trace(&trace_path, t)?;
        written.push(trace_path.clone());
    }
    let report = FitReport {
        schema_version: crate::config::SCHEMA_VERSION,
        command: "fit",
        config: cfg,
        dataset: DatasetInfo {
            path: path.display().to_string(),
            n: ys.len(),
        },
        fit: summary,
        trace_file: trace.as_ref().map(|_| "trace.csv".to_string()),
        timing_ms: elapsed_ms(start, timing),
    };
    let report_path = cfg.out_path("fit_report.json");
    json::write(&report_path, &report)?;
    written.push(report_path);
    Ok(written)
}
