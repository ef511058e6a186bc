use std::path::PathBuf;
use std::time::Instant;

use serde::Serialize;
use vblab_core::asymptotics::{
    check_c1_c2_c3, density_profile, normality_distance, GridPlan, NormalLimit, NORMALIZATION_TOL,
};
use vblab_core::models;
use vblab_core::vb::{default_init, run_vb, VbConfig};
use vblab_core::{ExpFamily, Hyperparams};

use super::elapsed_ms;
use crate::cli::NormalityArgs;
use crate::config::{ExperimentConfig, InitChoice};
use crate::error::{CliError, Result};
use crate::io::write_density;
use crate::json;
use crate::report::{rows, HyperparamsOut};

/// Plotting grids for two parameters are capped at this many points per axis.
const DENSITY_POINTS_2D: usize = 101;

#[derive(Serialize)]
struct GridSpec {
    rule: &'static str,
    half_width_sd: f64,
    points_per_axis: usize,
    normalization_tol: f64,
}

#[derive(Serialize)]
struct NormalityRow {
    n: usize,
    hyperparams: HyperparamsOut,
    theta_hat: Vec<f64>,
    sigma_n: Vec<Vec<f64>>,
    tv_distance: f64,
    kl_divergence: Option<f64>,
    raw_mass: f64,
    c1_top_eig: f64,
    c2_ratio_bounds: [f64; 2],
    c2_points: usize,
    c3_mass: f64,
    density_file: String,
}

#[derive(Serialize)]
struct NormalityReport<'a> {
    schema_version: &'static str,
    command: &'static str,
    config: &'a ExperimentConfig,
    grid_spec: GridSpec,
    delta: f64,
    eps_ball: f64,
    rows: Vec<NormalityRow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    timing_ms: Option<f64>,
}

/// `q_θ` at the fixed point for the first `n` observations.
fn posterior(model: &dyn ExpFamily, cfg: &ExperimentConfig, ys: &[f64]) -> Result<Hyperparams> {
    let prior = cfg.prior()?;
    let init = match &cfg.init {
        InitChoice::Default => default_init(model, ys, &prior)?.into_vec(),
        InitChoice::Vector(v) => v.clone(),
    };
    let vb = VbConfig::new(init, prior)
        .with_tol(cfg.tol)
        .with_max_iter(cfg.max_iter);
    Ok(run_vb(model, ys, &vb)?.final_hyperparams)
}

pub fn normality(
    cfg: &ExperimentConfig,
    args: &NormalityArgs,
    timing: bool,
) -> Result<Vec<PathBuf>> {
    let start = Instant::now();
    let model = cfg.model.build();
    let model = model.as_ref();
    if model.dim() > 2 {
        return Err(CliError::config("model", "normality needs m <= 2"));
    }
    if !(args.delta > 0.0 && args.eps_ball > 0.0) {
        return Err(CliError::config(
            "delta",
            "delta and eps_ball must be positive",
        ));
    }
    if args.grid_points < 3 || args.density_points < 3 {
        return Err(CliError::config("grid_points", "need at least 3 points"));
    }
    let grid = cfg.grid(1)?;
    let theta = cfg.theta_star()?;
    let n_max = *grid.last().expect("grid is non-empty");
    let ys = models::simulate(model, theta, n_max, cfg.seed())?;
    let plan = GridPlan {
        half_width_sd: 8.0,
        points: args.grid_points,
    };
    let density_points = if model.dim() == 2 {
        args.density_points.min(DENSITY_POINTS_2D)
    } else {
        args.density_points
    };
    cfg.ensure_output_dir()?;
    let mut written = Vec::new();
    let mut out_rows = Vec::new();
    for &n in &grid {
        let hp = posterior(model, cfg, &ys[..n])?;
        let limit = NormalLimit::for_posterior(model, &hp)?;
        let dist = normality_distance(model, &hp, &limit, &plan)?;
        let cond = check_c1_c2_c3(model, &hp, &limit, args.delta, args.eps_ball, &plan)?;
        let density = density_profile(model, &hp, &limit, density_points)?;
        let name = format!("density_n{n}.csv");
        let path = cfg.out_path(&name);
        write_density(&path, &density)?;
        written.push(path);
        out_rows.push(NormalityRow {
            n,
            hyperparams: (&hp).into(),
            theta_hat: limit.mean.to_vec(),
            sigma_n: rows(&limit.cov),
            tv_distance: dist.tv,
            kl_divergence: dist.kl,
            raw_mass: dist.raw_mass,
            c1_top_eig: cond.c1_top_eig,
            c2_ratio_bounds: [cond.c2_ratio_bounds.0, cond.c2_ratio_bounds.1],
            c2_points: cond.c2_points,
            c3_mass: cond.c3_mass,
            density_file: name,
        });
    }
    let report = NormalityReport {
        schema_version: crate::config::SCHEMA_VERSION,
        command: "normality",
        config: cfg,
        grid_spec: GridSpec {
            rule: "composite Simpson",
            half_width_sd: plan.half_width_sd,
            points_per_axis: plan.points,
            normalization_tol: NORMALIZATION_TOL,
        },
        delta: args.delta,
        eps_ball: args.eps_ball,
        rows: out_rows,
        timing_ms: elapsed_ms(start, timing),
    };
    let path = cfg.out_path("normality_report.json");
    json::write(&path, &report)?;
    written.push(path);
    Ok(written)
}
