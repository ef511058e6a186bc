use std::path::PathBuf;
use std::time::Instant;

use serde::Serialize;
use vblab_core::asymptotics::{
    covariance_ratio, verify_large_sample_limits, verify_psd_inequality,
};
use vblab_core::laplace::{check_assumptions, SamplingPlan, TiltedObjective};
use vblab_core::linalg::{self, Matrix};
use vblab_core::rng::derive_seed;

use super::{elapsed_ms, load_dataset, run_fit, FitSummary};
use crate::cli::{DataArgs, MonteCarloArgs};
use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};
use crate::io::DatasetMeta;
use crate::json;
use crate::report::{rows, AssumptionOut, DatasetInfo, LimitCheckOut};

/// Laplace spot-check radii.
const SPOT_EPS: f64 = 0.2;
const SPOT_DELTA: f64 = 0.1;

#[derive(Serialize)]
struct JacobianSpectrum {
    /// Eigen-decomposition of the symmetric part of `DΦₙ`, ascending.
    eigenvalues: Vec<f64>,
    eigenvectors: Vec<Vec<f64>>,
    closed_form_spectral_norm: Option<f64>,
    /// The contraction bound asserted for `DΦₙ` in the local-convergence argument.
    claimed_bound: f64,
}

#[derive(Serialize)]
struct PsdOut {
    difference: Vec<Vec<f64>>,
    min_eigenvalue: f64,
    min_eigenvector: Vec<f64>,
    standard_error: f64,
    passes: bool,
    moment_estimate: Vec<Vec<f64>>,
    moment_standard_error: Vec<Vec<f64>>,
    samples: usize,
}

#[derive(Serialize)]
struct LimitsOut {
    n: usize,
    mc_samples: usize,
    mean_limit: LimitCheckOut,
    jacobian_limit: LimitCheckOut,
    complete_data_identity: LimitCheckOut,
    passes: bool,
}

#[derive(Serialize)]
struct RatioOut {
    n: usize,
    ratio_eigenvalues: Vec<f64>,
    exact_reference: f64,
    half_reference: f64,
}

#[derive(Serialize)]
struct DiagnoseReport<'a> {
    schema_version: &'static str,
    command: &'static str,
    config: &'a ExperimentConfig,
    dataset: DatasetInfo,
    theta_star: Vec<f64>,
    theta_star_source: &'static str,
    #[serde(flatten)]
    fit: FitSummary,
    jacobian_spectrum: Option<JacobianSpectrum>,
    psd_inequality: PsdOut,
    limits: LimitsOut,
    covariance_ratio: Option<RatioOut>,
    laplace_assumptions: Option<AssumptionOut>,
    laplace_failure: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    timing_ms: Option<f64>,
}

pub fn diagnose(
    cfg: &ExperimentConfig,
    data: &DataArgs,
    mc: &MonteCarloArgs,
    timing: bool,
) -> Result<Vec<PathBuf>> {
    let start = Instant::now();
    let (path, ys) = load_dataset(cfg, data)?;
    let model = cfg.model.build();
    let model = model.as_ref();
    let (summary, trace) = run_fit(model, cfg, &ys)?;

    let sidecar =
        DatasetMeta::read(&DatasetMeta::path_for(&path))?.filter(|m| m.model == cfg.model.as_str());
    let (theta_star, source) = match (&cfg.theta_star, sidecar, &summary.fixed_point) {
        (Some(t), _, _) => (t.clone(), "config"),
        (None, Some(m), _) => (m.theta_star, "sidecar"),
        (None, None, Some(fp)) => (fp.clone(), "fixed_point"),
        (None, None, None) => {
            return Err(CliError::config(
                "theta_star",
                "required when the fit fails and the dataset has no sidecar",
            ))
        }
    };
    if !model.in_domain(&theta_star) {
        return Err(CliError::config(
            "theta_star",
            "outside the parameter domain",
        ));
    }

    let jacobian_spectrum = summary.jacobian.as_ref().map(|j| {
        let m = j.len();
        let jac = Matrix::from_fn(m, m, |a, b| j[a][b]);
        let (vals, vecs) = linalg::sym_eigen(&linalg::symmetrize(&jac));
        JacobianSpectrum {
            eigenvalues: vals,
            eigenvectors: (0..m)
                .map(|c| vecs.column(c).iter().copied().collect())
                .collect(),
            closed_form_spectral_norm: cfg.model.closed_form_spectral_norm(ys.len(), cfg.alpha0),
            claimed_bound: 0.5,
        }
    });

    let seed = cfg.seed();
    let psd = verify_psd_inequality(model, &theta_star, mc.mc_samples, derive_seed(seed, 16))?;
    let limits = verify_large_sample_limits(
        model,
        &theta_star,
        mc.limits_n,
        derive_seed(seed, 17),
        mc.mc_samples,
    )?;

    let (covariance_ratio, laplace_assumptions, laplace_failure) = match &trace {
        Some(t) => {
            let hp = &t.final_hyperparams;
            let n = ys.len().max(1);
            let ratio = covariance_ratio(model, hp, &theta_star, n)?;
            let obj = TiltedObjective::from_hyperparams(hp);
            let plan = SamplingPlan::quasi_uniform(model.dim(), SPOT_EPS, SPOT_DELTA);
            let (spot, fail) = match check_assumptions(model, &obj, SPOT_EPS, SPOT_DELTA, &plan) {
                Ok(r) => (Some(AssumptionOut::new(&r, SPOT_EPS, SPOT_DELTA)), None),
                Err(e) => (None, Some(e.to_string())),
            };
            let nf = n as f64;
            (
                Some(RatioOut {
                    n,
                    ratio_eigenvalues: ratio,
                    exact_reference: nf / (nf + cfg.alpha0),
                    half_reference: 0.5,
                }),
                spot,
                fail,
            )
        }
        None => (None, None, None),
    };

    let report = DiagnoseReport {
        schema_version: crate::config::SCHEMA_VERSION,
        command: "diagnose",
        config: cfg,
        dataset: DatasetInfo {
            path: path.display().to_string(),
            n: ys.len(),
        },
        theta_star,
        theta_star_source: source,
        fit: summary,
        jacobian_spectrum,
        psd_inequality: PsdOut {
            difference: rows(&psd.difference),
            min_eigenvalue: psd.min_eigenvalue,
            min_eigenvector: psd.min_eigenvector.clone(),
            standard_error: psd.standard_error,
            passes: psd.passes,
            moment_estimate: rows(&psd.moments.estimate),
            moment_standard_error: rows(&psd.moments.standard_error),
            samples: psd.moments.samples,
        },
        limits: LimitsOut {
            n: mc.limits_n,
            mc_samples: mc.mc_samples,
            passes: limits.passes(),
            mean_limit: (&limits.mean_limit).into(),
            jacobian_limit: (&limits.jacobian_limit).into(),
            complete_data_identity: (&limits.complete_data_identity).into(),
        },
        covariance_ratio,
        laplace_assumptions,
        laplace_failure,
        timing_ms: elapsed_ms(start, timing),
    };
    cfg.ensure_output_dir()?;
    let out = cfg.out_path("diagnose_report.json");
    json::write(&out, &report)?;
    Ok(vec![out])
}
