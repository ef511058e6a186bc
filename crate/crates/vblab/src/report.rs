//! Serializable report pieces shared by the subcommands.

use serde::Serialize;
use vblab_core::asymptotics::LimitCheck;
use vblab_core::laplace::{AssumptionReport, Verdict};
use vblab_core::{Hyperparams, Matrix};

pub fn rows(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct HyperparamsOut {
    pub alpha: f64,
    pub beta: Vec<f64>,
}

impl From<&Hyperparams> for HyperparamsOut {
    fn from(hp: &Hyperparams) -> Self {
        Self {
            alpha: hp.alpha,
            beta: hp.beta.clone(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DatasetInfo {
    pub path: String,
    pub n: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct LimitCheckOut {
    pub observed: Vec<Vec<f64>>,
    pub expected: Vec<Vec<f64>>,
    pub standard_error: Vec<Vec<f64>>,
    pub max_abs_deviation: f64,
    pub fluctuation: f64,
    pub passes: bool,
}

impl From<&LimitCheck> for LimitCheckOut {
    fn from(c: &LimitCheck) -> Self {
        Self {
            observed: rows(&c.observed),
            expected: rows(&c.expected),
            standard_error: rows(&c.standard_error),
            max_abs_deviation: c.max_abs_deviation,
            fluctuation: c.fluctuation,
            passes: c.passes,
        }
    }
}

pub fn verdict(v: Verdict) -> &'static str {
    match v {
        Verdict::Pass => "pass",
        Verdict::Fail => "fail",
        Verdict::Inconclusive => "inconclusive",
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AssumptionOut {
    pub eps: f64,
    pub delta: f64,
    pub max_derivatives: Vec<f64>,
    pub ball_points: usize,
    pub bounded: &'static str,
    pub det_hess: f64,
    pub nondegenerate: &'static str,
    pub shell_max: Option<f64>,
    pub shell_points: usize,
    pub separated: &'static str,
}

impl AssumptionOut {
    pub fn new(r: &AssumptionReport, eps: f64, delta: f64) -> Self {
        Self {
            eps,
            delta,
            max_derivatives: r.max_derivatives.to_vec(),
            ball_points: r.ball_points,
            bounded: verdict(r.bounded),
            det_hess: r.det_hess,
            nondegenerate: verdict(r.nondegenerate),
            shell_max: r.shell_max,
            shell_points: r.shell_points,
            separated: verdict(r.separated),
        }
    }
}
