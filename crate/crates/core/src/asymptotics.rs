//! Finite-sample diagnostics for the limit objects of the convergence and
//! asymptotic-normality arguments: the normal limit of `qₙ`, the steepness,
//! smoothness and concentration conditions, the conditional-mean moment
//! matrix and its PSD bound, and the large-sample limits behind them.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;

use crate::error::{Error, Result};
use crate::expfam::{
    fd, prior_log_normalizer, ExpFamily, Hyperparams, NaturalParams, SufficientStat,
};
use crate::laplace::{posterior_cov_laplace, SamplingPlan, TiltedObjective};
use crate::linalg::{self, Matrix};
use crate::models::{simulate, simulate_complete};
use crate::quadrature::SimpsonGrid;
use crate::rng::derive_seed;
use crate::vb::{self, default_init, run_vb, VbConfig};

/// `θ̂ₙ` solving `Dψ(θ) = (Σr/n + β₀/n)/(1 + α₀/n)`. `α₀ = 0` is allowed.
pub fn theta_hat<M: ExpFamily + ?Sized>(
    model: &M,
    r: &[SufficientStat],
    alpha0: f64,
    beta0: &[f64],
) -> Result<NaturalParams> {
    let n = r.len();
    if n == 0 {
        return Err(Error::InvalidInput(
            "at least one observation is required".into(),
        ));
    }
    if beta0.len() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            got: beta0.len(),
        });
    }
    let alpha = n as f64 + alpha0;
    let mut beta = beta0.to_vec();
    for ri in r {
        for (b, v) in beta.iter_mut().zip(ri.iter()) {
            *b += v;
        }
    }
    TiltedObjective::new(n, alpha0, beta.iter().map(|b| b / alpha).collect())?.minimiser(model)
}

/// `Σₙ = [(n + α₀) D²ψ(θ̂ₙ)]⁻¹`.
pub fn sigma_n<M: ExpFamily + ?Sized>(
    model: &M,
    theta_hat: &[f64],
    n: usize,
    alpha0: f64,
) -> Result<Matrix> {
    if !model.in_domain(theta_hat) {
        return Err(Error::OutsideDomain);
    }
    let scale = n as f64 + alpha0;
    if !(scale > 0.0) {
        return Err(Error::InvalidInput("n + alpha0 must be positive".into()));
    }
    Ok(linalg::spd_inverse(&(model.hess_psi(theta_hat) * scale))?.0)
}

/// `𝒩(θ̂ₙ, Σₙ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalLimit {
    pub mean: NaturalParams,
    pub cov: Matrix,
}

impl NormalLimit {
    /// Limit of `q_θ(hp)`: centre solves `Dψ = β/α`, covariance `[αD²ψ]⁻¹`.
    pub fn for_posterior<M: ExpFamily + ?Sized>(model: &M, hp: &Hyperparams) -> Result<Self> {
        let mean = TiltedObjective::from_hyperparams(hp).minimiser(model)?;
        let cov = linalg::spd_inverse(&(model.hess_psi(&mean) * hp.alpha))?.0;
        Ok(Self { mean, cov })
    }

    pub fn log_density(&self, theta: &[f64]) -> Result<f64> {
        let (prec, log_det) = linalg::spd_inverse(&self.cov)?;
        Ok(gaussian_log_density(theta, &self.mean, &prec, log_det))
    }
}

fn gaussian_log_density(theta: &[f64], mean: &[f64], prec: &Matrix, log_det_cov: f64) -> f64 {
    let m = theta.len();
    let d: Vec<f64> = theta.iter().zip(mean).map(|(a, b)| a - b).collect();
    let mut quad = 0.0;
    for i in 0..m {
        for j in 0..m {
            quad += d[i] * prec[(i, j)] * d[j];
        }
    }
    -0.5 * quad - 0.5 * (m as f64 * (2.0 * core::f64::consts::PI).ln() + log_det_cov)
}

/// Composite Simpson grid per axis spanning `mean ± half_width_sd · sd`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPlan {
    pub half_width_sd: f64,
    pub points: usize,
}

impl Default for GridPlan {
    fn default() -> Self {
        Self {
            half_width_sd: 8.0,
            points: 4097,
        }
    }
}

/// Allowed deviation of the grid-normalized `qₙ` mass from one.
pub const NORMALIZATION_TOL: f64 = 1e-4;

fn axes(center: &[f64], half_widths: &[f64], points: usize) -> Result<Vec<SimpsonGrid>> {
    center
        .iter()
        .zip(half_widths)
        .map(|(c, h)| SimpsonGrid::centered(*c, *h, points))
        .collect()
}

fn for_each_node<F: FnMut(&[f64], f64)>(grids: &[SimpsonGrid], mut f: F) -> Result<()> {
    match grids.len() {
        1 => {
            let g = &grids[0];
            for i in 0..g.points {
                f(&[g.node(i)], g.weight(i));
            }
        }
        2 => {
            let (g0, g1) = (&grids[0], &grids[1]);
            let mut t = [0.0; 2];
            for i in 0..g0.points {
                t[0] = g0.node(i);
                let w0 = g0.weight(i);
                for j in 0..g1.points {
                    t[1] = g1.node(j);
                    f(&t, w0 * g1.weight(j));
                }
            }
        }
        _ => {
            return Err(Error::ApproximationUnavailable(
                "grid quadrature supports m <= 2".into(),
            ))
        }
    }
    Ok(())
}

fn check_grid_dim<M: ExpFamily + ?Sized>(model: &M) -> Result<()> {
    if model.dim() > 2 {
        return Err(Error::ApproximationUnavailable(
            "grid quadrature supports m <= 2".into(),
        ));
    }
    Ok(())
}

fn limit_sds(limit: &NormalLimit) -> Vec<f64> {
    (0..limit.cov.nrows())
        .map(|j| limit.cov[(j, j)].sqrt())
        .collect()
}

/// Total variation (primary) and KL (secondary) between `qₙ` and its limit.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalityDistance {
    pub tv: f64,
    /// `KL(qₙ ‖ 𝒩)`, when finite on the grid.
    pub kl: Option<f64>,
    /// Grid mass of `qₙ` before renormalization.
    pub raw_mass: f64,
}

/// `½∫|qₙ − 𝒩(θ̂ₙ, Σₙ)|` by Simpson quadrature over `limit.mean ± 8 sd`.
pub fn normality_distance<M: ExpFamily + ?Sized>(
    model: &M,
    hp: &Hyperparams,
    limit: &NormalLimit,
    grid: &GridPlan,
) -> Result<NormalityDistance> {
    check_grid_dim(model)?;
    let log_h = prior_log_normalizer(model, hp)?;
    let (prec, log_det) = linalg::spd_inverse(&limit.cov)?;
    let half: Vec<f64> = limit_sds(limit)
        .iter()
        .map(|s| s * grid.half_width_sd)
        .collect();
    let grids = axes(&limit.mean, &half, grid.points)?;
    let log_q = |t: &[f64]| -> f64 {
        if model.in_domain(t) {
            log_h + linalg::dot(t, &hp.beta) - hp.alpha * model.psi(t)
        } else {
            f64::NEG_INFINITY
        }
    };
    let mut mass = 0.0;
    for_each_node(&grids, |t, w| mass += w * log_q(t).exp())?;
    let deviation = (mass - 1.0).abs();
    if !(deviation <= NORMALIZATION_TOL) {
        return Err(Error::GridTooCoarse { deviation });
    }
    let log_mass = mass.ln();
    let mut tv = 0.0;
    let mut kl = 0.0;
    let mut kl_finite = true;
    for_each_node(&grids, |t, w| {
        let lq = log_q(t) - log_mass;
        let lp = gaussian_log_density(t, &limit.mean, &prec, log_det);
        let q = lq.exp();
        tv += w * (q - lp.exp()).abs();
        if q > 0.0 {
            let term = q * (lq - lp);
            if term.is_finite() {
                kl += w * term;
            } else {
                kl_finite = false;
            }
        }
    })?;
    Ok(NormalityDistance {
        tv: 0.5 * tv,
        kl: if kl_finite { Some(kl.max(0.0)) } else { None },
        raw_mass: mass,
    })
}

/// `(θ, qₙ(θ), 𝒩(θ))` on a regular grid over `limit.mean ± 8 sd`, for plotting.
pub fn density_profile<M: ExpFamily + ?Sized>(
    model: &M,
    hp: &Hyperparams,
    limit: &NormalLimit,
    points: usize,
) -> Result<Vec<(Vec<f64>, f64, f64)>> {
    check_grid_dim(model)?;
    let log_h = prior_log_normalizer(model, hp)?;
    let (prec, log_det) = linalg::spd_inverse(&limit.cov)?;
    let half: Vec<f64> = limit_sds(limit).iter().map(|s| s * 8.0).collect();
    let grids = axes(&limit.mean, &half, points)?;
    let mut out = Vec::new();
    for_each_node(&grids, |t, _| {
        let q = if model.in_domain(t) {
            (log_h + linalg::dot(t, &hp.beta) - hp.alpha * model.psi(t)).exp()
        } else {
            0.0
        };
        let p = gaussian_log_density(t, &limit.mean, &prec, log_det).exp();
        out.push((t.to_vec(), q, p));
    })?;
    Ok(out)
}

/// Steepness, smoothness and concentration at one posterior.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionReport {
    /// Largest eigenvalue of `Σₙ`.
    pub c1_top_eig: f64,
    /// Min and max eigenvalue of `D²ψ(θ)[D²ψ(θ̂ₙ)]⁻¹` over the sampled ball.
    pub c2_ratio_bounds: (f64, f64),
    pub c2_points: usize,
    /// `qₙ` mass on `B(θ̂ₙ, δ)`.
    pub c3_mass: f64,
}

pub fn check_c1_c2_c3<M: ExpFamily + ?Sized>(
    model: &M,
    hp: &Hyperparams,
    limit: &NormalLimit,
    delta: f64,
    eps_ball: f64,
    grid: &GridPlan,
) -> Result<ConditionReport> {
    if !(delta > 0.0 && eps_ball > 0.0) {
        return Err(Error::InvalidInput(
            "delta and eps_ball must be positive".into(),
        ));
    }
    check_grid_dim(model)?;
    let (eigs, _) = linalg::sym_eigen(&limit.cov);
    let c1 = eigs.last().copied().unwrap_or(0.0);

    let center = &limit.mean;
    let h0 = model.hess_psi(center);
    let chol = nalgebra::Cholesky::new(h0).ok_or(Error::SingularHessian)?;
    let l_inv = chol.l().try_inverse().ok_or(Error::SingularHessian)?;
    let plan = SamplingPlan::quasi_uniform(model.dim(), eps_ball, 0.5 * eps_ball);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let mut c2_points = 0;
    for off in plan.offsets.iter().filter(|o| linalg::norm(o) <= eps_ball) {
        let theta: Vec<f64> = center.iter().zip(off).map(|(a, b)| a + b).collect();
        if !model.in_domain(&theta) {
            continue;
        }
        let rel = &l_inv * model.hess_psi(&theta) * l_inv.transpose();
        let (ev, _) = linalg::sym_eigen(&rel);
        lo = lo.min(ev[0]);
        hi = hi.max(ev[ev.len() - 1]);
        c2_points += 1;
    }

    let log_h = prior_log_normalizer(model, hp)?;
    let half: Vec<f64> = limit_sds(limit)
        .iter()
        .map(|s| (s * grid.half_width_sd).max(1.05 * delta))
        .collect();
    let grids = axes(center, &half, grid.points)?;
    let (mut total, mut inside) = (0.0, 0.0);
    for_each_node(&grids, |t, w| {
        if !model.in_domain(t) {
            return;
        }
        let q = (log_h + linalg::dot(t, &hp.beta) - hp.alpha * model.psi(t)).exp();
        total += w * q;
        if linalg::distance(t, center) <= delta {
            inside += w * q;
        }
    })?;
    let deviation = (total - 1.0).abs();
    if !(deviation <= NORMALIZATION_TOL) {
        return Err(Error::GridTooCoarse { deviation });
    }
    Ok(ConditionReport {
        c1_top_eig: c1,
        c2_ratio_bounds: (lo, hi),
        c2_points,
        c3_mass: (inside / total).min(1.0),
    })
}

/// Monte-Carlo estimate of a matrix with entrywise standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixEstimate {
    pub estimate: Matrix,
    pub standard_error: Matrix,
    pub samples: usize,
}

fn outer_stats(cs: &[Vec<f64>]) -> MatrixEstimate {
    let m = cs.first().map_or(0, |c| c.len());
    let n = cs.len() as f64;
    let mut mean = Matrix::zeros(m, m);
    let mut sq = Matrix::zeros(m, m);
    for c in cs {
        for i in 0..m {
            for j in 0..m {
                let v = c[i] * c[j];
                mean[(i, j)] += v;
                sq[(i, j)] += v * v;
            }
        }
    }
    mean /= n;
    let se = Matrix::from_fn(m, m, |i, j| {
        let var = (sq[(i, j)] / n - mean[(i, j)] * mean[(i, j)]) * n / (n - 1.0);
        (var.max(0.0) / n).sqrt()
    });
    MatrixEstimate {
        estimate: mean,
        standard_error: se,
        samples: cs.len(),
    }
}

pub const MIN_MC_SAMPLES: usize = 10_000;
pub const DEFAULT_MC_SAMPLES: usize = 100_000;

/// `cᵢ = rᵢ(θ*) − Dψ(θ*)` for `yᵢ` drawn from the model at θ*.
fn conditional_residuals<M: ExpFamily + ?Sized>(
    model: &M,
    theta_star: &[f64],
    samples: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    let ys = simulate(model, theta_star, samples, seed)?;
    let g = model.grad_psi(theta_star);
    ys.iter()
        .map(|&y| {
            let r = model.e_step(theta_star, y)?;
            Ok(r.iter().zip(&g).map(|(a, b)| a - b).collect())
        })
        .collect()
}

/// `𝔼_y{𝔼_x[φ] 𝔼_x[φ]ᵀ}` with `φ = u − Dψ(θ*)`, by Monte Carlo.
pub fn phi_moment_matrix<M: ExpFamily + ?Sized>(
    model: &M,
    theta_star: &[f64],
    mc_samples: usize,
    seed: u64,
) -> Result<MatrixEstimate> {
    if mc_samples < MIN_MC_SAMPLES {
        return Err(Error::InvalidInput(alloc::format!(
            "at least {MIN_MC_SAMPLES} Monte-Carlo samples are required"
        )));
    }
    Ok(outer_stats(&conditional_residuals(
        model, theta_star, mc_samples, seed,
    )?))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PsdReport {
    /// `D²ψ(θ*) − 𝔼{𝔼[φ]𝔼[φ]ᵀ}`.
    pub difference: Matrix,
    pub min_eigenvalue: f64,
    pub min_eigenvector: Vec<f64>,
    /// Standard error of the minimum eigenvalue along its eigenvector.
    pub standard_error: f64,
    pub passes: bool,
    pub moments: MatrixEstimate,
}

/// Checks `D²ψ(θ*) − 𝔼{𝔼[φ]𝔼[φ]ᵀ} ⪰ 0` up to three standard errors.
pub fn verify_psd_inequality<M: ExpFamily + ?Sized>(
    model: &M,
    theta_star: &[f64],
    mc_samples: usize,
    seed: u64,
) -> Result<PsdReport> {
    if mc_samples < MIN_MC_SAMPLES {
        return Err(Error::InvalidInput(alloc::format!(
            "at least {MIN_MC_SAMPLES} Monte-Carlo samples are required"
        )));
    }
    let cs = conditional_residuals(model, theta_star, mc_samples, seed)?;
    let moments = outer_stats(&cs);
    let difference = linalg::symmetrize(&(model.hess_psi(theta_star) - &moments.estimate));
    let (vals, vecs) = linalg::sym_eigen(&difference);
    let v: Vec<f64> = vecs.column(0).iter().copied().collect();
    let qs: Vec<f64> = cs.iter().map(|c| linalg::dot(&v, c).powi(2)).collect();
    let standard_error = mean_se(&qs).1;
    let min_eigenvalue = vals[0];
    Ok(PsdReport {
        passes: min_eigenvalue >= -3.0 * standard_error - 1e-12,
        difference,
        min_eigenvalue,
        min_eigenvector: v,
        standard_error,
        moments,
    })
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// One observed-vs-expected comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitCheck {
    pub name: String,
    pub observed: Matrix,
    pub expected: Matrix,
    pub standard_error: Matrix,
    pub max_abs_deviation: f64,
    /// Largest entrywise standard error, the `n^{-1/2}`-scale fluctuation.
    pub fluctuation: f64,
    pub passes: bool,
}

impl LimitCheck {
    fn new(name: &str, observed: Matrix, expected: Matrix, standard_error: Matrix) -> Self {
        let diff = &observed - &expected;
        let max_abs_deviation = linalg::max_abs(&diff);
        let passes = diff
            .iter()
            .zip(standard_error.iter())
            .all(|(d, s)| d.abs() <= 3.0 * s + 1e-9);
        Self {
            name: name.to_string(),
            fluctuation: linalg::max_abs(&standard_error),
            observed,
            expected,
            standard_error,
            max_abs_deviation,
            passes,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LimitsReport {
    /// `β(θ*)/n → Dψ(θ*)`.
    pub mean_limit: LimitCheck,
    /// `∂(β(θ)/n)/∂θ at θ* → D²ψ(θ*) − 𝔼{𝔼[φ]𝔼[φ]ᵀ}`.
    pub jacobian_limit: LimitCheck,
    /// `𝔼[(u − Dψ)(u − Dψ)ᵀ] = D²ψ(θ*)` over complete data.
    pub complete_data_identity: LimitCheck,
}

impl LimitsReport {
    pub fn passes(&self) -> bool {
        self.mean_limit.passes && self.jacobian_limit.passes && self.complete_data_identity.passes
    }
}

/// Finite-sample checks of the large-sample limits at θ*.
pub fn verify_large_sample_limits<M: ExpFamily + ?Sized>(
    model: &M,
    theta_star: &[f64],
    n: usize,
    seed: u64,
    mc_samples: usize,
) -> Result<LimitsReport> {
    if n < 1000 {
        return Err(Error::InvalidInput("n must be at least 1000".into()));
    }
    let m = model.dim();
    let ys = simulate(model, theta_star, n, derive_seed(seed, 18))?;
    let grad = model.grad_psi(theta_star);
    let hess = model.hess_psi(theta_star);

    // Mean of rᵢ(θ*).
    let rs: Vec<Vec<f64>> = ys
        .iter()
        .map(|&y| Ok(model.e_step(theta_star, y)?.0))
        .collect::<Result<_>>()?;
    let mut obs = Matrix::zeros(m, 1);
    let mut se = Matrix::zeros(m, 1);
    for j in 0..m {
        let col: Vec<f64> = rs.iter().map(|r| r[j]).collect();
        let (mu, s) = mean_se(&col);
        obs[(j, 0)] = mu;
        se[(j, 0)] = s;
    }
    let mean_limit = LimitCheck::new(
        "mean_limit",
        obs,
        Matrix::from_column_slice(m, 1, &grad),
        se,
    );

    // Per-observation Jacobians of rᵢ(θ) by central differences.
    let mut jac_sum = Matrix::zeros(m, m);
    let mut jac_sq = Matrix::zeros(m, m);
    for &y in &ys {
        let j = fd::jacobian(
            |t| {
                model
                    .e_step(t, y)
                    .map(|r| r.0)
                    .unwrap_or_else(|_| vec![f64::NAN; m])
            },
            theta_star,
            fd::STEP,
        );
        jac_sum += &j;
        jac_sq += j.component_mul(&j);
    }
    let nf = n as f64;
    let jac = &jac_sum / nf;
    let jac_se = Matrix::from_fn(m, m, |i, k| {
        let var = (jac_sq[(i, k)] / nf - jac[(i, k)] * jac[(i, k)]).max(0.0);
        (var / (nf - 1.0)).sqrt()
    });
    if jac.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteResult("E-step Jacobian".into()));
    }
    let moments = phi_moment_matrix(model, theta_star, mc_samples, derive_seed(seed, 17))?;
    let expected = &hess - &moments.estimate;
    let combined = Matrix::from_fn(m, m, |i, k| {
        (jac_se[(i, k)].powi(2) + moments.standard_error[(i, k)].powi(2)).sqrt()
    });
    let jacobian_limit = LimitCheck::new("jacobian_limit", jac, expected, combined);

    // Complete-data covariance identity.
    let obs = simulate_complete(model, theta_star, mc_samples, derive_seed(seed, 22))?;
    let cs: Vec<Vec<f64>> = obs
        .iter()
        .map(|o| {
            model
                .sufficient_stat(o)
                .iter()
                .zip(&grad)
                .map(|(u, g)| u - g)
                .collect()
        })
        .collect();
    let est = outer_stats(&cs);
    let complete_data_identity = LimitCheck::new(
        "complete_data_identity",
        est.estimate,
        hess,
        est.standard_error,
    );
    Ok(LimitsReport {
        mean_limit,
        jacobian_limit,
        complete_data_identity,
    })
}

/// Covariance of `q_θ(hp)`: closed form, Laplace, then grid quadrature.
pub fn posterior_cov<M: ExpFamily + ?Sized>(model: &M, hp: &Hyperparams) -> Result<Matrix> {
    hp.validate(model)?;
    if let Some(c) = model.posterior_cov_closed(hp) {
        return Ok(c);
    }
    match posterior_cov_laplace(model, &TiltedObjective::from_hyperparams(hp)) {
        Ok(c) if c.iter().all(|v| v.is_finite()) => Ok(c),
        _ => Ok(vb::posterior_quadrature(
            model,
            hp,
            vb::QUADRATURE_POINTS_1D,
            vb::QUADRATURE_POINTS_2D,
        )?
        .cov),
    }
}

/// Eigenvalues of `n·Cov(q_θ)·D²ψ(θ*)`, ascending.
pub fn covariance_ratio<M: ExpFamily + ?Sized>(
    model: &M,
    hp: &Hyperparams,
    theta_star: &[f64],
    n: usize,
) -> Result<Vec<f64>> {
    let cov = posterior_cov(model, hp)? * n as f64;
    let chol = nalgebra::Cholesky::new(model.hess_psi(theta_star)).ok_or(Error::SingularHessian)?;
    let l = chol.l();
    // Same spectrum as n·Cov·D²ψ, in symmetric form.
    let sym = l.transpose() * cov * &l;
    Ok(linalg::sym_eigen(&sym).0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatioRow {
    pub n: usize,
    /// Mean over seeds of each ascending eigenvalue of `n·Cov·D²ψ(θ*)`.
    pub ratio_eigenvalues: Vec<f64>,
    /// Reference line `n/(n + α₀)` from exact conjugate algebra.
    pub exact_reference: f64,
    /// Reference line ½.
    pub half_reference: f64,
    pub seeds: usize,
    pub failures: usize,
}

/// `n·Cov(q_θ)` at the fixed point relative to `[D²ψ(θ*)]⁻¹`, reported
/// against both reference lines.
pub fn limit_ratio_experiment<M: ExpFamily + ?Sized>(
    model: &M,
    theta_star: &[f64],
    n_grid: &[usize],
    seeds: &[u64],
    prior: &Hyperparams,
    tol: f64,
    max_iter: usize,
) -> Result<Vec<RatioRow>> {
    if n_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput("n_grid must be increasing".into()));
    }
    let mut rows = Vec::new();
    for &n in n_grid {
        let mut acc = vec![0.0; model.dim()];
        let mut ok = 0;
        for &seed in seeds {
            let ys = simulate(model, theta_star, n, seed)?;
            let cell = (|| {
                let init = default_init(model, &ys, prior)?;
                let cfg = VbConfig::new(init.into_vec(), prior.clone())
                    .with_tol(tol)
                    .with_max_iter(max_iter);
                let tr = run_vb(model, &ys, &cfg)?;
                covariance_ratio(model, &tr.final_hyperparams, theta_star, n)
            })();
            if let Ok(ev) = cell {
                for (a, e) in acc.iter_mut().zip(ev) {
                    *a += e;
                }
                ok += 1;
            }
        }
        rows.push(RatioRow {
            n,
            ratio_eigenvalues: acc.iter().map(|a| a / ok.max(1) as f64).collect(),
            exact_reference: n as f64 / (n as f64 + prior.alpha),
            half_reference: 0.5,
            seeds: seeds.len(),
            failures: seeds.len() - ok,
        });
    }
    Ok(rows)
}

/// How the distance of a fit from θ* is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorMetric {
    Euclidean,
    /// `|Σⱼ(θ̃ⱼ − θⱼ*)|/√m`, the component along `(1, …, 1)/√m`.
    IdentifiableSum,
}

impl ErrorMetric {
    pub fn distance(self, fit: &[f64], truth: &[f64]) -> f64 {
        match self {
            ErrorMetric::Euclidean => linalg::distance(fit, truth),
            ErrorMetric::IdentifiableSum => {
                let s: f64 = fit.iter().zip(truth).map(|(a, b)| a - b).sum();
                s.abs() / (fit.len() as f64).sqrt()
            }
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ErrorMetric::Euclidean => "euclidean",
            ErrorMetric::IdentifiableSum => "identifiable_sum",
        }
    }
}

/// One `(n, seed)` fit of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub n: usize,
    pub seed: u64,
    pub fixed_point: Vec<f64>,
    pub error: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Median ratio of successive step norms.
    pub contraction: Option<f64>,
    pub ratio_eigenvalues: Vec<f64>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSettings {
    pub prior: Hyperparams,
    pub tol: f64,
    pub max_iter: usize,
    /// `None` uses the default starting point.
    pub init: Option<Vec<f64>>,
    pub metric: ErrorMetric,
}

/// Smallest step norm entering the contraction estimate.
const CONTRACTION_FLOOR: f64 = 1e-11;

pub fn median_step_ratio(step_norms: &[f64]) -> Option<f64> {
    let mut ratios: Vec<f64> = step_norms
        .windows(2)
        .filter(|w| w[1] > CONTRACTION_FLOOR && w[0] > 0.0)
        .map(|w| w[1] / w[0])
        .collect();
    median(&mut ratios)
}

pub fn median(xs: &mut [f64]) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    xs.sort_by(|a, b| a.total_cmp(b));
    let k = xs.len();
    Some(if k % 2 == 1 {
        xs[k / 2]
    } else {
        0.5 * (xs[k / 2 - 1] + xs[k / 2])
    })
}

/// Simulates, fits and summarizes one cell; failures are recorded, not raised.
pub fn sweep_cell<M: ExpFamily + ?Sized>(
    model: &M,
    theta_star: &[f64],
    n: usize,
    seed: u64,
    settings: &SweepSettings,
) -> SweepCell {
    let run = || -> Result<SweepCell> {
        let ys = simulate(model, theta_star, n, seed)?;
        let init = match &settings.init {
            Some(v) => NaturalParams::checked(model, v.clone())?,
            None => default_init(model, &ys, &settings.prior)?,
        };
        let cfg = VbConfig::new(init.into_vec(), settings.prior.clone())
            .with_tol(settings.tol)
            .with_max_iter(settings.max_iter);
        let tr = run_vb(model, &ys, &cfg)?;
        let fixed = tr.fixed_point().to_vec();
        Ok(SweepCell {
            n,
            seed,
            error: settings.metric.distance(&fixed, theta_star),
            iterations: tr.iterations,
            converged: tr.converged,
            contraction: median_step_ratio(&tr.step_norms),
            ratio_eigenvalues: covariance_ratio(model, &tr.final_hyperparams, theta_star, n)?,
            fixed_point: fixed,
            failure: None,
        })
    };
    run().unwrap_or_else(|e| SweepCell {
        n,
        seed,
        fixed_point: Vec::new(),
        error: f64::NAN,
        iterations: 0,
        converged: false,
        contraction: None,
        ratio_eigenvalues: Vec::new(),
        failure: Some(e.to_string()),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub n: usize,
    pub median_error: Option<f64>,
    pub median_contraction: Option<f64>,
    pub mean_ratio_eigenvalues: Vec<f64>,
    pub cells: usize,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepAggregate {
    pub rows: Vec<SweepRow>,
    /// Least-squares slope of log median error on log n.
    pub slope: Option<f64>,
}

/// Aggregates cells by `n` in ascending order.
pub fn aggregate_sweep(cells: &[SweepCell]) -> SweepAggregate {
    let mut ns: Vec<usize> = cells.iter().map(|c| c.n).collect();
    ns.sort_unstable();
    ns.dedup();
    let rows: Vec<SweepRow> = ns
        .iter()
        .map(|&n| {
            let group: Vec<&SweepCell> = cells.iter().filter(|c| c.n == n).collect();
            let good: Vec<&&SweepCell> = group.iter().filter(|c| c.failure.is_none()).collect();
            let mut errs: Vec<f64> = good.iter().map(|c| c.error).collect();
            let mut cons: Vec<f64> = good.iter().filter_map(|c| c.contraction).collect();
            let dim = good.first().map_or(0, |c| c.ratio_eigenvalues.len());
            let mut ratio = vec![0.0; dim];
            for c in &good {
                for (a, v) in ratio.iter_mut().zip(&c.ratio_eigenvalues) {
                    *a += v;
                }
            }
            SweepRow {
                n,
                median_error: median(&mut errs),
                median_contraction: median(&mut cons),
                mean_ratio_eigenvalues: ratio
                    .iter()
                    .map(|r| r / good.len().max(1) as f64)
                    .collect(),
                cells: group.len(),
                failures: group.len() - good.len(),
            }
        })
        .collect();
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter_map(|r| match r.median_error {
            Some(e) if e > 0.0 => Some(((r.n as f64).ln(), e.ln())),
            _ => None,
        })
        .collect();
    SweepAggregate {
        slope: least_squares_slope(&pts),
        rows,
    }
}

pub fn least_squares_slope(pts: &[(f64, f64)]) -> Option<f64> {
    if pts.len() < 2 {
        return None;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        None
    } else {
        Some(sxy / sxx)
    }
}
