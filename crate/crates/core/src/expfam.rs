//! Natural exponential families with latent variables and their conjugate priors.
//!
//! A model supplies the log-partition `ψ` and its derivative stack, the
//! per-observation latent expectations used by the variational E-step, a
//! complete-data sampler, and optional closed forms for posterior summaries.

use alloc::string::ToString;
use alloc::vec::Vec;
use alloc::{format, vec};
use core::ops::Deref;

#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::rng::StreamRng;
use crate::tensor::SymTensor;

/// Natural parameter vector θ.
#[derive(Debug, Clone, PartialEq)]
pub struct NaturalParams(Vec<f64>);

impl NaturalParams {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    /// Checks length, finiteness and domain membership for `model`.
    pub fn checked<M: ExpFamily + ?Sized>(model: &M, values: Vec<f64>) -> Result<Self> {
        if values.len() != model.dim() {
            return Err(Error::DimensionMismatch {
                expected: model.dim(),
                got: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(
                "natural parameters must be finite".into(),
            ));
        }
        if !model.in_domain(&values) {
            return Err(Error::OutsideDomain);
        }
        Ok(Self(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for NaturalParams {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for NaturalParams {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

/// Conjugate hyperparameters `(α, β)` of `exp{θᵀβ − αψ(θ)}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Hyperparams {
    pub alpha: f64,
    pub beta: Vec<f64>,
}

impl Hyperparams {
    pub fn new(alpha: f64, beta: Vec<f64>) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::InvalidInput(format!(
                "alpha must be > 0, got {alpha}"
            )));
        }
        if beta.iter().any(|b| !b.is_finite()) {
            return Err(Error::InvalidInput("beta must be finite".into()));
        }
        Ok(Self { alpha, beta })
    }

    /// Full validity for `model`, including integrability where the model
    /// can decide it.
    pub fn validate<M: ExpFamily + ?Sized>(&self, model: &M) -> Result<()> {
        if self.beta.len() != model.dim() {
            return Err(Error::DimensionMismatch {
                expected: model.dim(),
                got: self.beta.len(),
            });
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0) || self.beta.iter().any(|b| !b.is_finite())
        {
            return Err(Error::InvalidInput(
                "hyperparameters must be finite with alpha > 0".into(),
            ));
        }
        if model.hyperparams_integrable(self) == Some(false) {
            return Err(Error::DivergentIntegral { alpha: self.alpha });
        }
        Ok(())
    }

    /// `β/α`, the moment-matching target of the tilted objective.
    pub fn scaled_target(&self) -> Vec<f64> {
        self.beta.iter().map(|b| b / self.alpha).collect()
    }
}

/// Realization or expectation of the sufficient statistic `u(x, y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SufficientStat(pub Vec<f64>);

impl Deref for SufficientStat {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// One complete-data draw; `latent` is `None` for models without a latent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompleteObs {
    pub latent: Option<f64>,
    pub y: f64,
}

/// What the optimal latent factor `q(x_i)` contributes for one observation.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentSummary {
    pub r: SufficientStat,
    pub entropy: f64,
    pub log_f: f64,
}

/// Exact posterior over θ, where a model can supply it.
#[derive(Debug, Clone, PartialEq)]
pub enum ExactPosterior {
    Gaussian {
        mean: Vec<f64>,
        precision: Matrix,
    },
    /// θ = ln λ with λ ~ Gamma(shape, rate).
    LogGamma {
        shape: f64,
        rate: f64,
    },
}

impl ExactPosterior {
    pub fn mean(&self) -> Vec<f64> {
        match self {
            Self::Gaussian { mean, .. } => mean.clone(),
            Self::LogGamma { shape, rate } => vec![crate::special::digamma(*shape) - rate.ln()],
        }
    }

    pub fn covariance(&self) -> Result<Matrix> {
        match self {
            Self::Gaussian { precision, .. } => Ok(linalg::spd_inverse(precision)?.0),
            Self::LogGamma { shape, .. } => {
                Ok(Matrix::from_element(1, 1, crate::special::trigamma(*shape)))
            }
        }
    }
}

/// A natural exponential family `f(x,y) exp{θᵀu(x,y) − ψ(θ)}` with a scalar
/// observation and at most a scalar latent.
///
/// Implementations are immutable and shared across threads.
pub trait ExpFamily: Sync {
    fn name(&self) -> &str;

    fn dim(&self) -> usize;

    fn in_domain(&self, theta: &[f64]) -> bool {
        theta.iter().all(|t| t.is_finite())
    }

    fn psi(&self, theta: &[f64]) -> f64;

    fn grad_psi(&self, theta: &[f64]) -> Vec<f64> {
        fd::gradient(|t| self.psi(t), theta)
    }

    fn hess_psi(&self, theta: &[f64]) -> Matrix {
        fd::jacobian_symmetric(|t| self.grad_psi(t), theta)
    }

    fn psi_d3(&self, theta: &[f64]) -> SymTensor {
        fd::third_from_hessian(|t| self.hess_psi(t), theta)
    }

    fn psi_d4(&self, theta: &[f64]) -> SymTensor {
        fd::fourth_from_hessian(|t| self.hess_psi(t), theta, fd::HIGHER_STEP)
    }

    /// `⟨u(x_i, y_i)⟩` under the optimal latent factor at θ.
    fn e_step(&self, theta: &[f64], y: f64) -> Result<SufficientStat>;

    fn latent_entropy(&self, theta: &[f64], y: f64) -> Result<f64>;

    /// `⟨log f(x_i, y_i)⟩` under the optimal latent factor at θ.
    fn log_f_expectation(&self, theta: &[f64], y: f64) -> Result<f64>;

    fn latent_summary(&self, theta: &[f64], y: f64) -> Result<LatentSummary> {
        Ok(LatentSummary {
            r: self.e_step(theta, y)?,
            entropy: self.latent_entropy(theta, y)?,
            log_f: self.log_f_expectation(theta, y)?,
        })
    }

    fn sufficient_stat(&self, obs: &CompleteObs) -> Vec<f64>;

    fn sample_complete(&self, theta: &[f64], rng: &mut StreamRng) -> Result<CompleteObs>;

    /// Whether `exp{θᵀβ − αψ(θ)}` integrates; `None` when undecidable in
    /// closed form.
    fn hyperparams_integrable(&self, _hp: &Hyperparams) -> Option<bool> {
        None
    }

    fn log_normalizer_closed(&self, _hp: &Hyperparams) -> Option<f64> {
        None
    }

    fn posterior_mean_closed(&self, _hp: &Hyperparams) -> Option<Vec<f64>> {
        None
    }

    fn posterior_cov_closed(&self, _hp: &Hyperparams) -> Option<Matrix> {
        None
    }

    /// `⟨ψ(θ)⟩` under `q_θ(hp)`.
    fn expected_psi_closed(&self, _hp: &Hyperparams) -> Option<f64> {
        None
    }

    fn exact_posterior(&self, _ys: &[f64], _prior: &Hyperparams) -> Result<ExactPosterior> {
        Err(Error::UnsupportedModel(self.name().to_string()))
    }

    /// Moment target for `Dψ` implied by the observed data, used to pick a
    /// starting point when no prior mean is available.
    fn moment_target(&self, _ys: &[f64]) -> Option<Vec<f64>> {
        None
    }
}

/// Central finite differences.
pub mod fd {
    use super::*;

    /// Relative step for first differences.
    pub const STEP: f64 = 1e-5;
    /// Relative step for differences of the Hessian.
    pub const HIGHER_STEP: f64 = 1e-3;

    pub fn step_for(theta_j: f64, rel: f64) -> f64 {
        rel * theta_j.abs().max(1.0)
    }

    fn shifted(theta: &[f64], j: usize, h: f64) -> Vec<f64> {
        let mut t = theta.to_vec();
        t[j] += h;
        t
    }

    pub fn gradient<F: Fn(&[f64]) -> f64>(f: F, theta: &[f64]) -> Vec<f64> {
        (0..theta.len())
            .map(|j| {
                let h = step_for(theta[j], STEP);
                (f(&shifted(theta, j, h)) - f(&shifted(theta, j, -h))) / (2.0 * h)
            })
            .collect()
    }

    /// Jacobian of a vector map, column `j` from a central difference in θⱼ.
    pub fn jacobian<F: Fn(&[f64]) -> Vec<f64>>(f: F, theta: &[f64], rel: f64) -> Matrix {
        let m = theta.len();
        let mut jac: Option<Matrix> = None;
        for j in 0..m {
            let h = step_for(theta[j], rel);
            let plus = f(&shifted(theta, j, h));
            let minus = f(&shifted(theta, j, -h));
            let out = jac.get_or_insert_with(|| Matrix::zeros(plus.len(), m));
            for i in 0..plus.len() {
                out[(i, j)] = (plus[i] - minus[i]) / (2.0 * h);
            }
        }
        jac.unwrap_or_else(|| Matrix::zeros(0, 0))
    }

    pub fn jacobian_symmetric<F: Fn(&[f64]) -> Vec<f64>>(f: F, theta: &[f64]) -> Matrix {
        linalg::symmetrize(&jacobian(f, theta, STEP))
    }

    /// Hessian from second differences of a scalar function.
    pub fn hessian_from_values<F: Fn(&[f64]) -> f64>(f: F, theta: &[f64], rel: f64) -> Matrix {
        let m = theta.len();
        let f0 = f(theta);
        let mut out = Matrix::zeros(m, m);
        for k in 0..m {
            let hk = step_for(theta[k], rel);
            out[(k, k)] =
                (f(&shifted(theta, k, hk)) - 2.0 * f0 + f(&shifted(theta, k, -hk))) / (hk * hk);
            for l in (k + 1)..m {
                let hl = step_for(theta[l], rel);
                let at = |sk: f64, sl: f64| {
                    let mut t = theta.to_vec();
                    t[k] += sk * hk;
                    t[l] += sl * hl;
                    f(&t)
                };
                let v = (at(1.0, 1.0) - at(1.0, -1.0) - at(-1.0, 1.0) + at(-1.0, -1.0))
                    / (4.0 * hk * hl);
                out[(k, l)] = v;
                out[(l, k)] = v;
            }
        }
        out
    }

    pub fn third_from_hessian<F: Fn(&[f64]) -> Matrix>(hess: F, theta: &[f64]) -> SymTensor {
        let m = theta.len();
        let slices: Vec<Matrix> = (0..m)
            .map(|k| {
                let h = step_for(theta[k], HIGHER_STEP);
                (hess(&shifted(theta, k, h)) - hess(&shifted(theta, k, -h))) / (2.0 * h)
            })
            .collect();
        SymTensor::symmetrized(m, 3, |i| slices[i[2]][(i[0], i[1])])
    }

    /// Nested second differences of the Hessian.
    pub fn fourth_from_hessian<F: Fn(&[f64]) -> Matrix>(
        hess: F,
        theta: &[f64],
        rel: f64,
    ) -> SymTensor {
        let m = theta.len();
        let center = hess(theta);
        let mut blocks = vec![Matrix::zeros(m, m); m * m];
        for k in 0..m {
            let hk = step_for(theta[k], rel);
            for l in k..m {
                let block = if k == l {
                    (hess(&shifted(theta, k, hk)) - &center * 2.0 + hess(&shifted(theta, k, -hk)))
                        / (hk * hk)
                } else {
                    let hl = step_for(theta[l], rel);
                    let at = |sk: f64, sl: f64| {
                        let mut t = theta.to_vec();
                        t[k] += sk * hk;
                        t[l] += sl * hl;
                        hess(&t)
                    };
                    (at(1.0, 1.0) - at(1.0, -1.0) - at(-1.0, 1.0) + at(-1.0, -1.0))
                        / (4.0 * hk * hl)
                };
                blocks[k * m + l] = block.clone();
                blocks[l * m + k] = block;
            }
        }
        SymTensor::symmetrized(m, 4, |i| blocks[i[2] * m + i[3]][(i[0], i[1])])
    }
}

/// Finite-difference Hessian of ψ from the model's gradient, symmetrized.
pub fn hessian_fd<M: ExpFamily + ?Sized>(model: &M, theta: &[f64]) -> Result<Matrix> {
    if theta.len() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            got: theta.len(),
        });
    }
    for j in 0..theta.len() {
        let h = fd::step_for(theta[j], fd::STEP);
        for s in [-2.0, 2.0] {
            let mut t = theta.to_vec();
            t[j] += s * h;
            if !model.in_domain(&t) {
                return Err(Error::DomainEscape);
            }
        }
    }
    Ok(fd::jacobian_symmetric(|t| model.grad_psi(t), theta))
}

pub const NEWTON_MAX_ITER: usize = 100;
const ARMIJO: f64 = 1e-4;

/// Solves `Dψ(θ) = target`, the minimiser of the strictly convex
/// `ψ(θ) − θᵀtarget`, by damped Newton with halving line search.
pub fn newton_solve_moment_match<M: ExpFamily + ?Sized>(
    model: &M,
    target: &[f64],
    init: &[f64],
    tol: f64,
) -> Result<NaturalParams> {
    let m = model.dim();
    if target.len() != m || init.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: if target.len() != m {
                target.len()
            } else {
                init.len()
            },
        });
    }
    if target.iter().any(|t| !t.is_finite()) {
        return Err(Error::InvalidInput("moment target must be finite".into()));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidInput("tolerance must be positive".into()));
    }
    if !model.in_domain(init) {
        return Err(Error::OutsideDomain);
    }

    let objective = |t: &[f64]| model.psi(t) - linalg::dot(t, target);
    let residual = |t: &[f64]| -> Vec<f64> {
        model
            .grad_psi(t)
            .iter()
            .zip(target)
            .map(|(g, y)| g - y)
            .collect()
    };

    let mut theta = init.to_vec();
    let mut grad = residual(&theta);
    for iter in 0..NEWTON_MAX_ITER {
        let gnorm = linalg::norm(&grad);
        if !gnorm.is_finite() {
            return Err(Error::NonConvergence("non-finite gradient".into()));
        }
        if gnorm <= tol {
            return Ok(NaturalParams(theta));
        }
        let hess = model.hess_psi(&theta);
        let newton = match linalg::spd_solve(&hess, &grad) {
            Ok(d) => d,
            Err(Error::SingularHessian) if iter > 0 => return Err(Error::NonConvergence(
                "Hessian degenerated along the Newton path; target may lie outside the range of Dψ"
                    .into(),
            )),
            Err(e) => return Err(e),
        };
        let dir: Vec<f64> = newton.iter().map(|d| -d).collect();
        let slope = linalg::dot(&grad, &dir);
        let f0 = objective(&theta);

        let full: Vec<f64> = theta.iter().zip(&dir).map(|(t, d)| t + d).collect();
        if model.in_domain(&full) && linalg::norm(&residual(&full)) <= 0.5 * gnorm {
            theta = full;
            grad = residual(&theta);
            continue;
        }
        let mut step = 1.0;
        let mut accepted = None;
        let mut full_step = None;
        for _ in 0..60 {
            let cand: Vec<f64> = theta.iter().zip(&dir).map(|(t, d)| t + step * d).collect();
            if model.in_domain(&cand) {
                if step == 1.0 {
                    full_step = Some(cand.clone());
                }
                let fc = objective(&cand);
                if fc.is_finite() && fc <= f0 + ARMIJO * step * slope {
                    accepted = Some(cand);
                    break;
                }
            }
            step *= 0.5;
        }
        // Near the root the objective decrease drops below rounding; fall back
        // to the residual norm.
        let next = match (accepted, full_step) {
            (Some(c), _) => c,
            (None, Some(c)) if linalg::norm(&residual(&c)) < gnorm => c,
            _ => {
                return Err(Error::NonConvergence(
                    "line search failed; target may lie outside the range of Dψ".into(),
                ))
            }
        };
        theta = next;
        grad = residual(&theta);
    }
    if linalg::norm(&grad) <= tol {
        return Ok(NaturalParams(theta));
    }
    Err(Error::NonConvergence(format!(
        "iteration cap {NEWTON_MAX_ITER} reached with residual {:e}",
        linalg::norm(&grad)
    )))
}

/// `log h(α, β) = −log ∫ exp{θᵀβ − αψ(θ)} dθ`.
///
/// Uses the model's closed form when present, otherwise the corrected
/// Laplace expansion with unit weight.
pub fn prior_log_normalizer<M: ExpFamily + ?Sized>(model: &M, hp: &Hyperparams) -> Result<f64> {
    hp.validate(model)?;
    if let Some(v) = model.log_normalizer_closed(hp) {
        return Ok(v);
    }
    let obj = crate::laplace::TiltedObjective::from_hyperparams(hp);
    let exp =
        crate::laplace::laplace_expand(model, &obj, &crate::laplace::Weight::One).map_err(|e| {
            match e {
                Error::NonConvergence(_) => Error::DivergentIntegral { alpha: hp.alpha },
                other => other,
            }
        })?;
    Ok(-crate::laplace::laplace_integral(&exp)?.ln_corrected()?)
}
