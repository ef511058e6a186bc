//! Gaussian latent-variable models: `x ~ N(·, 1)` observed through
//! `y = x + w` with unit-variance noise.
//!
//! The complete-data factor is `f(x, y) = exp{−x²/2 − (y−x)²/2}`, which keeps
//! the joint density normalizable in `x`. The constant `log 2π` is carried in ψ.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{E, PI};

#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::expfam::{
    CompleteObs, ExactPosterior, ExpFamily, Hyperparams, LatentSummary, SufficientStat,
};
use crate::linalg::Matrix;
use crate::rng::StreamRng;
use crate::tensor::SymTensor;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Entropy of the latent posterior `N(·, ½)`.
fn latent_entropy_half_var() -> f64 {
    0.5 * (PI * E).ln()
}

/// `⟨−x²/2 − (y−x)²/2⟩` for `x ~ N(mean, ½)`.
fn expected_log_f(mean: f64, y: f64) -> f64 {
    -0.5 * (mean * mean + (y - mean) * (y - mean)) - 0.5
}

fn check_dim(theta: &[f64], m: usize) -> Result<()> {
    if theta.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: theta.len(),
        });
    }
    Ok(())
}

/// Gaussian log-normalizer of `exp{θᵀβ − α(|θ|²/2 + log 2π)}` in `m` dims.
fn gaussian_log_normalizer(hp: &Hyperparams) -> f64 {
    let m = hp.beta.len() as f64;
    let b2: f64 = hp.beta.iter().map(|b| b * b).sum();
    hp.alpha * LN_2PI - b2 / (2.0 * hp.alpha) - 0.5 * m * (2.0 * PI / hp.alpha).ln()
}

/// Two-parameter model: `x ~ N(θ₁, 1)`, `w ~ N(θ₂, 1)`, `y = x + w`, with
/// `u(x, y) = (x, y − x)`. Only `θ₁ + θ₂` is identified by `y`.
#[derive(Debug, Clone, Copy, Default)]
pub struct GaussianConvolution;

impl GaussianConvolution {
    fn latent_mean(theta: &[f64], y: f64) -> f64 {
        0.5 * (y + theta[0] - theta[1])
    }
}

impl ExpFamily for GaussianConvolution {
    fn name(&self) -> &str {
        "A"
    }

    fn dim(&self) -> usize {
        2
    }

    fn psi(&self, theta: &[f64]) -> f64 {
        0.5 * (theta[0] * theta[0] + theta[1] * theta[1]) + LN_2PI
    }

    fn grad_psi(&self, theta: &[f64]) -> Vec<f64> {
        theta.to_vec()
    }

    fn hess_psi(&self, _theta: &[f64]) -> Matrix {
        Matrix::identity(2, 2)
    }

    fn psi_d3(&self, _theta: &[f64]) -> SymTensor {
        SymTensor::zeros(2, 3)
    }

    fn psi_d4(&self, _theta: &[f64]) -> SymTensor {
        SymTensor::zeros(2, 4)
    }

    fn e_step(&self, theta: &[f64], y: f64) -> Result<SufficientStat> {
        check_dim(theta, 2)?;
        let mean = Self::latent_mean(theta, y);
        Ok(SufficientStat(vec![mean, y - mean]))
    }

    fn latent_entropy(&self, theta: &[f64], _y: f64) -> Result<f64> {
        check_dim(theta, 2)?;
        Ok(latent_entropy_half_var())
    }

    fn log_f_expectation(&self, theta: &[f64], y: f64) -> Result<f64> {
        check_dim(theta, 2)?;
        Ok(expected_log_f(Self::latent_mean(theta, y), y))
    }

    fn latent_summary(&self, theta: &[f64], y: f64) -> Result<LatentSummary> {
        check_dim(theta, 2)?;
        let mean = Self::latent_mean(theta, y);
        Ok(LatentSummary {
            r: SufficientStat(vec![mean, y - mean]),
            entropy: latent_entropy_half_var(),
            log_f: expected_log_f(mean, y),
        })
    }

    fn sufficient_stat(&self, obs: &CompleteObs) -> Vec<f64> {
        let x = obs.latent.unwrap_or(0.0);
        vec![x, obs.y - x]
    }

    fn sample_complete(&self, theta: &[f64], rng: &mut StreamRng) -> Result<CompleteObs> {
        check_dim(theta, 2)?;
        let x = theta[0] + rng.sample::<f64, _>(StandardNormal);
        let w = theta[1] + rng.sample::<f64, _>(StandardNormal);
        Ok(CompleteObs {
            latent: Some(x),
            y: x + w,
        })
    }

    fn hyperparams_integrable(&self, hp: &Hyperparams) -> Option<bool> {
        Some(hp.alpha > 0.0)
    }

    fn log_normalizer_closed(&self, hp: &Hyperparams) -> Option<f64> {
        Some(gaussian_log_normalizer(hp))
    }

    fn posterior_mean_closed(&self, hp: &Hyperparams) -> Option<Vec<f64>> {
        Some(hp.scaled_target())
    }

    fn posterior_cov_closed(&self, hp: &Hyperparams) -> Option<Matrix> {
        Some(Matrix::identity(2, 2) / hp.alpha)
    }

    fn expected_psi_closed(&self, hp: &Hyperparams) -> Option<f64> {
        let mean = hp.scaled_target();
        let sq: f64 = mean.iter().map(|m| m * m).sum();
        Some(0.5 * (sq + 2.0 / hp.alpha) + LN_2PI)
    }

    fn exact_posterior(&self, ys: &[f64], prior: &Hyperparams) -> Result<ExactPosterior> {
        let n = ys.len() as f64;
        let half_sum = 0.5 * ys.iter().sum::<f64>();
        let precision = Matrix::identity(2, 2) * prior.alpha + Matrix::from_element(2, 2, 0.5 * n);
        let rhs = [prior.beta[0] + half_sum, prior.beta[1] + half_sum];
        let mean = crate::linalg::spd_solve(&precision, &rhs)?;
        Ok(ExactPosterior::Gaussian { mean, precision })
    }

    fn moment_target(&self, ys: &[f64]) -> Option<Vec<f64>> {
        if ys.is_empty() {
            return None;
        }
        let mean = ys.iter().sum::<f64>() / ys.len() as f64;
        Some(vec![0.5 * mean, 0.5 * mean])
    }
}

/// One-parameter restriction: `x ~ N(θ, 1)`, `y = x + w`, `w ~ N(0, 1)`,
/// with `u(x, y) = x`.
#[derive(Debug, Clone, Copy, Default)]
pub struct ScalarGaussian;

impl ScalarGaussian {
    /// Closed-form variational fixed point `(nȳ/2 + β₀)/(n/2 + α₀)`.
    pub fn fixed_point(ys: &[f64], prior: &Hyperparams) -> f64 {
        let n = ys.len() as f64;
        (0.5 * ys.iter().sum::<f64>() + prior.beta[0]) / (0.5 * n + prior.alpha)
    }
}

impl ExpFamily for ScalarGaussian {
    fn name(&self) -> &str {
        "B"
    }

    fn dim(&self) -> usize {
        1
    }

    fn psi(&self, theta: &[f64]) -> f64 {
        0.5 * theta[0] * theta[0] + LN_2PI
    }

    fn grad_psi(&self, theta: &[f64]) -> Vec<f64> {
        vec![theta[0]]
    }

    fn hess_psi(&self, _theta: &[f64]) -> Matrix {
        Matrix::identity(1, 1)
    }

    fn psi_d3(&self, _theta: &[f64]) -> SymTensor {
        SymTensor::zeros(1, 3)
    }

    fn psi_d4(&self, _theta: &[f64]) -> SymTensor {
        SymTensor::zeros(1, 4)
    }

    fn e_step(&self, theta: &[f64], y: f64) -> Result<SufficientStat> {
        check_dim(theta, 1)?;
        Ok(SufficientStat(vec![0.5 * (y + theta[0])]))
    }

    fn latent_entropy(&self, theta: &[f64], _y: f64) -> Result<f64> {
        check_dim(theta, 1)?;
        Ok(latent_entropy_half_var())
    }

    fn log_f_expectation(&self, theta: &[f64], y: f64) -> Result<f64> {
        check_dim(theta, 1)?;
        Ok(expected_log_f(0.5 * (y + theta[0]), y))
    }

    fn latent_summary(&self, theta: &[f64], y: f64) -> Result<LatentSummary> {
        check_dim(theta, 1)?;
        let mean = 0.5 * (y + theta[0]);
        Ok(LatentSummary {
            r: SufficientStat(vec![mean]),
            entropy: latent_entropy_half_var(),
            log_f: expected_log_f(mean, y),
        })
    }

    fn sufficient_stat(&self, obs: &CompleteObs) -> Vec<f64> {
        vec![obs.latent.unwrap_or(0.0)]
    }

    fn sample_complete(&self, theta: &[f64], rng: &mut StreamRng) -> Result<CompleteObs> {
        check_dim(theta, 1)?;
        let x = theta[0] + rng.sample::<f64, _>(StandardNormal);
        let y = x + rng.sample::<f64, _>(StandardNormal);
        Ok(CompleteObs { latent: Some(x), y })
    }

    fn hyperparams_integrable(&self, hp: &Hyperparams) -> Option<bool> {
        Some(hp.alpha > 0.0)
    }

    fn log_normalizer_closed(&self, hp: &Hyperparams) -> Option<f64> {
        Some(gaussian_log_normalizer(hp))
    }

    fn posterior_mean_closed(&self, hp: &Hyperparams) -> Option<Vec<f64>> {
        Some(hp.scaled_target())
    }

    fn posterior_cov_closed(&self, hp: &Hyperparams) -> Option<Matrix> {
        Some(Matrix::from_element(1, 1, 1.0 / hp.alpha))
    }

    fn expected_psi_closed(&self, hp: &Hyperparams) -> Option<f64> {
        let mean = hp.beta[0] / hp.alpha;
        Some(0.5 * (mean * mean + 1.0 / hp.alpha) + LN_2PI)
    }

    fn exact_posterior(&self, ys: &[f64], prior: &Hyperparams) -> Result<ExactPosterior> {
        let n = ys.len() as f64;
        let precision = prior.alpha + 0.5 * n;
        let mean = (prior.beta[0] + 0.5 * ys.iter().sum::<f64>()) / precision;
        Ok(ExactPosterior::Gaussian {
            mean: vec![mean],
            precision: Matrix::from_element(1, 1, precision),
        })
    }

    fn moment_target(&self, ys: &[f64]) -> Option<Vec<f64>> {
        if ys.is_empty() {
            return None;
        }
        Some(vec![ys.iter().sum::<f64>() / ys.len() as f64])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent check of the latent posterior by trapezoid quadrature of
    /// `f(x, y) exp{θᵀu(x, y)}` over x.
    fn latent_moments_by_quadrature(theta: &[f64], y: f64, model: &dyn ExpFamily) -> Vec<f64> {
        let (lo, hi, n) = (-30.0, 30.0, 60_001);
        let h = (hi - lo) / (n - 1) as f64;
        let mut z = 0.0;
        let mut acc = vec![0.0; model.dim()];
        for i in 0..n {
            let x = lo + i as f64 * h;
            let u = model.sufficient_stat(&CompleteObs { latent: Some(x), y });
            let lw = -x * x / 2.0 - (y - x) * (y - x) / 2.0
                + u.iter().zip(theta).map(|(a, b)| a * b).sum::<f64>();
            let w = lw.exp();
            z += w;
            for (a, ui) in acc.iter_mut().zip(&u) {
                *a += w * ui;
            }
        }
        acc.iter().map(|a| a / z).collect()
    }

    #[test]
    fn e_step_examples() {
        let r = GaussianConvolution.e_step(&[0.0, 0.0], 4.0).unwrap();
        assert_eq!(r.0, vec![2.0, 2.0]);
        let r = ScalarGaussian.e_step(&[1.0], 3.0).unwrap();
        assert_eq!(r.0, vec![2.0]);
    }

    #[test]
    fn e_step_matches_quadrature() {
        let q = latent_moments_by_quadrature(&[0.0, 0.0], 4.0, &GaussianConvolution);
        assert!((q[0] - 2.0).abs() < 1e-9 && (q[1] - 2.0).abs() < 1e-9);
        let q = latent_moments_by_quadrature(&[0.8, -1.3], 2.5, &GaussianConvolution);
        let r = GaussianConvolution.e_step(&[0.8, -1.3], 2.5).unwrap();
        assert!((q[0] - r[0]).abs() < 1e-9 && (q[1] - r[1]).abs() < 1e-9);
        let q = latent_moments_by_quadrature(&[1.0], 3.0, &ScalarGaussian);
        assert!((q[0] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn complete_density_integrates_to_one() {
        // ∫∫ f(x,y) exp{θᵀu − ψ(θ)} dx dy on a grid, θ = (0.4, -0.7).
        let theta = [0.4, -0.7];
        let psi = GaussianConvolution.psi(&theta);
        let (lo, hi, n) = (-14.0, 14.0, 1401);
        let h = (hi - lo) / (n - 1) as f64;
        let mut total = 0.0;
        for i in 0..n {
            let x = lo + i as f64 * h;
            for j in 0..n {
                let y = lo + j as f64 * h;
                let lp = -x * x / 2.0 - (y - x) * (y - x) / 2.0 + theta[0] * x + theta[1] * (y - x)
                    - psi;
                total += lp.exp();
            }
        }
        assert!((total * h * h - 1.0).abs() < 1e-6);
    }

    #[test]
    fn exact_posterior_fixture() {
        let prior = Hyperparams::new(1.0, vec![0.0]).unwrap();
        let ys = [1.0, 2.0, 2.0, 3.0];
        match ScalarGaussian.exact_posterior(&ys, &prior).unwrap() {
            ExactPosterior::Gaussian { mean, precision } => {
                assert!((mean[0] - 4.0 / 3.0).abs() < 1e-15);
                assert!((precision[(0, 0)] - 3.0).abs() < 1e-15);
            }
            _ => unreachable!(),
        }
        assert!((ScalarGaussian::fixed_point(&ys, &prior) - 4.0 / 3.0).abs() < 1e-15);
    }
}
