use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;
use rand::Rng;
use rand_distr::Poisson;

use crate::error::{Error, Result};
use crate::expfam::{
    CompleteObs, ExactPosterior, ExpFamily, Hyperparams, LatentSummary, SufficientStat,
};
use crate::linalg::Matrix;
use crate::rng::StreamRng;
use crate::special::{digamma, ln_factorial, ln_gamma, trigamma};
use crate::tensor::SymTensor;

/// Poisson counts with log-rate θ: `ψ(θ) = eᶿ`, `u = y`, `f = 1/y!`.
///
/// There is no latent variable, so the variational posterior over θ is the
/// exact posterior: `λ = eᶿ ~ Gamma(β, α)` (shape, rate).
#[derive(Debug, Clone, Copy, Default)]
pub struct PoissonCounts;

impl PoissonCounts {
    fn check(theta: &[f64]) -> Result<()> {
        if theta.len() != 1 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                got: theta.len(),
            });
        }
        Ok(())
    }
}

impl ExpFamily for PoissonCounts {
    fn name(&self) -> &str {
        "C"
    }

    fn dim(&self) -> usize {
        1
    }

    fn psi(&self, theta: &[f64]) -> f64 {
        theta[0].exp()
    }

    fn grad_psi(&self, theta: &[f64]) -> Vec<f64> {
        vec![theta[0].exp()]
    }

    fn hess_psi(&self, theta: &[f64]) -> Matrix {
        Matrix::from_element(1, 1, theta[0].exp())
    }

    fn psi_d3(&self, theta: &[f64]) -> SymTensor {
        SymTensor::from_canonical(1, 3, |_| theta[0].exp())
    }

    fn psi_d4(&self, theta: &[f64]) -> SymTensor {
        SymTensor::from_canonical(1, 4, |_| theta[0].exp())
    }

    fn e_step(&self, theta: &[f64], y: f64) -> Result<SufficientStat> {
        Self::check(theta)?;
        Ok(SufficientStat(vec![y]))
    }

    fn latent_entropy(&self, theta: &[f64], _y: f64) -> Result<f64> {
        Self::check(theta)?;
        Ok(0.0)
    }

    fn log_f_expectation(&self, theta: &[f64], y: f64) -> Result<f64> {
        Self::check(theta)?;
        Ok(-ln_factorial(y))
    }

    fn latent_summary(&self, theta: &[f64], y: f64) -> Result<LatentSummary> {
        Self::check(theta)?;
        Ok(LatentSummary {
            r: SufficientStat(vec![y]),
            entropy: 0.0,
            log_f: -ln_factorial(y),
        })
    }

    fn sufficient_stat(&self, obs: &CompleteObs) -> Vec<f64> {
        vec![obs.y]
    }

    fn sample_complete(&self, theta: &[f64], rng: &mut StreamRng) -> Result<CompleteObs> {
        Self::check(theta)?;
        let dist = Poisson::new(theta[0].exp())
            .map_err(|_| Error::InvalidInput("Poisson rate must be positive and finite".into()))?;
        Ok(CompleteObs {
            latent: None,
            y: rng.sample(dist),
        })
    }

    fn hyperparams_integrable(&self, hp: &Hyperparams) -> Option<bool> {
        Some(hp.alpha > 0.0 && hp.beta[0] > 0.0)
    }

    fn log_normalizer_closed(&self, hp: &Hyperparams) -> Option<f64> {
        // ∫ exp{θβ − αeᶿ} dθ = Γ(β)/α^β
        Some(hp.beta[0] * hp.alpha.ln() - ln_gamma(hp.beta[0]))
    }

    fn posterior_mean_closed(&self, hp: &Hyperparams) -> Option<Vec<f64>> {
        Some(vec![digamma(hp.beta[0]) - hp.alpha.ln()])
    }

    fn posterior_cov_closed(&self, hp: &Hyperparams) -> Option<Matrix> {
        Some(Matrix::from_element(1, 1, trigamma(hp.beta[0])))
    }

    fn expected_psi_closed(&self, hp: &Hyperparams) -> Option<f64> {
        Some(hp.beta[0] / hp.alpha)
    }

    fn exact_posterior(&self, ys: &[f64], prior: &Hyperparams) -> Result<ExactPosterior> {
        Ok(ExactPosterior::LogGamma {
            shape: ys.iter().sum::<f64>() + prior.beta[0],
            rate: ys.len() as f64 + prior.alpha,
        })
    }

    fn moment_target(&self, ys: &[f64]) -> Option<Vec<f64>> {
        if ys.is_empty() {
            return None;
        }
        Some(vec![(ys.iter().sum::<f64>() + 0.5) / ys.len() as f64])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::SimpsonGrid;

    #[test]
    fn log_normalizer_matches_quadrature() {
        let hp = Hyperparams::new(2.0, vec![3.0]).unwrap();
        let g = SimpsonGrid::new(-20.0, 6.0, 20_001).unwrap();
        let integral = g.integrate(|t| (t * 3.0 - 2.0 * t.exp()).exp());
        let closed = PoissonCounts.log_normalizer_closed(&hp).unwrap();
        assert!((closed + integral.ln()).abs() < 1e-10);
    }

    #[test]
    fn posterior_mean_and_variance_match_quadrature() {
        let hp = Hyperparams::new(1.0, vec![1.0]).unwrap();
        let g = SimpsonGrid::new(-40.0, 5.0, 40_001).unwrap();
        let dens = |t: f64| (t - t.exp()).exp();
        let z = g.integrate(dens);
        let mean = g.integrate(|t| t * dens(t)) / z;
        let var = g.integrate(|t| (t - mean) * (t - mean) * dens(t)) / z;
        assert!((mean - PoissonCounts.posterior_mean_closed(&hp).unwrap()[0]).abs() < 1e-9);
        assert!((mean + 0.577_215_664_901_532_9).abs() < 1e-9);
        let cov = PoissonCounts.posterior_cov_closed(&hp).unwrap();
        assert!((var - cov[(0, 0)]).abs() < 1e-8);
    }

    #[test]
    fn nonpositive_shape_is_not_integrable() {
        let hp = Hyperparams::new(3.0, vec![0.0]).unwrap();
        assert_eq!(PoissonCounts.hyperparams_integrable(&hp), Some(false));
    }
}
