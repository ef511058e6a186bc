//! A model assembled from user-supplied evaluators with a scalar latent,
//! whose E-step is computed by Gauss–Hermite quadrature.

use alloc::boxed::Box;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use alloc::{format, vec};
use core::f64::consts::SQRT_2;

#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;

use crate::error::{Error, Result};
use crate::expfam::{fd, CompleteObs, ExpFamily, LatentSummary, SufficientStat};
use crate::linalg::{self, Matrix};
use crate::quadrature::{log_sum_exp, GaussHermite};
use crate::rng::StreamRng;
use crate::tensor::SymTensor;

/// Quadrature nodes used for every latent integral.
pub const NODES: usize = 64;

/// Two-sided normal quantile leaving 0.1% of the mass outside.
const TAIL_Z: f64 = 3.29;

/// Steps used when only ψ itself is supplied.
const PSI_ONLY_STEP: f64 = 1e-4;
const PSI_ONLY_HIGHER_STEP: f64 = 1e-2;

/// Location and scale of the latent posterior, used to place the nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatentHint {
    pub location: f64,
    pub scale: f64,
}

type LogF = Box<dyn Fn(f64, f64) -> f64 + Send + Sync>;
type Suff = Box<dyn Fn(f64, f64) -> Vec<f64> + Send + Sync>;
type ThetaScalar = Box<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type ThetaVector = Box<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
type ThetaMatrix = Box<dyn Fn(&[f64]) -> Matrix + Send + Sync>;
type Hint = Box<dyn Fn(&[f64], f64) -> LatentHint + Send + Sync>;
type Sampler = Box<dyn Fn(&[f64], &mut StreamRng) -> CompleteObs + Send + Sync>;
type Domain = Box<dyn Fn(&[f64]) -> bool + Send + Sync>;
type Target = Box<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

pub struct GenericQuadModel {
    name: String,
    dim: usize,
    log_f: LogF,
    suff: Suff,
    psi: ThetaScalar,
    grad_psi: Option<ThetaVector>,
    hess_psi: Option<ThetaMatrix>,
    hint: Hint,
    sampler: Option<Sampler>,
    domain: Option<Domain>,
    moment_target: Option<Target>,
    rule: GaussHermite,
}

impl core::fmt::Debug for GenericQuadModel {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("GenericQuadModel")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .finish_non_exhaustive()
    }
}

#[derive(Default)]
pub struct GenericQuadModelBuilder {
    name: String,
    dim: usize,
    log_f: Option<LogF>,
    suff: Option<Suff>,
    psi: Option<ThetaScalar>,
    grad_psi: Option<ThetaVector>,
    hess_psi: Option<ThetaMatrix>,
    hint: Option<Hint>,
    sampler: Option<Sampler>,
    domain: Option<Domain>,
    moment_target: Option<Target>,
}

impl GenericQuadModelBuilder {
    /// `log f(x, y)`.
    pub fn log_f(mut self, f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        self.log_f = Some(Box::new(f));
        self
    }

    /// `u(x, y)`, of length `dim`.
    pub fn sufficient_stat(
        mut self,
        f: impl Fn(f64, f64) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        self.suff = Some(Box::new(f));
        self
    }

    pub fn psi(mut self, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        self.psi = Some(Box::new(f));
        self
    }

    pub fn grad_psi(mut self, f: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static) -> Self {
        self.grad_psi = Some(Box::new(f));
        self
    }

    pub fn hess_psi(mut self, f: impl Fn(&[f64]) -> Matrix + Send + Sync + 'static) -> Self {
        self.hess_psi = Some(Box::new(f));
        self
    }

    /// Location and scale of `q(x | y, θ)`; the nodes are placed at
    /// `location + √2·scale·tₖ`.
    pub fn latent_hint(
        mut self,
        f: impl Fn(&[f64], f64) -> LatentHint + Send + Sync + 'static,
    ) -> Self {
        self.hint = Some(Box::new(f));
        self
    }

    pub fn sampler(
        mut self,
        f: impl Fn(&[f64], &mut StreamRng) -> CompleteObs + Send + Sync + 'static,
    ) -> Self {
        self.sampler = Some(Box::new(f));
        self
    }

    pub fn domain(mut self, f: impl Fn(&[f64]) -> bool + Send + Sync + 'static) -> Self {
        self.domain = Some(Box::new(f));
        self
    }

    pub fn moment_target(mut self, f: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static) -> Self {
        self.moment_target = Some(Box::new(f));
        self
    }

    pub fn build(self) -> Result<GenericQuadModel> {
        let missing = |what: &str| Error::InvalidInput(format!("generic model needs {what}"));
        if self.dim == 0 {
            return Err(Error::InvalidInput("dimension must be positive".into()));
        }
        Ok(GenericQuadModel {
            name: self.name,
            dim: self.dim,
            log_f: self.log_f.ok_or_else(|| missing("log_f"))?,
            suff: self.suff.ok_or_else(|| missing("a sufficient statistic"))?,
            psi: self.psi.ok_or_else(|| missing("psi"))?,
            grad_psi: self.grad_psi,
            hess_psi: self.hess_psi,
            hint: self.hint.ok_or_else(|| missing("a latent hint"))?,
            sampler: self.sampler,
            domain: self.domain,
            moment_target: self.moment_target,
            rule: GaussHermite::new(NODES),
        })
    }
}

impl GenericQuadModel {
    pub fn builder(name: &str, dim: usize) -> GenericQuadModelBuilder {
        GenericQuadModelBuilder {
            name: name.to_string(),
            dim,
            ..Default::default()
        }
    }

    /// Latent moments, entropy and `⟨log f⟩` by shifted Gauss–Hermite.
    fn quadrature(&self, theta: &[f64], y: f64) -> Result<LatentSummary> {
        if theta.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: theta.len(),
            });
        }
        let LatentHint { location, scale } = (self.hint)(theta, y);
        if !(location.is_finite() && scale.is_finite() && scale > 0.0) {
            return Err(Error::NonIntegrableLatent(format!(
                "invalid hint (location {location}, scale {scale})"
            )));
        }
        let s = SQRT_2 * scale;
        let k = self.rule.len();
        let mut xs = Vec::with_capacity(k);
        let mut lfs = Vec::with_capacity(k);
        let mut us = Vec::with_capacity(k);
        let mut log_int = Vec::with_capacity(k);
        let mut log_w = Vec::with_capacity(k);
        for (t, lw) in self.rule.nodes.iter().zip(&self.rule.ln_weights) {
            let x = location + s * t;
            let lf = (self.log_f)(x, y);
            let u = (self.suff)(x, y);
            if u.len() != self.dim {
                return Err(Error::DimensionMismatch {
                    expected: self.dim,
                    got: u.len(),
                });
            }
            let lg = lf + linalg::dot(theta, &u);
            xs.push(x);
            lfs.push(lf);
            us.push(u);
            log_int.push(lg);
            log_w.push(lw + t * t + lg);
        }
        let log_z0 = log_sum_exp(&log_w);
        if !log_z0.is_finite() {
            return Err(Error::NonIntegrableLatent(
                "latent normalizer is not finite".into(),
            ));
        }
        let mut r = vec![0.0; self.dim];
        let (mut log_f, mut mean, mut second, mut cross) = (0.0, 0.0, 0.0, 0.0);
        for i in 0..k {
            let p = (log_w[i] - log_z0).exp();
            if p == 0.0 {
                continue;
            }
            for (acc, u) in r.iter_mut().zip(&us[i]) {
                *acc += p * u;
            }
            log_f += p * lfs[i];
            cross += p * log_int[i];
            mean += p * xs[i];
            second += p * xs[i] * xs[i];
        }
        let sd = (second - mean * mean).max(0.0).sqrt();
        let half_width = s * self.rule.max_node();
        if (mean - location).abs() + TAIL_Z * sd > half_width {
            return Err(Error::NonIntegrableLatent(format!(
                "latent mass escapes the quadrature window (mean {mean:.3e}, sd {sd:.3e}, window {location:.3e} ± {half_width:.3e})"
            )));
        }
        let log_z = log_z0 + s.ln();
        let summary = LatentSummary {
            r: SufficientStat(r),
            entropy: log_z - cross,
            log_f,
        };
        if summary.r.iter().any(|v| !v.is_finite())
            || !summary.entropy.is_finite()
            || !summary.log_f.is_finite()
        {
            return Err(Error::NonIntegrableLatent(
                "non-finite latent moments".into(),
            ));
        }
        Ok(summary)
    }
}

impl ExpFamily for GenericQuadModel {
    fn name(&self) -> &str {
        &self.name
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn in_domain(&self, theta: &[f64]) -> bool {
        theta.iter().all(|t| t.is_finite()) && self.domain.as_ref().is_none_or(|d| d(theta))
    }

    fn psi(&self, theta: &[f64]) -> f64 {
        (self.psi)(theta)
    }

    fn grad_psi(&self, theta: &[f64]) -> Vec<f64> {
        match &self.grad_psi {
            Some(g) => g(theta),
            None => fd::gradient(|t| (self.psi)(t), theta),
        }
    }

    fn hess_psi(&self, theta: &[f64]) -> Matrix {
        match (&self.hess_psi, &self.grad_psi) {
            (Some(h), _) => h(theta),
            (None, Some(_)) => fd::jacobian_symmetric(|t| self.grad_psi(t), theta),
            (None, None) => fd::hessian_from_values(|t| (self.psi)(t), theta, PSI_ONLY_STEP),
        }
    }

    fn psi_d4(&self, theta: &[f64]) -> SymTensor {
        let rel = if self.hess_psi.is_some() {
            fd::HIGHER_STEP
        } else {
            PSI_ONLY_HIGHER_STEP
        };
        fd::fourth_from_hessian(|t| self.hess_psi(t), theta, rel)
    }

    fn e_step(&self, theta: &[f64], y: f64) -> Result<SufficientStat> {
        Ok(self.quadrature(theta, y)?.r)
    }

    fn latent_entropy(&self, theta: &[f64], y: f64) -> Result<f64> {
        Ok(self.quadrature(theta, y)?.entropy)
    }

    fn log_f_expectation(&self, theta: &[f64], y: f64) -> Result<f64> {
        Ok(self.quadrature(theta, y)?.log_f)
    }

    fn latent_summary(&self, theta: &[f64], y: f64) -> Result<LatentSummary> {
        self.quadrature(theta, y)
    }

    fn sufficient_stat(&self, obs: &CompleteObs) -> Vec<f64> {
        (self.suff)(obs.latent.unwrap_or(0.0), obs.y)
    }

    fn sample_complete(&self, theta: &[f64], rng: &mut StreamRng) -> Result<CompleteObs> {
        match &self.sampler {
            Some(s) => Ok(s(theta, rng)),
            None => Err(Error::UnsupportedModel(format!(
                "{} has no complete-data sampler",
                self.name
            ))),
        }
    }

    fn moment_target(&self, ys: &[f64]) -> Option<Vec<f64>> {
        self.moment_target.as_ref().map(|f| f(ys))
    }
}

fn normal_pair(rng: &mut StreamRng) -> (f64, f64) {
    use rand::Rng;
    use rand_distr::StandardNormal;
    (rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// Generic configuration of the scalar Gaussian model, with a hint that
/// does not use the closed-form latent mean.
pub fn generic_scalar_gaussian() -> GenericQuadModel {
    GenericQuadModel::builder("generic-B", 1)
        .log_f(|x, y| -0.5 * x * x - 0.5 * (y - x) * (y - x))
        .sufficient_stat(|x, _| vec![x])
        .psi(|t| 0.5 * t[0] * t[0] + (2.0 * core::f64::consts::PI).ln())
        .grad_psi(|t| vec![t[0]])
        .hess_psi(|_| Matrix::identity(1, 1))
        .latent_hint(|_, y| LatentHint {
            location: 0.5 * y,
            scale: 1.0,
        })
        .sampler(|t, rng| {
            let (a, b) = normal_pair(rng);
            let x = t[0] + a;
            CompleteObs {
                latent: Some(x),
                y: x + b,
            }
        })
        .moment_target(|ys| vec![ys.iter().sum::<f64>() / ys.len().max(1) as f64])
        .build()
        .expect("complete configuration")
}

/// Generic configuration of the two-parameter Gaussian convolution model.
pub fn generic_gaussian_convolution() -> GenericQuadModel {
    GenericQuadModel::builder("generic-A", 2)
        .log_f(|x, y| -0.5 * x * x - 0.5 * (y - x) * (y - x))
        .sufficient_stat(|x, y| vec![x, y - x])
        .psi(|t| 0.5 * (t[0] * t[0] + t[1] * t[1]) + (2.0 * core::f64::consts::PI).ln())
        .grad_psi(|t| t.to_vec())
        .hess_psi(|_| Matrix::identity(2, 2))
        .latent_hint(|_, y| LatentHint {
            location: 0.5 * y,
            scale: 1.0,
        })
        .sampler(|t, rng| {
            let (a, b) = normal_pair(rng);
            let x = t[0] + a;
            CompleteObs {
                latent: Some(x),
                y: x + t[1] + b,
            }
        })
        .moment_target(|ys| {
            let m = ys.iter().sum::<f64>() / ys.len().max(1) as f64;
            vec![0.5 * m, 0.5 * m]
        })
        .build()
        .expect("complete configuration")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{GaussianConvolution, ScalarGaussian};

    #[test]
    fn replicates_scalar_gaussian_e_step() {
        let g = generic_scalar_gaussian();
        for &theta in &[-5.0, -2.5, 0.0, 1.0, 3.7, 5.0] {
            for &y in &[-10.0, -3.0, 0.0, 0.4, 6.0, 10.0] {
                let a = g.latent_summary(&[theta], y).unwrap();
                let b = ScalarGaussian.latent_summary(&[theta], y).unwrap();
                assert!((a.r[0] - b.r[0]).abs() < 1e-8, "θ={theta} y={y}");
                assert!((a.entropy - b.entropy).abs() < 1e-8);
                assert!((a.log_f - b.log_f).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn replicates_convolution_e_step() {
        let g = generic_gaussian_convolution();
        for theta in [[0.0, 0.0], [2.0, -3.0], [-5.0, 5.0]] {
            for &y in &[-10.0, 0.0, 4.0, 10.0] {
                let a = g.latent_summary(&theta, y).unwrap();
                let b = GaussianConvolution.latent_summary(&theta, y).unwrap();
                assert!((a.r[0] - b.r[0]).abs() < 1e-8);
                assert!((a.r[1] - b.r[1]).abs() < 1e-8);
                assert!((a.entropy - b.entropy).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn narrow_hint_is_reported() {
        let g = GenericQuadModel::builder("narrow", 1)
            .log_f(|x, y| -0.5 * x * x - 0.5 * (y - x) * (y - x))
            .sufficient_stat(|x, _| vec![x])
            .psi(|t| 0.5 * t[0] * t[0])
            .latent_hint(|_, _| LatentHint {
                location: 0.0,
                scale: 1e-3,
            })
            .build()
            .unwrap();
        assert!(matches!(
            g.e_step(&[0.0], 8.0),
            Err(Error::NonIntegrableLatent(_))
        ));
    }

    #[test]
    fn psi_only_derivatives() {
        let g = GenericQuadModel::builder("psi-only", 1)
            .log_f(|_, _| 0.0)
            .sufficient_stat(|_, y| vec![y])
            .psi(|t| t[0].exp())
            .latent_hint(|_, _| LatentHint {
                location: 0.0,
                scale: 1.0,
            })
            .build()
            .unwrap();
        let theta = [0.3];
        assert!((g.grad_psi(&theta)[0] - 0.3f64.exp()).abs() < 1e-8);
        assert!((g.hess_psi(&theta)[(0, 0)] - 0.3f64.exp()).abs() < 1e-5);
        assert!((g.psi_d4(&theta).get(&[0, 0, 0, 0]) - 0.3f64.exp()).abs() < 1e-3);
        assert!(matches!(
            g.sample_complete(&theta, &mut crate::rng::substream(1, 0)),
            Err(Error::UnsupportedModel(_))
        ));
    }

    #[test]
    fn builder_requires_core_pieces() {
        assert!(GenericQuadModel::builder("x", 1).build().is_err());
    }
}
