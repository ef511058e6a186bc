//! The variational fixed-point iteration: E-step, conjugate update and
//! posterior mean, with the negative free energy tracked per iterate.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;

use crate::error::{Error, Result};
use crate::expfam::{
    fd, newton_solve_moment_match, prior_log_normalizer, ExpFamily, Hyperparams, LatentSummary,
    NaturalParams, SufficientStat,
};
use crate::laplace::{expectation_laplace, posterior_mean_laplace, TiltedObjective};
use crate::linalg::{self, Matrix};
use crate::quadrature::SimpsonGrid;

pub const DEFAULT_TOL: f64 = 1e-9;
pub const DEFAULT_MAX_ITER: usize = 500;

#[derive(Debug, Clone, PartialEq)]
pub struct VbConfig {
    pub init: NaturalParams,
    pub tol: f64,
    pub max_iter: usize,
    pub prior: Hyperparams,
}

impl VbConfig {
    pub fn new(init: Vec<f64>, prior: Hyperparams) -> Self {
        Self {
            init: NaturalParams::new(init),
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
            prior,
        }
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn validate<M: ExpFamily + ?Sized>(&self, model: &M) -> Result<()> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::InvalidInput("tol must be positive".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidInput("max_iter must be at least 1".into()));
        }
        self.prior.validate(model)?;
        NaturalParams::checked(model, self.init.to_vec())?;
        Ok(())
    }
}

/// Which approximation produced the posterior mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeanMethod {
    ClosedForm,
    Laplace,
    Quadrature,
}

impl MeanMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            MeanMethod::ClosedForm => "closed_form",
            MeanMethod::Laplace => "laplace",
            MeanMethod::Quadrature => "quadrature",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VbTrace {
    pub iterates: Vec<NaturalParams>,
    /// Negative free energy at each iterate.
    pub free_energy: Vec<f64>,
    pub step_norms: Vec<f64>,
    pub converged: bool,
    /// Map applications needed to reach the tolerance; the confirming step
    /// that observed it is not counted.
    pub iterations: usize,
    pub final_hyperparams: Hyperparams,
    pub mean_method: MeanMethod,
}

impl VbTrace {
    pub fn fixed_point(&self) -> &NaturalParams {
        self.iterates.last().expect("trace holds the initial point")
    }

    /// Indices `k` where `F[k+1] < F[k] − 1e-8·(1 + |F[k]|)`.
    pub fn monotonicity_violations(&self) -> Vec<usize> {
        self.free_energy
            .windows(2)
            .enumerate()
            .filter(|(_, w)| w[1] < w[0] - 1e-8 * (1.0 + w[0].abs()))
            .map(|(k, _)| k)
            .collect()
    }
}

/// `rᵢ = ⟨u(xᵢ, yᵢ)⟩` for every observation.
pub fn e_step_all<M: ExpFamily + ?Sized>(
    model: &M,
    theta: &[f64],
    ys: &[f64],
) -> Result<Vec<SufficientStat>> {
    if !model.in_domain(theta) {
        return Err(Error::OutsideDomain);
    }
    ys.iter().map(|&y| model.e_step(theta, y)).collect()
}

/// `α = n + α₀`, `β = Σrᵢ + β₀`, summed in index order.
pub fn update_hyperparams(r: &[SufficientStat], prior: &Hyperparams) -> Hyperparams {
    let mut beta = prior.beta.clone();
    for ri in r {
        for (b, v) in beta.iter_mut().zip(ri.iter()) {
            *b += v;
        }
    }
    Hyperparams {
        alpha: r.len() as f64 + prior.alpha,
        beta,
    }
}

/// Posterior mean of `q_θ(hp)`: closed form, then Laplace, then grid
/// quadrature for `m ≤ 2`.
pub fn posterior_mean<M: ExpFamily + ?Sized>(
    model: &M,
    hp: &Hyperparams,
) -> Result<(NaturalParams, MeanMethod)> {
    hp.validate(model)?;
    if let Some(m) = model.posterior_mean_closed(hp) {
        return Ok((NaturalParams::new(m), MeanMethod::ClosedForm));
    }
    let laplace = posterior_mean_laplace(model, &TiltedObjective::from_hyperparams(hp));
    match laplace {
        Ok(m) if m.iter().all(|v| v.is_finite()) => return Ok((m, MeanMethod::Laplace)),
        _ if model.dim() <= 2 => {}
        Ok(_) => return Err(Error::NonFiniteResult("Laplace posterior mean".into())),
        Err(e) => {
            return Err(Error::ApproximationUnavailable(format!(
                "Laplace failed ({e}) and quadrature needs m <= 2"
            )))
        }
    }
    let g = posterior_quadrature(model, hp, QUADRATURE_POINTS_1D, QUADRATURE_POINTS_2D)?;
    Ok((NaturalParams::new(g.mean), MeanMethod::Quadrature))
}

/// `⟨ψ(θ)⟩` under `q_θ(hp)`, with the same dispatch as the mean.
pub fn expected_psi<M: ExpFamily + ?Sized>(model: &M, hp: &Hyperparams) -> Result<f64> {
    hp.validate(model)?;
    if let Some(v) = model.expected_psi_closed(hp) {
        return Ok(v);
    }
    let psi = |t: &[f64]| model.psi(t);
    match expectation_laplace(model, &TiltedObjective::from_hyperparams(hp), &psi) {
        Ok(v) if v.is_finite() => Ok(v),
        _ if model.dim() <= 2 => {
            Ok(
                posterior_quadrature(model, hp, QUADRATURE_POINTS_1D, QUADRATURE_POINTS_2D)?
                    .expected_psi,
            )
        }
        _ => Err(Error::ApproximationUnavailable(
            "no approximation for ⟨ψ⟩ with m > 2".into(),
        )),
    }
}

pub const QUADRATURE_POINTS_1D: usize = 4097;
pub const QUADRATURE_POINTS_2D: usize = 401;
/// Half-width of the posterior grid in standard deviations of the local
/// Gaussian approximation.
const GRID_HALF_WIDTH_SD: f64 = 20.0;

/// Moments of `q_θ(hp)` from a Simpson grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSummary {
    /// `log ∫ exp{θᵀβ − αψ(θ)} dθ`.
    pub log_z: f64,
    pub mean: Vec<f64>,
    pub cov: Matrix,
    pub expected_psi: f64,
}

/// Grid quadrature of `q_θ(hp)` centred on its mode, `m ≤ 2`.
pub fn posterior_quadrature<M: ExpFamily + ?Sized>(
    model: &M,
    hp: &Hyperparams,
    points_1d: usize,
    points_2d: usize,
) -> Result<GridSummary> {
    let m = model.dim();
    if m > 2 {
        return Err(Error::ApproximationUnavailable(
            "grid quadrature supports m <= 2".into(),
        ));
    }
    let obj = TiltedObjective::from_hyperparams(hp);
    let mode = obj.minimiser(model).map_err(|e| match e {
        Error::NonConvergence(_) => Error::DivergentIntegral { alpha: hp.alpha },
        other => other,
    })?;
    let (cov0, _) = linalg::spd_inverse(&(model.hess_psi(&mode) * hp.alpha))?;
    let grids: Vec<SimpsonGrid> = (0..m)
        .map(|j| {
            let sd = cov0[(j, j)].sqrt();
            SimpsonGrid::centered(
                mode[j],
                GRID_HALF_WIDTH_SD * sd,
                if m == 1 { points_1d } else { points_2d },
            )
        })
        .collect::<Result<_>>()?;
    let log_kernel = |t: &[f64]| -> f64 {
        if model.in_domain(t) {
            linalg::dot(t, &hp.beta) - hp.alpha * model.psi(t)
        } else {
            f64::NEG_INFINITY
        }
    };
    let shift = log_kernel(&mode);
    let mut z = 0.0;
    let mut s1 = vec![0.0; m];
    let mut s2 = Matrix::zeros(m, m);
    let mut spsi = 0.0;
    let mut visit = |t: &[f64], w: f64| {
        let lk = log_kernel(t);
        let d = (lk - shift).exp() * w;
        if d == 0.0 || !d.is_finite() {
            return;
        }
        z += d;
        for i in 0..m {
            s1[i] += d * t[i];
            for j in 0..m {
                s2[(i, j)] += d * t[i] * t[j];
            }
        }
        spsi += d * model.psi(t);
    };
    if m == 1 {
        let g = &grids[0];
        for i in 0..g.points {
            visit(&[g.node(i)], g.weight(i));
        }
    } else {
        let (g0, g1) = (&grids[0], &grids[1]);
        for i in 0..g0.points {
            for j in 0..g1.points {
                visit(&[g0.node(i), g1.node(j)], g0.weight(i) * g1.weight(j));
            }
        }
    }
    if !(z > 0.0 && z.is_finite()) {
        return Err(Error::NonFiniteResult("posterior grid normalizer".into()));
    }
    let mean: Vec<f64> = s1.iter().map(|v| v / z).collect();
    let cov = Matrix::from_fn(m, m, |i, j| s2[(i, j)] / z - mean[i] * mean[j]);
    Ok(GridSummary {
        log_z: shift + z.ln(),
        mean,
        cov,
        expected_psi: spsi / z,
    })
}

/// `Φₙ(θ)`: E-step, conjugate update, posterior mean.
pub fn phi_map<M: ExpFamily + ?Sized>(
    model: &M,
    theta: &[f64],
    ys: &[f64],
    prior: &Hyperparams,
) -> Result<NaturalParams> {
    let r = e_step_all(model, theta, ys)?;
    Ok(posterior_mean(model, &update_hyperparams(&r, prior))?.0)
}

fn latent_terms<M: ExpFamily + ?Sized>(
    model: &M,
    theta: &[f64],
    ys: &[f64],
) -> Result<Vec<LatentSummary>> {
    if !model.in_domain(theta) {
        return Err(Error::OutsideDomain);
    }
    ys.iter().map(|&y| model.latent_summary(theta, y)).collect()
}

/// Free energy assembled from per-observation latent terms. Cross terms
/// whose coefficient is exactly zero are skipped, so the consistent pair
/// `hp = update(r)` needs only the two log-normalizers.
fn free_energy_from_terms<M: ExpFamily + ?Sized>(
    model: &M,
    terms: &[LatentSummary],
    hp: &Hyperparams,
    prior: &Hyperparams,
) -> Result<f64> {
    let mut latent = 0.0;
    for t in terms {
        latent += t.log_f + t.entropy;
    }
    let rs: Vec<SufficientStat> = terms.iter().map(|t| t.r.clone()).collect();
    let consistent = update_hyperparams(&rs, prior);
    let beta_gap: Vec<f64> = consistent
        .beta
        .iter()
        .zip(&hp.beta)
        .map(|(a, b)| a - b)
        .collect();
    let alpha_gap = consistent.alpha - hp.alpha;
    let mut value = latent + prior_log_normalizer(model, prior)? - prior_log_normalizer(model, hp)?;
    if beta_gap.iter().any(|g| *g != 0.0) {
        let (mean, _) = posterior_mean(model, hp)?;
        value += linalg::dot(&mean, &beta_gap);
    }
    if alpha_gap != 0.0 {
        value -= alpha_gap * expected_psi(model, hp)?;
    }
    if !value.is_finite() {
        return Err(Error::NonFiniteResult("free energy".into()));
    }
    Ok(value)
}

/// Negative free energy of `q_X(θ_for_qx)·q_θ(hp)`.
pub fn free_energy<M: ExpFamily + ?Sized>(
    model: &M,
    theta_for_qx: &[f64],
    hp: &Hyperparams,
    ys: &[f64],
    prior: &Hyperparams,
) -> Result<f64> {
    hp.validate(model)?;
    prior.validate(model)?;
    let terms = latent_terms(model, theta_for_qx, ys)?;
    free_energy_from_terms(model, &terms, hp, prior)
}

/// Iterates `Φₙ` from `cfg.init` until the step norm drops to `cfg.tol`
/// or `cfg.max_iter` applications.
pub fn run_vb<M: ExpFamily + ?Sized>(model: &M, ys: &[f64], cfg: &VbConfig) -> Result<VbTrace> {
    cfg.validate(model)?;
    let mut theta = cfg.init.clone();
    let mut iterates = vec![theta.clone()];
    let mut free_energy = Vec::new();
    let mut step_norms = Vec::new();
    let mut converged = false;
    let mut method = MeanMethod::ClosedForm;
    loop {
        let terms = latent_terms(model, &theta, ys)?;
        let r: Vec<SufficientStat> = terms.iter().map(|t| t.r.clone()).collect();
        let hp = update_hyperparams(&r, &cfg.prior);
        free_energy.push(free_energy_from_terms(model, &terms, &hp, &cfg.prior)?);
        if converged || step_norms.len() == cfg.max_iter {
            let iterations = if converged {
                step_norms.len() - 1
            } else {
                step_norms.len()
            };
            return Ok(VbTrace {
                iterates,
                free_energy,
                step_norms,
                converged,
                iterations,
                final_hyperparams: hp,
                mean_method: method,
            });
        }
        let (next, m) = posterior_mean(model, &hp)?;
        method = m;
        if !model.in_domain(&next) {
            return Err(Error::OutsideDomain);
        }
        let step = linalg::distance(&next, &theta);
        step_norms.push(step);
        converged = step <= cfg.tol;
        iterates.push(next.clone());
        theta = next;
    }
}

/// Starting point: the prior mean when available in closed form, else the
/// moment-matching solution for the observed data, else the origin.
pub fn default_init<M: ExpFamily + ?Sized>(
    model: &M,
    ys: &[f64],
    prior: &Hyperparams,
) -> Result<NaturalParams> {
    if let Some(m) = model.posterior_mean_closed(prior) {
        return NaturalParams::checked(model, m);
    }
    let origin = vec![0.0; model.dim()];
    if let Some(target) = model.moment_target(ys) {
        if model.in_domain(&origin) {
            return newton_solve_moment_match(model, &target, &origin, 1e-10);
        }
    }
    NaturalParams::checked(model, origin)
}

/// Central-difference Jacobian of `Φₙ` and its spectral norm.
pub fn jacobian_phi<M: ExpFamily + ?Sized>(
    model: &M,
    theta: &[f64],
    ys: &[f64],
    prior: &Hyperparams,
) -> Result<(Matrix, f64)> {
    for j in 0..theta.len() {
        let h = fd::step_for(theta[j], fd::STEP);
        for s in [-1.0, 1.0] {
            let mut t = theta.to_vec();
            t[j] += s * h;
            if !model.in_domain(&t) {
                return Err(Error::DomainEscape);
            }
        }
    }
    let m = theta.len();
    let mut jac = Matrix::zeros(m, m);
    for j in 0..m {
        let h = fd::step_for(theta[j], fd::STEP);
        let mut plus = theta.to_vec();
        plus[j] += h;
        let mut minus = theta.to_vec();
        minus[j] -= h;
        let fp = phi_map(model, &plus, ys, prior)?;
        let fm = phi_map(model, &minus, ys, prior)?;
        for i in 0..m {
            jac[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }
    let norm = linalg::spectral_norm(&jac);
    Ok((jac, norm))
}

/// `q_θ(θ) = h(α, β) exp{θᵀβ − αψ(θ)}`.
#[derive(Debug, Clone)]
pub struct VariationalPosterior<'m, M: ExpFamily + ?Sized> {
    pub model: &'m M,
    pub hyperparams: Hyperparams,
    log_h: f64,
}

impl<'m, M: ExpFamily + ?Sized> VariationalPosterior<'m, M> {
    pub fn new(model: &'m M, hyperparams: Hyperparams) -> Result<Self> {
        let log_h = prior_log_normalizer(model, &hyperparams)?;
        Ok(Self {
            model,
            hyperparams,
            log_h,
        })
    }

    pub fn log_normalizer(&self) -> f64 {
        self.log_h
    }

    pub fn log_density(&self, theta: &[f64]) -> f64 {
        if !self.model.in_domain(theta) {
            return f64::NEG_INFINITY;
        }
        self.log_h + linalg::dot(theta, &self.hyperparams.beta)
            - self.hyperparams.alpha * self.model.psi(theta)
    }

    pub fn mean(&self) -> Result<NaturalParams> {
        Ok(posterior_mean(self.model, &self.hyperparams)?.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{GaussianConvolution, PoissonCounts, ScalarGaussian};
    use crate::special::digamma;

    fn prior(alpha: f64, beta: &[f64]) -> Hyperparams {
        Hyperparams::new(alpha, beta.to_vec()).unwrap()
    }

    #[test]
    fn e_step_all_examples() {
        let r = e_step_all(&PoissonCounts, &[0.3], &[5.0]).unwrap();
        assert_eq!(r[0].0, vec![5.0]);
    }

    #[test]
    fn update_examples() {
        let r = vec![SufficientStat(vec![1.5, 0.5])]
            .into_iter()
            .chain((0..9).map(|_| SufficientStat(vec![0.0, 0.0])))
            .collect::<Vec<_>>();
        let hp = update_hyperparams(&r, &prior(2.0, &[0.0, 0.0]));
        assert_eq!(hp.alpha, 12.0);
        assert_eq!(hp.beta, vec![1.5, 0.5]);
        let p = prior(3.0, &[0.2]);
        assert_eq!(update_hyperparams(&[], &p), p);
        let r: Vec<_> = [1.0, 2.0, 3.0]
            .iter()
            .map(|v| SufficientStat(vec![*v]))
            .collect();
        let hp = update_hyperparams(&r, &prior(1.0, &[0.5]));
        assert_eq!((hp.alpha, hp.beta[0]), (4.0, 6.5));
    }

    #[test]
    fn posterior_mean_examples() {
        let (m, method) = posterior_mean(&ScalarGaussian, &prior(4.0, &[2.0])).unwrap();
        assert_eq!((m[0], method), (0.5, MeanMethod::ClosedForm));
        let (m, _) = posterior_mean(&GaussianConvolution, &prior(4.0, &[2.0, -2.0])).unwrap();
        assert_eq!(m.as_slice(), &[0.5, -0.5]);
        let (m, _) = posterior_mean(&PoissonCounts, &prior(1.0, &[1.0])).unwrap();
        assert!((m[0] + 0.577_215_664_901_532_9).abs() < 1e-12);
    }

    #[test]
    fn quadrature_fallback_matches_closed_forms() {
        let hp = prior(3.0, &[4.0]);
        let g = posterior_quadrature(&PoissonCounts, &hp, 4097, 401).unwrap();
        assert!((g.mean[0] - (digamma(4.0) - 3f64.ln())).abs() < 1e-9);
        assert!((g.expected_psi - 4.0 / 3.0).abs() < 1e-9);
        assert!((-g.log_z - PoissonCounts.log_normalizer_closed(&hp).unwrap()).abs() < 1e-9);
        let hp = prior(4.0, &[2.0, -2.0]);
        let g = posterior_quadrature(&GaussianConvolution, &hp, 4097, 401).unwrap();
        assert!((g.mean[0] - 0.5).abs() < 1e-9 && (g.mean[1] + 0.5).abs() < 1e-9);
        assert!((g.cov[(0, 0)] - 0.25).abs() < 1e-8 && g.cov[(0, 1)].abs() < 1e-9);
    }

    #[test]
    fn phi_examples() {
        let ys = [1.0, 2.0, 2.0, 3.0];
        let p = prior(1.0, &[0.0]);
        let next = phi_map(&ScalarGaussian, &[0.0], &ys, &p).unwrap();
        assert!((next[0] - 0.8).abs() < 1e-15);
        let a = phi_map(&PoissonCounts, &[0.0], &[1.0, 4.0], &prior(1.0, &[1.0])).unwrap();
        let b = phi_map(&PoissonCounts, &[3.0], &[1.0, 4.0], &prior(1.0, &[1.0])).unwrap();
        assert_eq!(a, b);
        assert!((a[0] - (digamma(6.0) - 3f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn run_vb_examples() {
        let ys = [1.0, 2.0, 2.0, 3.0];
        let cfg = VbConfig::new(vec![0.0], prior(1.0, &[0.0])).with_tol(1e-10);
        let tr = run_vb(&ScalarGaussian, &ys, &cfg).unwrap();
        assert!(tr.converged);
        assert!((tr.fixed_point()[0] - 4.0 / 3.0).abs() < 1e-9);
        for w in tr.step_norms.windows(2).take(10) {
            assert!((w[1] / w[0] - 0.4).abs() < 1e-9);
        }
        assert!(tr.monotonicity_violations().is_empty());
        assert_eq!(tr.free_energy.len(), tr.iterates.len());
        assert_eq!(tr.step_norms.len() + 1, tr.iterates.len());

        let cfg = VbConfig::new(vec![2.5], prior(1.0, &[1.0]));
        let tr = run_vb(&PoissonCounts, &[1.0, 4.0, 0.0], &cfg).unwrap();
        assert!(tr.converged);
        assert_eq!(tr.iterations, 1);

        let cfg = VbConfig::new(vec![0.0], prior(1.0, &[0.7]));
        let tr = run_vb(&ScalarGaussian, &[], &cfg).unwrap();
        assert_eq!(tr.iterations, 1);
        assert!((tr.fixed_point()[0] - 0.7).abs() < 1e-15);
    }

    #[test]
    fn run_vb_reports_non_convergence() {
        let ys = [1.0, 2.0, 2.0, 3.0];
        let cfg = VbConfig::new(vec![0.0], prior(1.0, &[0.0])).with_max_iter(3);
        let tr = run_vb(&ScalarGaussian, &ys, &cfg).unwrap();
        assert!(!tr.converged);
        assert_eq!(tr.iterations, 3);
        assert_eq!(tr.iterates.len(), 4);
    }

    #[test]
    fn config_validation() {
        let cfg = VbConfig::new(vec![0.0], prior(1.0, &[0.0])).with_tol(0.0);
        assert!(run_vb(&ScalarGaussian, &[1.0], &cfg).is_err());
        let cfg = VbConfig::new(vec![0.0, 1.0], prior(1.0, &[0.0]));
        assert!(run_vb(&ScalarGaussian, &[1.0], &cfg).is_err());
        let cfg = VbConfig::new(vec![0.0], prior(1.0, &[-1.0]));
        assert!(matches!(
            run_vb(&PoissonCounts, &[1.0], &cfg),
            Err(Error::DivergentIntegral { .. })
        ));
    }

    #[test]
    fn poisson_free_energy_is_log_evidence() {
        // y = 2, prior Gamma(1, 1) on λ: p(y) = ∫ λ² e^{-λ}/2 · e^{-λ} dλ = 1/8
        let p = prior(1.0, &[1.0]);
        let hp = update_hyperparams(&e_step_all(&PoissonCounts, &[0.0], &[2.0]).unwrap(), &p);
        let f = free_energy(&PoissonCounts, &[0.0], &hp, &[2.0], &p).unwrap();
        assert!((f - (0.125f64).ln()).abs() < 1e-12);
    }

    #[test]
    fn free_energy_with_mismatched_hyperparams_is_lower() {
        let ys = [0.5, 1.5, -0.3];
        let p = prior(1.0, &[0.0]);
        let theta = [0.2];
        let hp = update_hyperparams(&e_step_all(&ScalarGaussian, &theta, &ys).unwrap(), &p);
        let best = free_energy(&ScalarGaussian, &theta, &hp, &ys, &p).unwrap();
        for (da, db) in [(0.5, 0.0), (0.0, 0.3), (-0.5, -0.2)] {
            let other = prior(hp.alpha + da, &[hp.beta[0] + db]);
            let f = free_energy(&ScalarGaussian, &theta, &other, &ys, &p).unwrap();
            assert!(f < best);
        }
    }

    #[test]
    fn jacobian_examples() {
        let ys: Vec<f64> = (0..1000).map(|i| (i % 7) as f64 * 0.3).collect();
        let (j, norm) = jacobian_phi(&ScalarGaussian, &[0.4], &ys, &prior(1.0, &[0.0])).unwrap();
        assert!((j[(0, 0)] - 500.0 / 1001.0).abs() < 1e-8);
        assert!((norm - 500.0 / 1001.0).abs() < 1e-8);
        let (j, _) =
            jacobian_phi(&PoissonCounts, &[0.4], &[1.0, 2.0], &prior(1.0, &[1.0])).unwrap();
        assert_eq!(j[(0, 0)], 0.0);
    }

    #[test]
    fn default_init_uses_prior_mean() {
        let t = default_init(&ScalarGaussian, &[3.0], &prior(2.0, &[1.0])).unwrap();
        assert_eq!(t.as_slice(), &[0.5]);
    }
}
