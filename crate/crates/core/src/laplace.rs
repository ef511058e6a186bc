//! Laplace's method with the `O(1/n)` correction for integrals
//! `∫ b(θ) exp{−n aₙ(θ)} dθ` where `aₙ(θ) = (1 + α₀/n)ψ(θ) − θᵀ(Σr/n + β₀/n)`.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::expfam::{
    fd, newton_solve_moment_match, ExpFamily, Hyperparams, NaturalParams, SufficientStat,
};
use crate::linalg::{self, Matrix};
use crate::rng::substream;
use crate::tensor::SymTensor;

/// The scaled tilt `aₙ`, stored as `n`, `α₀` and the moment target
/// `(Σr/n + β₀/n)/(1 + α₀/n)` so that `aₙ = (1 + α₀/n)(ψ(θ) − θᵀ target)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TiltedObjective {
    pub n: usize,
    pub alpha0: f64,
    pub scaled_target: Vec<f64>,
    start: Option<Vec<f64>>,
}

impl TiltedObjective {
    pub fn new(n: usize, alpha0: f64, scaled_target: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput("n must be positive".into()));
        }
        let c = 1.0 + alpha0 / n as f64;
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::InvalidInput("1 + alpha0/n must be positive".into()));
        }
        if scaled_target.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidInput("target must be finite".into()));
        }
        Ok(Self {
            n,
            alpha0,
            scaled_target,
            start: None,
        })
    }

    /// Tilt of the variational posterior after observing `r`.
    pub fn from_stats(r: &[SufficientStat], prior: &Hyperparams) -> Result<Self> {
        let n = r.len();
        if n == 0 {
            return Err(Error::InvalidInput(
                "at least one observation is required".into(),
            ));
        }
        let alpha = n as f64 + prior.alpha;
        let mut beta = prior.beta.clone();
        for ri in r {
            for (b, v) in beta.iter_mut().zip(ri.iter()) {
                *b += v;
            }
        }
        Self::new(n, prior.alpha, beta.iter().map(|b| b / alpha).collect())
    }

    /// Any `(α, β)` read as `n = max(1, ⌊α⌋)`, `α₀ = α − n`; `n·aₙ` is
    /// `αψ(θ) − θᵀβ` regardless of the split.
    pub fn from_hyperparams(hp: &Hyperparams) -> Self {
        let n = (hp.alpha.floor() as usize).max(1);
        Self {
            n,
            alpha0: hp.alpha - n as f64,
            scaled_target: hp.scaled_target(),
            start: None,
        }
    }

    /// Starting point for the Newton solve when the origin is not in the domain.
    pub fn with_start(mut self, start: Vec<f64>) -> Self {
        self.start = Some(start);
        self
    }

    /// `1 + α₀/n`.
    pub fn coefficient(&self) -> f64 {
        1.0 + self.alpha0 / self.n as f64
    }

    pub fn value<M: ExpFamily + ?Sized>(&self, model: &M, theta: &[f64]) -> f64 {
        self.coefficient() * (model.psi(theta) - linalg::dot(theta, &self.scaled_target))
    }

    /// `θ̂ₙ`, solving `Dψ(θ) = target`.
    pub fn minimiser<M: ExpFamily + ?Sized>(&self, model: &M) -> Result<NaturalParams> {
        if self.scaled_target.len() != model.dim() {
            return Err(Error::DimensionMismatch {
                expected: model.dim(),
                got: self.scaled_target.len(),
            });
        }
        let init = match &self.start {
            Some(s) => s.clone(),
            None => vec![0.0; model.dim()],
        };
        let tol = 1e-12 * (1.0 + linalg::norm(&self.scaled_target));
        newton_solve_moment_match(model, &self.scaled_target, &init, tol)
    }
}

/// Integrand weight `b(θ)`.
pub enum Weight<'a> {
    One,
    Coordinate(usize),
    Product(usize, usize),
    /// Derivatives by central differences.
    Custom(&'a (dyn Fn(&[f64]) -> f64 + Sync)),
}

impl Weight<'_> {
    /// `(b, Db, D²b)` at θ.
    pub fn jet(&self, theta: &[f64]) -> Result<(f64, Vec<f64>, Matrix)> {
        let m = theta.len();
        let check = |i: usize| {
            if i >= m {
                Err(Error::IndexOutOfRange { index: i, dim: m })
            } else {
                Ok(())
            }
        };
        Ok(match self {
            Weight::One => (1.0, vec![0.0; m], Matrix::zeros(m, m)),
            Weight::Coordinate(j) => {
                check(*j)?;
                let mut g = vec![0.0; m];
                g[*j] = 1.0;
                (theta[*j], g, Matrix::zeros(m, m))
            }
            Weight::Product(i, j) => {
                check(*i)?;
                check(*j)?;
                let mut g = vec![0.0; m];
                g[*i] += theta[*j];
                g[*j] += theta[*i];
                let mut h = Matrix::zeros(m, m);
                h[(*i, *j)] += 1.0;
                h[(*j, *i)] += 1.0;
                (theta[*i] * theta[*j], g, h)
            }
            Weight::Custom(f) => (
                f(theta),
                fd::gradient(|t| f(t), theta),
                fd::hessian_from_values(|t| f(t), theta, 1e-4),
            ),
        })
    }
}

/// Center, derivative tensors of `aₙ` and of `b`, all at `θ̂ₙ`.
#[derive(Debug, Clone, PartialEq)]
pub struct LaplaceExpansion {
    pub n: usize,
    pub center: NaturalParams,
    /// `aₙ(θ̂ₙ)`.
    pub a_min: f64,
    pub hess: Matrix,
    pub sigma: Matrix,
    pub log_det_hess: f64,
    pub d3: SymTensor,
    pub d4: SymTensor,
    pub b0: f64,
    pub b_grad: Vec<f64>,
    pub b_hess: Matrix,
}

impl LaplaceExpansion {
    /// Same center and tensors with another weight.
    pub fn reweighted(&self, b: &Weight<'_>) -> Result<Self> {
        let (b0, b_grad, b_hess) = b.jet(&self.center)?;
        Ok(Self {
            b0,
            b_grad,
            b_hess,
            ..self.clone()
        })
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    /// The bracket `b + (1/n)[…]` of the corrected expansion.
    pub fn corrected_bracket(&self) -> f64 {
        let m = self.dim();
        let s = &self.sigma;
        let mut t_bhess = 0.0;
        let mut t_a3b = 0.0;
        let mut t_a3a3 = 0.0;
        let mut t_a4 = 0.0;
        for i in 0..m {
            for j in 0..m {
                t_bhess += s[(i, j)] * self.b_hess[(i, j)];
                for k in 0..m {
                    let a3 = self.d3.get(&[i, j, k]);
                    for q in 0..m {
                        t_a3b += a3 * self.b_grad[q] * pairing4(s, i, j, k, q);
                        t_a4 += self.d4.get(&[i, j, k, q]) * pairing4(s, i, j, k, q);
                        if a3 == 0.0 {
                            continue;
                        }
                        for r in 0..m {
                            for u in 0..m {
                                t_a3a3 +=
                                    a3 * self.d3.get(&[q, r, u]) * pairing6(s, [i, j, k, q, r, u]);
                            }
                        }
                    }
                }
            }
        }
        let correction =
            0.5 * t_bhess - t_a3b / 6.0 + self.b0 * t_a3a3 / 72.0 - self.b0 * t_a4 / 24.0;
        self.b0 + correction / self.n as f64
    }

    /// `(2π)^{m/2} det(n D²aₙ)^{−1/2} exp{−n aₙ(θ̂ₙ)}` in log space.
    pub fn log_prefactor(&self) -> f64 {
        let m = self.dim() as f64;
        let n = self.n as f64;
        0.5 * m * (2.0 * PI).ln() - 0.5 * (m * n.ln() + self.log_det_hess) - n * self.a_min
    }
}

/// Assembles the expansion of `∫ b exp{−n aₙ}` around `θ̂ₙ`.
pub fn laplace_expand<M: ExpFamily + ?Sized>(
    model: &M,
    obj: &TiltedObjective,
    b: &Weight<'_>,
) -> Result<LaplaceExpansion> {
    let center = obj.minimiser(model)?;
    let c = obj.coefficient();
    let hess = linalg::symmetrize(&(model.hess_psi(&center) * c));
    let (sigma, log_det_hess) = linalg::spd_inverse(&hess)?;
    let (b0, b_grad, b_hess) = b.jet(&center)?;
    Ok(LaplaceExpansion {
        n: obj.n,
        a_min: obj.value(model, &center),
        d3: model.psi_d3(&center).scaled(c),
        d4: model.psi_d4(&center).scaled(c),
        center,
        hess,
        sigma,
        log_det_hess,
        b0,
        b_grad,
        b_hess,
    })
}

/// Zeroth-order and corrected values of the integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaplaceIntegral {
    pub log_prefactor: f64,
    pub b0: f64,
    pub bracket: f64,
}

impl LaplaceIntegral {
    pub fn zeroth(&self) -> Result<f64> {
        finite(
            self.log_prefactor.exp() * self.b0,
            "zeroth-order Laplace value",
        )
    }

    pub fn corrected(&self) -> Result<f64> {
        finite(
            self.log_prefactor.exp() * self.bracket,
            "corrected Laplace value",
        )
    }

    /// Log of the corrected value; the bracket must be positive.
    pub fn ln_corrected(&self) -> Result<f64> {
        if !(self.bracket > 0.0) {
            return Err(Error::NonFiniteResult(
                "corrected bracket is not positive; log-space value undefined".into(),
            ));
        }
        finite(self.log_prefactor + self.bracket.ln(), "log Laplace value")
    }

    pub fn ln_zeroth(&self) -> Result<f64> {
        if !(self.b0 > 0.0) {
            return Err(Error::NonFiniteResult("b(θ̂) is not positive".into()));
        }
        finite(self.log_prefactor + self.b0.ln(), "log Laplace value")
    }
}

fn finite(v: f64, what: &str) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFiniteResult(what.into()))
    }
}

pub fn laplace_integral(exp: &LaplaceExpansion) -> Result<LaplaceIntegral> {
    let out = LaplaceIntegral {
        log_prefactor: exp.log_prefactor(),
        b0: exp.b0,
        bracket: exp.corrected_bracket(),
    };
    if !out.log_prefactor.is_finite() || !out.bracket.is_finite() {
        return Err(Error::NonFiniteResult("Laplace expansion".into()));
    }
    Ok(out)
}

/// Posterior mean as the coordinate-wise ratio of corrected expansions
/// with `b = θⱼ` and `b = 1`.
pub fn posterior_mean_laplace<M: ExpFamily + ?Sized>(
    model: &M,
    obj: &TiltedObjective,
) -> Result<NaturalParams> {
    let base = laplace_expand(model, obj, &Weight::One)?;
    let denom = base.corrected_bracket();
    (0..model.dim())
        .map(|j| {
            let num = base.reweighted(&Weight::Coordinate(j))?.corrected_bracket();
            finite(num / denom, "Laplace posterior mean")
        })
        .collect::<Result<Vec<_>>>()
        .map(NaturalParams::new)
}

/// `⟨g(θ)⟩` as a ratio of corrected expansions.
pub fn expectation_laplace<M: ExpFamily + ?Sized>(
    model: &M,
    obj: &TiltedObjective,
    g: &(dyn Fn(&[f64]) -> f64 + Sync),
) -> Result<f64> {
    let base = laplace_expand(model, obj, &Weight::One)?;
    let num = base.reweighted(&Weight::Custom(g))?.corrected_bracket();
    finite(num / base.corrected_bracket(), "Laplace expectation")
}

/// Covariance from corrected expansions of `θᵢθⱼ`, `θᵢ` and `1`.
pub fn posterior_cov_laplace<M: ExpFamily + ?Sized>(
    model: &M,
    obj: &TiltedObjective,
) -> Result<Matrix> {
    let base = laplace_expand(model, obj, &Weight::One)?;
    let z = base.corrected_bracket();
    let m = model.dim();
    let mean: Vec<f64> = (0..m)
        .map(|j| Ok(base.reweighted(&Weight::Coordinate(j))?.corrected_bracket() / z))
        .collect::<Result<_>>()?;
    let mut cov = Matrix::zeros(m, m);
    for i in 0..m {
        for j in i..m {
            let second = base.reweighted(&Weight::Product(i, j))?.corrected_bracket() / z;
            cov[(i, j)] = second - mean[i] * mean[j];
            cov[(j, i)] = cov[(i, j)];
        }
    }
    Ok(cov)
}

fn check_indices(sigma: &Matrix, idx: &[usize]) -> Result<()> {
    let m = sigma.nrows();
    if sigma.ncols() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: sigma.ncols(),
        });
    }
    for &i in idx {
        if i >= m {
            return Err(Error::IndexOutOfRange { index: i, dim: m });
        }
    }
    Ok(())
}

fn pairing4(s: &Matrix, i: usize, j: usize, k: usize, q: usize) -> f64 {
    s[(i, j)] * s[(k, q)] + s[(i, k)] * s[(j, q)] + s[(i, q)] * s[(j, k)]
}

fn pairing6(s: &Matrix, x: [usize; 6]) -> f64 {
    let [a, b, c, d, e, f] = x;
    let p = |u: usize, v: usize| s[(u, v)];
    p(a, b) * p(c, d) * p(e, f)
        + p(a, b) * p(c, e) * p(d, f)
        + p(a, b) * p(c, f) * p(d, e)
        + p(a, c) * p(b, d) * p(e, f)
        + p(a, c) * p(b, e) * p(d, f)
        + p(a, c) * p(b, f) * p(d, e)
        + p(a, d) * p(b, c) * p(e, f)
        + p(a, d) * p(b, e) * p(c, f)
        + p(a, d) * p(b, f) * p(c, e)
        + p(a, e) * p(b, c) * p(d, f)
        + p(a, e) * p(b, d) * p(c, f)
        + p(a, e) * p(b, f) * p(c, d)
        + p(a, f) * p(b, c) * p(d, e)
        + p(a, f) * p(b, d) * p(c, e)
        + p(a, f) * p(b, e) * p(c, d)
}

/// Fourth central moment `E[XᵢXⱼXₖXₛ]` of `N(0, σ)`.
pub fn moment4(sigma: &Matrix, i: usize, j: usize, k: usize, s: usize) -> Result<f64> {
    check_indices(sigma, &[i, j, k, s])?;
    let mut x = [i, j, k, s];
    x.sort_unstable();
    Ok(pairing4(sigma, x[0], x[1], x[2], x[3]))
}

/// Sixth central moment of `N(0, σ)`, the 15 pairings.
pub fn moment6(sigma: &Matrix, idx: [usize; 6]) -> Result<f64> {
    check_indices(sigma, &idx)?;
    let mut x = idx;
    x.sort_unstable();
    Ok(pairing6(sigma, x))
}

/// Offsets from `θ̂ₙ` at which the assumptions are sampled.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingPlan {
    pub offsets: Vec<Vec<f64>>,
}

pub const DEFAULT_SHELL_POINTS: usize = 512;
const BALL_POINTS: usize = 64;

impl SamplingPlan {
    /// 512 shell points at radii δ, 2δ, 4δ (spread over [δ, 4δ] in one
    /// dimension) plus ball points at radii up to ε.
    pub fn quasi_uniform(dim: usize, eps: f64, delta: f64) -> Self {
        let ball_dirs = directions(dim, BALL_POINTS.div_ceil(3));
        let mut offsets = vec![vec![0.0; dim]];
        if dim == 1 {
            // Two rays; spread radii evenly over [δ, 4δ] on each side.
            let per_side = DEFAULT_SHELL_POINTS / 2;
            for k in 0..per_side {
                let radius = delta * (1.0 + 3.0 * k as f64 / (per_side - 1) as f64);
                offsets.push(vec![radius]);
                offsets.push(vec![-radius]);
            }
        } else {
            let shell_dirs = directions(dim, DEFAULT_SHELL_POINTS.div_ceil(3));
            let mut count = 0;
            'shell: for radius in [1.0, 2.0, 4.0] {
                for d in &shell_dirs {
                    if count == DEFAULT_SHELL_POINTS {
                        break 'shell;
                    }
                    offsets.push(d.iter().map(|x| x * radius * delta).collect());
                    count += 1;
                }
            }
        }
        for radius in [0.25, 0.5, 1.0] {
            for d in &ball_dirs {
                offsets.push(d.iter().map(|x| x * radius * eps).collect());
            }
        }
        Self { offsets }
    }

    pub fn center_only(dim: usize) -> Self {
        Self {
            offsets: vec![vec![0.0; dim]],
        }
    }
}

/// Unit directions: ± for m = 1, evenly spaced angles for m = 2, and
/// normalized Gaussian draws from a fixed stream otherwise.
fn directions(dim: usize, count: usize) -> Vec<Vec<f64>> {
    match dim {
        0 => Vec::new(),
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..count)
            .map(|k| {
                let a = 2.0 * PI * (k as f64 + 0.5) / count as f64;
                vec![a.cos(), a.sin()]
            })
            .collect(),
        _ => {
            let mut rng = substream(0x5eed, dim as u64);
            (0..count)
                .map(|_| {
                    let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
                    let norm = linalg::norm(&v);
                    v.iter().map(|x| x / norm).collect()
                })
                .collect()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionReport {
    /// Max sampled `|aₙ|`, `‖Daₙ‖∞`, … up to order 4 on the ε-ball.
    pub max_derivatives: [f64; 5],
    pub ball_points: usize,
    pub bounded: Verdict,
    pub det_hess: f64,
    pub nondegenerate: Verdict,
    /// Max of `aₙ(θ̂ₙ) − aₙ(θ)` over sampled points with `‖θ − θ̂ₙ‖ ≥ δ`.
    pub shell_max: Option<f64>,
    pub shell_points: usize,
    pub separated: Verdict,
}

/// Sampled spot checks of boundedness, non-degeneracy and separation.
pub fn check_assumptions<M: ExpFamily + ?Sized>(
    model: &M,
    obj: &TiltedObjective,
    eps: f64,
    delta: f64,
    plan: &SamplingPlan,
) -> Result<AssumptionReport> {
    if !(delta > 0.0 && delta < eps) {
        return Err(Error::InvalidInput("require 0 < delta < eps".into()));
    }
    let center = obj.minimiser(model)?;
    let c = obj.coefficient();
    let a_min = obj.value(model, &center);
    let det_hess = (model.hess_psi(&center) * c).determinant();

    let mut max_d = [0.0_f64; 5];
    let mut ball_points = 0;
    let mut shell_max: Option<f64> = None;
    let mut shell_points = 0;
    for off in &plan.offsets {
        if off.len() != center.len() {
            return Err(Error::DimensionMismatch {
                expected: center.len(),
                got: off.len(),
            });
        }
        let theta: Vec<f64> = center.iter().zip(off).map(|(a, b)| a + b).collect();
        if !model.in_domain(&theta) {
            continue;
        }
        let r = linalg::norm(off);
        if r <= eps {
            ball_points += 1;
            let grad: Vec<f64> = model
                .grad_psi(&theta)
                .iter()
                .zip(&obj.scaled_target)
                .map(|(g, t)| c * (g - t))
                .collect();
            let vals = [
                obj.value(model, &theta).abs(),
                grad.iter().fold(0.0_f64, |a, g| a.max(g.abs())),
                linalg::max_abs(&model.hess_psi(&theta)) * c,
                model.psi_d3(&theta).max_abs() * c,
                model.psi_d4(&theta).max_abs() * c,
            ];
            for (m, v) in max_d.iter_mut().zip(vals) {
                *m = if v.is_nan() { f64::NAN } else { m.max(v) };
            }
        }
        if r >= delta && r > 0.0 {
            shell_points += 1;
            let gap = a_min - obj.value(model, &theta);
            shell_max = Some(shell_max.map_or(gap, |s: f64| s.max(gap)));
        }
    }
    let bounded = if ball_points == 0 {
        Verdict::Inconclusive
    } else if max_d.iter().all(|v| v.is_finite()) {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    let separated = match shell_max {
        None => Verdict::Inconclusive,
        Some(v) if v < 0.0 => Verdict::Pass,
        Some(_) => Verdict::Fail,
    };
    Ok(AssumptionReport {
        max_derivatives: max_d,
        ball_points,
        bounded,
        det_hess,
        nondegenerate: if det_hess > 0.0 {
            Verdict::Pass
        } else {
            Verdict::Fail
        },
        shell_max,
        shell_points,
        separated,
    })
}
