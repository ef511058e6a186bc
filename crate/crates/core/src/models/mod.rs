//! Built-in models and the quadrature-backed generic model.

mod gaussian;
mod generic;
mod poisson;

use alloc::vec::Vec;

pub use gaussian::{GaussianConvolution, ScalarGaussian};
pub use generic::{
    generic_gaussian_convolution, generic_scalar_gaussian, GenericQuadModel,
    GenericQuadModelBuilder, LatentHint, NODES as GENERIC_QUADRATURE_NODES,
};
pub use poisson::PoissonCounts;

use crate::error::{Error, Result};
use crate::expfam::{CompleteObs, ExpFamily, NaturalParams};
use crate::rng::substream;

/// Draws `n` complete observations; observation `i` uses substream `i`.
pub fn simulate_complete<M: ExpFamily + ?Sized>(
    model: &M,
    theta: &[f64],
    n: usize,
    seed: u64,
) -> Result<Vec<CompleteObs>> {
    NaturalParams::checked(model, theta.to_vec())?;
    (0..n)
        .map(|i| model.sample_complete(theta, &mut substream(seed, i as u64)))
        .collect()
}

/// Draws `n` observations and discards the latent values.
pub fn simulate<M: ExpFamily + ?Sized>(
    model: &M,
    theta: &[f64],
    n: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let obs = simulate_complete(model, theta, n, seed)?;
    let ys: Vec<f64> = obs.into_iter().map(|o| o.y).collect();
    if ys.iter().any(|y| !y.is_finite()) {
        return Err(Error::NonFiniteResult("simulated observation".into()));
    }
    Ok(ys)
}
