//! Variational-Bayes fixed-point estimation for natural exponential families
//! with latent variables, higher-order Laplace integration, and numerical
//! diagnostics of the estimator's convergence and asymptotic normality.
//!
//! The crate is `no_std` (with `alloc`); file formats and the command line
//! live in the `vblab` crate.

#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod asymptotics;
pub mod error;
pub mod expfam;
pub mod laplace;
pub mod linalg;
pub mod models;
pub mod quadrature;
pub mod rng;
pub mod special;
pub mod tensor;
pub mod vb;

pub use error::{Error, Result};
pub use expfam::{ExpFamily, Hyperparams, NaturalParams, SufficientStat};
pub use linalg::Matrix;
