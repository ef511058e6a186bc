//! Thin helpers over `nalgebra` for the small dense matrices used here.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn symmetrize(a: &Matrix) -> Matrix {
    (a + a.transpose()) * 0.5
}

/// Inverse and log-determinant of a symmetric positive definite matrix.
pub fn spd_inverse(a: &Matrix) -> Result<(Matrix, f64)> {
    let chol = nalgebra::Cholesky::new(a.clone()).ok_or(Error::SingularHessian)?;
    let l = chol.l();
    let mut log_det = 0.0;
    for i in 0..l.nrows() {
        let d = l[(i, i)];
        if !(d.is_finite() && d > 0.0) {
            return Err(Error::SingularHessian);
        }
        log_det += 2.0 * d.ln();
    }
    Ok((chol.inverse(), log_det))
}

/// Solves `a x = b` for symmetric positive definite `a`.
pub fn spd_solve(a: &Matrix, b: &[f64]) -> Result<Vec<f64>> {
    let chol = nalgebra::Cholesky::new(a.clone()).ok_or(Error::SingularHessian)?;
    let x = chol.solve(&DVector::from_column_slice(b));
    Ok(x.iter().copied().collect())
}

/// Eigen-decomposition of a symmetric matrix, eigenvalues ascending.
pub fn sym_eigen(a: &Matrix) -> (Vec<f64>, Matrix) {
    let eig = nalgebra::SymmetricEigen::new(symmetrize(a));
    let m = a.nrows();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = Matrix::from_fn(m, m, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Operator norm induced by the Euclidean vector norm.
pub fn spectral_norm(a: &Matrix) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.clone()
        .singular_values()
        .iter()
        .fold(0.0_f64, |acc, &s| acc.max(s))
}

pub fn max_abs(a: &Matrix) -> f64 {
    a.iter().fold(0.0_f64, |acc, &x| acc.max(x.abs()))
}

pub fn column(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v)
}
