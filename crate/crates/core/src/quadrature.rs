//! Composite Simpson grids and Gauss–Hermite rules.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;

use crate::error::{Error, Result};

/// Uniform grid on `[lo, hi]` with an odd number of points, carrying
/// composite Simpson weights.
#[derive(Debug, Clone, PartialEq)]
pub struct SimpsonGrid {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl SimpsonGrid {
    pub fn new(lo: f64, hi: f64, points: usize) -> Result<Self> {
        if points < 3 || points.is_multiple_of(2) {
            return Err(Error::InvalidInput(alloc::format!(
                "Simpson grid needs an odd point count >= 3, got {points}"
            )));
        }
        if !(lo.is_finite() && hi.is_finite() && hi > lo) {
            return Err(Error::InvalidInput("Simpson grid needs lo < hi".into()));
        }
        Ok(Self { lo, hi, points })
    }

    pub fn centered(center: f64, half_width: f64, points: usize) -> Result<Self> {
        Self::new(center - half_width, center + half_width, points)
    }

    pub fn step(&self) -> f64 {
        (self.hi - self.lo) / (self.points - 1) as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        if i + 1 == self.points {
            self.hi
        } else {
            self.lo + i as f64 * self.step()
        }
    }

    pub fn weight(&self, i: usize) -> f64 {
        let h3 = self.step() / 3.0;
        if i == 0 || i + 1 == self.points {
            h3
        } else if i % 2 == 1 {
            4.0 * h3
        } else {
            2.0 * h3
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.points).map(|i| self.node(i)).collect()
    }

    pub fn weights(&self) -> Vec<f64> {
        (0..self.points).map(|i| self.weight(i)).collect()
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        (0..self.points)
            .map(|i| self.weight(i) * f(self.node(i)))
            .sum()
    }
}

/// Gauss–Hermite rule for `∫ g(t) exp(-t²) dt`, nodes ascending.
#[derive(Debug, Clone)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    pub ln_weights: Vec<f64>,
}

impl GaussHermite {
    /// Nodes by Newton iteration on the orthonormal Hermite recurrence.
    pub fn new(n: usize) -> Self {
        const PIM4: f64 = 0.751_125_544_464_942_5; // pi^(-1/4)
        let mut x = vec![0.0; n];
        let mut w = vec![0.0; n];
        let half = n.div_ceil(2);
        let nf = n as f64;
        let mut z = 0.0_f64;
        for i in 0..half {
            z = match i {
                0 => (2.0 * nf + 1.0).sqrt() - 1.855_75 * (2.0 * nf + 1.0).powf(-0.166_67),
                1 => z - 1.14 * nf.powf(0.426) / z,
                2 => 1.86 * z - 0.86 * x[0],
                3 => 1.91 * z - 0.91 * x[1],
                _ => 2.0 * z - x[i - 2],
            };
            let mut pp = 0.0;
            for _ in 0..100 {
                let mut p1 = PIM4;
                let mut p2 = 0.0;
                for j in 0..n {
                    let p3 = p2;
                    p2 = p1;
                    let jf = j as f64;
                    p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
                }
                pp = (2.0 * nf).sqrt() * p2;
                let z1 = z;
                z = z1 - p1 / pp;
                if (z - z1).abs() <= 1e-15 * z.abs().max(1.0) {
                    break;
                }
            }
            x[i] = z;
            x[n - 1 - i] = -z;
            w[i] = 2.0 / (pp * pp);
            w[n - 1 - i] = w[i];
        }
        let mut pairs: Vec<(f64, f64)> = x.into_iter().zip(w).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        Self {
            nodes: pairs.iter().map(|p| p.0).collect(),
            ln_weights: pairs.iter().map(|p| p.1.ln()).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn max_node(&self) -> f64 {
        self.nodes.last().copied().unwrap_or(0.0)
    }
}

/// `ln Σ exp(v)` without overflow.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::PI;

    #[test]
    fn simpson_is_exact_for_cubics() {
        let g = SimpsonGrid::new(-1.0, 2.0, 5).unwrap();
        let v = g.integrate(|x| x * x * x - 2.0 * x + 1.0);
        // [x^4/4 - x^2 + x] from -1 to 2
        let exact = (4.0 - 4.0 + 2.0) - (0.25 - 1.0 - 1.0);
        assert!((v - exact).abs() < 1e-13);
    }

    #[test]
    fn even_point_count_rejected() {
        assert!(SimpsonGrid::new(0.0, 1.0, 4).is_err());
    }

    #[test]
    fn hermite_rule_moments() {
        let gh = GaussHermite::new(64);
        let moment = |k: i32| -> f64 {
            gh.nodes
                .iter()
                .zip(&gh.ln_weights)
                .map(|(t, lw)| lw.exp() * t.powi(k))
                .sum()
        };
        assert!((moment(0) - PI.sqrt()).abs() < 1e-13);
        assert!(moment(1).abs() < 1e-13);
        assert!((moment(2) - PI.sqrt() / 2.0).abs() < 1e-13);
        assert!((moment(4) - 3.0 * PI.sqrt() / 4.0).abs() < 1e-12);
    }

    #[test]
    fn small_rule_matches_tabulated_nodes() {
        let gh = GaussHermite::new(3);
        assert!((gh.nodes[2] - 1.224_744_871_391_589).abs() < 1e-14);
        assert!(gh.nodes[1].abs() < 1e-15);
        assert!((gh.ln_weights[1].exp() - 1.181_635_900_603_677).abs() < 1e-14);
    }

    #[test]
    fn log_sum_exp_stable() {
        let v = log_sum_exp(&[1000.0, 1000.0]);
        assert!((v - (1000.0 + 2f64.ln())).abs() < 1e-12);
    }
}
