//! Gamma-family special functions used by the Poisson model and its oracles.

#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;

/// Natural log of the gamma function for `x > 0`.
pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

/// `ln(k!)` for a non-negative count stored as a float.
pub fn ln_factorial(k: f64) -> f64 {
    libm::lgamma(k + 1.0)
}

/// Digamma function for `x > 0`: recurrence up to `x >= 10`, then the
/// asymptotic series.
pub fn digamma(mut x: f64) -> f64 {
    let mut acc = 0.0;
    while x < 10.0 {
        acc -= 1.0 / x;
        x += 1.0;
    }
    let inv2 = 1.0 / (x * x);
    let series = inv2
        * (1.0 / 12.0
            - inv2
                * (1.0 / 120.0
                    - inv2
                        * (1.0 / 252.0
                            - inv2
                                * (1.0 / 240.0
                                    - inv2 * (1.0 / 132.0 - inv2 * (691.0 / 32760.0))))));
    acc + x.ln() - 0.5 / x - series
}

/// Trigamma function for `x > 0`.
pub fn trigamma(mut x: f64) -> f64 {
    let mut acc = 0.0;
    while x < 10.0 {
        acc += 1.0 / (x * x);
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    // 1/x + 1/(2x^2) + B2/x^3 + B4/x^5 + ...
    let series = inv
        + 0.5 * inv2
        + inv
            * inv2
            * (1.0 / 6.0
                - inv2
                    * (1.0 / 30.0
                        - inv2
                            * (1.0 / 42.0
                                - inv2
                                    * (1.0 / 30.0
                                        - inv2 * (5.0 / 66.0 - inv2 * (691.0 / 2730.0))))));
    acc + series
}

#[cfg(test)]
mod tests {
    use super::*;

    // Reference values from mpmath at 30 digits.
    #[test]
    fn digamma_reference_values() {
        assert!((digamma(1.0) + 0.577_215_664_901_532_9).abs() < 1e-14);
        assert!((digamma(0.5) + 1.963_510_026_021_423_5).abs() < 1e-13);
        assert!((digamma(11.0) - 2.351_752_589_066_721_4).abs() < 1e-14);
        assert!((digamma(201.0) - 5.300_815_283_219_911).abs() < 1e-13);
    }

    #[test]
    fn trigamma_reference_values() {
        // pi^2/6
        assert!((trigamma(1.0) - 1.644_934_066_848_226_4).abs() < 1e-13);
        assert!((trigamma(11.0) - 0.095_166_335_681_685_75).abs() < 1e-14);
    }

    #[test]
    fn digamma_recurrence() {
        for &x in &[0.3, 1.7, 4.2, 9.9, 55.0] {
            let lhs = digamma(x + 1.0) - digamma(x);
            assert!((lhs - 1.0 / x).abs() < 1e-12, "x={x}");
        }
    }

    #[test]
    fn ln_gamma_matches_factorials() {
        assert!((ln_factorial(5.0) - 120f64.ln()).abs() < 1e-12);
        assert!(ln_gamma(1.0).abs() < 1e-15);
    }
}
