//! Log-domain primitives and the rounding-error model shared by every module.
//!
//! Error model: a log-domain term assembled as a sum of additive components
//! `c_1 + ... + c_m` (each a logarithm, a product of an integer with a
//! logarithm, or a log-factorial) is accurate to `TERM_ULPS * EPS * sum |c_i|`.
//! glibc's `ln`/`exp` are below one ulp and the log-factorial below is a few
//! ulps, so `TERM_ULPS = 8` dominates the actual accumulation.

pub const EPS: f64 = f64::EPSILON;

pub(crate) const TERM_ULPS: f64 = 8.0;

/// Natural log of 12, the factor separating the two semi-log-convexity bounds.
pub const LN_12: f64 = 2.484_906_649_788_000_3;

/// Factorials `0!..=20!` exactly representable in `u64`.
const FACTORIALS: [u64; 21] = {
    let mut table = [1u64; 21];
    let mut i = 1;
    while i < 21 {
        table[i] = table[i - 1] * i as u64;
        i += 1;
    }
    table
};

/// Exact `n!` for `n <= 20`.
pub fn exact_factorial(n: u64) -> Option<u64> {
    FACTORIALS.get(n as usize).copied()
}

/// `ln(n!)`.
///
/// Below 21 the exact integer factorial is rounded once and logged. Above, the
/// Stirling series for `ln Gamma(n + 1)` truncated after the `x^-9` term, whose
/// remainder at `x >= 21` is below `1e-19` absolute.
pub fn ln_factorial(n: u64) -> f64 {
    if let Some(f) = exact_factorial(n) {
        return (f as f64).ln();
    }
    let x = (n + 1) as f64;
    const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    // Bernoulli coefficients B_{2j} / (2j (2j - 1)).
    let series = inv
        * (1.0 / 12.0
            - inv2 * (1.0 / 360.0 - inv2 * (1.0 / 1260.0 - inv2 * (1.0 / 1680.0 - inv2 / 1188.0))));
    (x - 0.5) * x.ln() - x + HALF_LN_2PI + series
}

/// `ln C(k, j)` for `j <= k`.
pub fn ln_binomial_coefficient(k: u64, j: u64) -> f64 {
    debug_assert!(j <= k);
    ln_factorial(k) - ln_factorial(j) - ln_factorial(k - j)
}

/// `log(sum(exp(xs)))`, returning `-inf` for an empty slice or all `-inf` inputs.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let sum: f64 = xs.iter().map(|&x| (x - max).exp()).sum();
    max + sum.ln()
}

/// `x * ln(y)` with the convention `0 * ln 0 = 0`.
#[inline]
pub fn xlogy(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * y.ln()
    }
}

/// Absolute error bound on `log_sum_exp` over `terms` inputs that are each
/// accurate to `term_err`, with result `value`.
pub(crate) fn log_sum_exp_error(term_err: f64, terms: usize, value: f64) -> f64 {
    if !value.is_finite() {
        return 0.0;
    }
    term_err + (terms as f64 + 3.0) * EPS + EPS * value.abs()
}

/// Bound on the relative error of `exp(x)` when `x` carries absolute error `err`.
#[inline]
pub(crate) fn relative_from_log_error(err: f64) -> f64 {
    err.exp_m1()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_factorials_are_exact() {
        assert_eq!(exact_factorial(0), Some(1));
        assert_eq!(exact_factorial(20), Some(2_432_902_008_176_640_000));
        assert_eq!(exact_factorial(21), None);
        assert_eq!(ln_factorial(0), 0.0);
        assert_eq!(ln_factorial(1), 0.0);
    }

    #[test]
    fn stirling_matches_product_across_the_switch() {
        // ln(21!) = ln(20!) + ln 21 computed independently.
        let direct = (exact_factorial(20).unwrap() as f64).ln() + 21f64.ln();
        let rel = (ln_factorial(21) - direct).abs() / direct;
        assert!(rel < 1e-15, "rel = {rel}");
        // Deep in the Stirling regime, compare against a long sum of logs.
        let sum: f64 = (1..=200u64).map(|i| (i as f64).ln()).sum();
        let rel = (ln_factorial(200) - sum).abs() / sum;
        assert!(rel < 1e-14, "rel = {rel}");
    }

    #[test]
    fn log_sum_exp_edges() {
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
        assert_eq!(log_sum_exp(&[f64::NEG_INFINITY, f64::NEG_INFINITY]), f64::NEG_INFINITY);
        let v = log_sum_exp(&[0.5f64.ln(), 0.25f64.ln(), f64::NEG_INFINITY]);
        assert!((v - 0.75f64.ln()).abs() < 1e-16);
        // no overflow for huge magnitudes
        let v = log_sum_exp(&[-1000.0, -1000.0]);
        assert!((v - (-1000.0 + 2f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn xlogy_zero_convention() {
        assert_eq!(xlogy(0.0, 0.0), 0.0);
        assert_eq!(xlogy(2.0, 0.0), f64::NEG_INFINITY);
    }

    #[test]
    fn ln_12_constant() {
        assert_eq!(LN_12, 12f64.ln());
    }
}
