//! Brute-force convolution of `B(k, a)` and `pi_b` in exact rational
//! arithmetic. The common factor `e^{-b}` is left out of every mass and only
//! applied when comparing against floating-point values.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// Exact rational value of a finite double.
pub fn rational_from_f64(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite float")
}

fn ln_bigint(x: &BigInt) -> f64 {
    debug_assert!(x.is_positive());
    let bits = x.bits();
    if bits <= 1000 {
        return x.to_f64().expect("fits in f64").ln();
    }
    let shift = bits - 64;
    let top: BigInt = x >> shift;
    top.to_f64().expect("64-bit value").ln() + shift as f64 * std::f64::consts::LN_2
}

/// Natural log of a non-negative rational; `-inf` at zero.
pub fn ln_rational(x: &BigRational) -> f64 {
    assert!(!x.is_negative(), "ln of a negative rational");
    if x.is_zero() {
        return f64::NEG_INFINITY;
    }
    ln_bigint(x.numer()) - ln_bigint(x.denom())
}

/// `b^m / m!` for `m = 0..=n_max`.
pub fn poisson_weights(b: &BigRational, n_max: u64) -> Vec<BigRational> {
    let mut out = Vec::with_capacity(n_max as usize + 1);
    let mut w = BigRational::one();
    out.push(w.clone());
    for m in 1..=n_max {
        w = w * b / BigRational::from_integer(BigInt::from(m));
        out.push(w.clone());
    }
    out
}

/// Binomial masses `C(k, j) a^j (1-a)^{k-j}`, `j = 0..=k`.
pub fn binomial_masses(k: u64, a: &BigRational) -> Vec<BigRational> {
    let comp = BigRational::one() - a;
    let mut coeff = BigInt::one();
    (0..=k)
        .map(|j| {
            if j > 0 {
                coeff = coeff.clone() * BigInt::from(k - j + 1) / BigInt::from(j);
            }
            BigRational::from_integer(coeff.clone()) * pow(a, j) * pow(&comp, k - j)
        })
        .collect()
}

fn pow(x: &BigRational, e: u64) -> BigRational {
    num_traits::pow(x.clone(), e as usize)
}

/// `sum_j C(k,j) a^j (1-a)^{k-j} b^{n-j} / (n-j)!` for `n = 0..=n_max`, i.e.
/// `e^{b} [B(k, a) * pi_b](n)`.
pub fn exact_rational_convolution(k: u64, a: &BigRational, b: &BigRational, n_max: u64) -> Vec<BigRational> {
    ExactConvolution::new(k, a, b, n_max).scaled_masses
}

/// Masses of `B(k, a) * pi_b` without the `e^{-b}` factor.
#[derive(Debug, Clone)]
pub struct ExactConvolution {
    pub k: u64,
    pub a: BigRational,
    pub b: BigRational,
    pub scaled_masses: Vec<BigRational>,
}

impl ExactConvolution {
    pub fn new(k: u64, a: &BigRational, b: &BigRational, n_max: u64) -> Self {
        let binom = binomial_masses(k, a);
        let poisson = poisson_weights(b, n_max);
        let scaled_masses = (0..=n_max)
            .map(|n| {
                (0..=k.min(n))
                    .map(|j| &binom[j as usize] * &poisson[(n - j) as usize])
                    .fold(BigRational::zero(), |acc, x| acc + x)
            })
            .collect();
        Self { k, a: a.clone(), b: b.clone(), scaled_masses }
    }

    /// `ln` of the true mass at `n`, applying `e^{-b}` in floating point.
    pub fn ln_mass(&self, n: u64) -> f64 {
        ln_rational(&self.scaled_masses[n as usize]) - self.b.to_f64().expect("finite b")
    }

    /// Cleared-denominator form of `H(n)^2 <= M H(n+1) H(n-1)` with
    /// `M^{-1} = (n/(n+1)) (1 - a^2/D^2)`, `D = (1-a) b + a`:
    /// `n (D^2 - a^2) H(n)^2 <= (n+1) D^2 H(n+1) H(n-1)`.
    /// The `e^{-2b}` factor is common to both sides and dropped.
    pub fn ultra_log_convexity(&self, n: u64) -> ExactComparison {
        assert!(n >= 1 && (n + 1) as usize <= self.scaled_masses.len() - 1);
        let one = BigRational::one();
        let d = (&one - &self.a) * &self.b + &self.a;
        let d2 = &d * &d;
        let h = &self.scaled_masses;
        let (lower, mid, upper) = (&h[n as usize - 1], &h[n as usize], &h[n as usize + 1]);
        let nn = BigRational::from_integer(BigInt::from(n));
        let lhs = &nn * (&d2 - &self.a * &self.a) * mid * mid;
        let rhs = (nn + one) * d2 * upper * lower;
        ExactComparison { lhs, rhs }
    }
}

/// Two exact sides of an inequality `lhs <= rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactComparison {
    pub lhs: BigRational,
    pub rhs: BigRational,
}

impl ExactComparison {
    pub fn holds(&self) -> bool {
        self.lhs <= self.rhs
    }

    /// `ln(rhs / lhs)`; negative exactly when the inequality fails.
    pub fn log_gap(&self) -> f64 {
        ln_rational(&self.rhs) - ln_rational(&self.lhs)
    }
}
