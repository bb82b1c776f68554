//! Poisson and binomial laws on the non-negative integers, evaluated in log
//! domain, and their convolution as a windowed pmf with a certified tail bound.

use crate::error::{domain, Result};
use crate::numeric::{
    ln_binomial_coefficient, ln_factorial, log_sum_exp, log_sum_exp_error,
    relative_from_log_error, xlogy, EPS, TERM_ULPS,
};

/// A logarithm together with an absolute bound on its rounding error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogValue {
    pub ln: f64,
    pub err: f64,
}

impl LogValue {
    pub fn new(ln: f64, err: f64) -> Self {
        Self { ln, err }
    }

    pub fn value(&self) -> f64 {
        self.ln.exp()
    }
}

/// `n ln(rate) - rate - ln(n!)`, with the Dirac-at-0 convention for `rate = 0`.
pub fn poisson_log_pmf(rate: f64, n: u64) -> Result<f64> {
    check_rate(rate)?;
    Ok(poisson_term(rate, n).ln)
}

/// `ln B(k, a)(j)`; `-inf` for `j` outside `0..=k`.
pub fn binomial_log_pmf(k: u64, a: f64, j: i64) -> Result<f64> {
    Ok(BinomialLaw::new(k, a)?.log_pmf(j))
}

fn check_rate(rate: f64) -> Result<()> {
    if !(rate >= 0.0) || !rate.is_finite() {
        return Err(domain(format!("Poisson rate must be finite and >= 0, got {rate}")));
    }
    Ok(())
}

fn poisson_term(rate: f64, n: u64) -> LogValue {
    let nf = n as f64;
    let power = xlogy(nf, rate);
    let lf = ln_factorial(n);
    let ln = power - rate - lf;
    let err = if ln.is_finite() {
        TERM_ULPS * EPS * (power.abs() + rate + lf)
    } else {
        0.0
    };
    LogValue::new(ln, err)
}

/// Poisson law with parameter `rate`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoissonLaw {
    rate: f64,
}

impl PoissonLaw {
    pub fn new(rate: f64) -> Result<Self> {
        check_rate(rate)?;
        Ok(Self { rate })
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn log_pmf(&self, n: u64) -> f64 {
        poisson_term(self.rate, n).ln
    }

    pub(crate) fn log_term(&self, n: u64) -> LogValue {
        poisson_term(self.rate, n)
    }

    pub fn window(&self, deficit: f64) -> Result<PoissonWindow> {
        poisson_window(self.rate, deficit)
    }
}

/// Binomial law `B(trials, success)`.
///
/// The failure probability is stored separately so callers holding an
/// accurate `1 - a` (e.g. `-expm1(-mu t)`) do not lose it to cancellation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinomialLaw {
    trials: u64,
    success: f64,
    failure: f64,
}

impl BinomialLaw {
    pub fn new(trials: u64, success: f64) -> Result<Self> {
        Self::with_complement(trials, success, 1.0 - success)
    }

    /// Construct from both `a` and an independently computed `1 - a`.
    pub fn with_complement(trials: u64, success: f64, failure: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&success) || !(0.0..=1.0).contains(&failure) {
            return Err(domain(format!(
                "binomial success probability must lie in [0, 1], got {success}"
            )));
        }
        if (success + failure - 1.0).abs() > 4.0 * EPS {
            return Err(domain(format!(
                "success {success} and failure {failure} do not sum to 1"
            )));
        }
        Ok(Self { trials, success, failure })
    }

    pub fn trials(&self) -> u64 {
        self.trials
    }

    pub fn success(&self) -> f64 {
        self.success
    }

    pub fn failure(&self) -> f64 {
        self.failure
    }

    pub fn log_pmf(&self, j: i64) -> f64 {
        self.log_term(j).ln
    }

    pub(crate) fn log_term(&self, j: i64) -> LogValue {
        if j < 0 || j as u64 > self.trials {
            return LogValue::new(f64::NEG_INFINITY, 0.0);
        }
        let (k, j) = (self.trials, j as u64);
        let coeff = ln_binomial_coefficient(k, j);
        let hits = xlogy(j as f64, self.success);
        let misses = xlogy((k - j) as f64, self.failure);
        let ln = coeff + hits + misses;
        let err = if ln.is_finite() {
            let magnitude = ln_factorial(k) + ln_factorial(j) + ln_factorial(k - j);
            TERM_ULPS * EPS * (magnitude + hits.abs() + misses.abs())
        } else {
            0.0
        };
        LogValue::new(ln, err)
    }
}

/// Right endpoint of a Poisson window and the certified mass beyond it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoissonWindow {
    /// Last index kept; the window is `0..=right`.
    pub right: u64,
    /// Upper bound on `P(X > right)`.
    pub tail_bound: f64,
}

/// `ln` of the Chernoff bound `P(X >= x) <= e^{-rate} (e rate / x)^x`, valid for `x > rate`.
fn ln_chernoff(rate: f64, x: u64) -> f64 {
    let xf = x as f64;
    -rate + xf * (1.0 + rate.ln() - xf.ln())
}

/// Fraction of the deficit left to the Chernoff bound beyond the summed terms.
const CHERNOFF_SHARE: f64 = 1e-8;

/// Smallest `N` whose certified Poisson tail `P(X > N)` is at most `deficit`.
///
/// A Chernoff bound locates a certified starting point; the window is then
/// shrunk one index at a time by adding upper bounds on the exact masses to
/// the tail until the next step would exceed the deficit.
pub fn poisson_window(rate: f64, deficit: f64) -> Result<PoissonWindow> {
    check_rate(rate)?;
    if !(deficit > 0.0 && deficit < 1.0) {
        return Err(domain(format!("deficit must lie in (0, 1), got {deficit}")));
    }
    if rate == 0.0 {
        return Ok(PoissonWindow { right: 0, tail_bound: 0.0 });
    }
    // Rounding slack on the bound evaluation itself.
    let budget = deficit * (1.0 - 1e-9);
    // The Chernoff point is pushed far enough out that the exact terms, not
    // the bound, decide where the window ends.
    let ln_far = (deficit * CHERNOFF_SHARE).ln();
    let admissible = |x: u64| ln_chernoff(rate, x) <= ln_far;

    // Galloping search for the first admissible x > rate; the bound decreases in x.
    let lo_start = rate.floor() as u64 + 1;
    let mut lo = lo_start;
    let mut step = 1u64;
    let mut hi = lo;
    while !admissible(hi) {
        lo = hi + 1;
        hi = hi.saturating_add(step);
        step = step.saturating_mul(2);
    }
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if admissible(mid) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    let first = hi;
    let mut right = first - 1;
    let mut tail = ln_chernoff(rate, first).exp();
    let law = PoissonLaw { rate };
    while right > 0 {
        let term = law.log_term(right);
        let upper = term.ln.exp() * (1.0 + relative_from_log_error(term.err) + 2.0 * EPS);
        let widened = (tail + upper) * (1.0 + EPS);
        if widened > budget {
            break;
        }
        tail = widened;
        right -= 1;
    }
    Ok(PoissonWindow { right, tail_bound: tail })
}

/// A pmf on `offset..offset + log_masses.len()` stored as log-masses, with a
/// certified bound on the mass that lies outside the window.
#[derive(Debug, Clone, PartialEq)]
pub struct CertifiedPmf {
    offset: u64,
    log_masses: Vec<f64>,
    tail_deficit: f64,
    log_error: f64,
}

impl CertifiedPmf {
    pub fn new(offset: u64, log_masses: Vec<f64>, tail_deficit: f64, log_error: f64) -> Self {
        Self { offset, log_masses, tail_deficit, log_error }
    }

    pub fn offset(&self) -> u64 {
        self.offset
    }

    /// One past the last stored index.
    pub fn end(&self) -> u64 {
        self.offset + self.log_masses.len() as u64
    }

    pub fn len(&self) -> usize {
        self.log_masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_masses.is_empty()
    }

    pub fn log_masses(&self) -> &[f64] {
        &self.log_masses
    }

    pub fn tail_deficit(&self) -> f64 {
        self.tail_deficit
    }

    /// Largest absolute rounding error over the stored log-masses.
    pub fn log_error(&self) -> f64 {
        self.log_error
    }

    /// Log-mass at `n`, or `None` outside the window.
    pub fn log_mass(&self, n: u64) -> Option<f64> {
        if n < self.offset {
            return None;
        }
        self.log_masses.get((n - self.offset) as usize).copied()
    }

    pub fn mass(&self, n: u64) -> Option<f64> {
        self.log_mass(n).map(f64::exp)
    }

    pub fn windowed_mass(&self) -> f64 {
        self.log_masses.iter().map(|l| l.exp()).sum()
    }

    /// `(n, log-mass)` pairs across the window.
    pub fn iter(&self) -> impl Iterator<Item = (u64, f64)> + '_ {
        self.log_masses.iter().enumerate().map(move |(i, &l)| (self.offset + i as u64, l))
    }
}

/// Single entry of `B(k, a) * pi_b` at `n`, summing all `min(k, n) + 1` terms.
pub(crate) fn convolution_entry(fin: &BinomialLaw, inf: &PoissonLaw, n: u64) -> LogValue {
    let top = fin.trials().min(n);
    let mut terms = Vec::with_capacity(top as usize + 1);
    let mut term_err = 0.0f64;
    for j in 0..=top {
        let b = fin.log_term(j as i64);
        let p = inf.log_term(n - j);
        let ln = b.ln + p.ln;
        if ln.is_finite() {
            term_err = term_err.max(b.err + p.err + EPS * ln.abs());
        }
        terms.push(ln);
    }
    let ln = log_sum_exp(&terms);
    LogValue::new(ln, log_sum_exp_error(term_err, terms.len(), ln))
}

/// The pmf of `B(k, a) * pi_b` on `0..=k + N`, where `N` is the Poisson window
/// for `deficit`.
pub fn convolve(fin: &BinomialLaw, inf: &PoissonLaw, deficit: f64) -> Result<CertifiedPmf> {
    let window = inf.window(deficit)?;
    let right = fin.trials() + window.right;
    let mut log_error = 0.0f64;
    let log_masses = (0..=right)
        .map(|n| {
            let entry = convolution_entry(fin, inf, n);
            log_error = log_error.max(entry.err);
            entry.ln
        })
        .collect();
    Ok(CertifiedPmf::new(0, log_masses, window.tail_bound, log_error))
}
