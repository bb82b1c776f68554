//! Transition kernel of the M/M/inf queue through its binomial-Poisson
//! decomposition, the semigroup action on bounded observables, the generator,
//! and the detailed-balance defect.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::distributions::{convolution_entry, convolve, BinomialLaw, CertifiedPmf, LogValue, PoissonLaw};
use crate::error::{domain, Error, Result};
use crate::numeric::{relative_from_log_error, EPS};

/// Arrival rate `lambda` and per-customer service rate `mu`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueueParams {
    lambda: f64,
    mu: f64,
}

impl QueueParams {
    pub fn new(lambda: f64, mu: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) || !(mu > 0.0 && mu.is_finite()) {
            return Err(domain(format!("rates must be positive and finite, got lambda={lambda}, mu={mu}")));
        }
        Ok(Self { lambda, mu })
    }

    /// Parameters with traffic intensity `rho` and service rate `mu`.
    pub fn from_rho(rho: f64, mu: f64) -> Result<Self> {
        Self::new(rho * mu, mu)
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn rho(&self) -> f64 {
        self.lambda / self.mu
    }

    /// Survival probability of an initial customer, `e^{-mu t}`.
    pub fn p(&self, t: f64) -> f64 {
        (-self.mu * t).exp()
    }

    /// `1 - p(t)`, evaluated without cancellation.
    pub fn q(&self, t: f64) -> f64 {
        -(-self.mu * t).exp_m1()
    }

    /// Time at which `p(t) = p`.
    pub fn time_for_p(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p <= 1.0) {
            return Err(domain(format!("p must lie in (0, 1], got {p}")));
        }
        Ok(-p.ln() / self.mu)
    }

    /// The two independent parts of `X_t` given `X_0 = k`: surviving initial
    /// customers `B(k, p_t)` and fresh arrivals still in service `pi_{rho q_t}`.
    pub fn mehler_parts(&self, t: f64, k: u64) -> Result<(BinomialLaw, PoissonLaw)> {
        check_time(t)?;
        let fin = BinomialLaw::with_complement(k, self.p(t), self.q(t))?;
        let inf = PoissonLaw::new(self.rho() * self.q(t))?;
        Ok((fin, inf))
    }
}

fn check_time(t: f64) -> Result<()> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(domain(format!("time must be finite and >= 0, got {t}")));
    }
    Ok(())
}

fn check_positive_time(t: f64) -> Result<()> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(domain(format!("time must be finite and > 0, got {t}")));
    }
    Ok(())
}

/// Law of `X_t` given `X_0 = k`.
#[derive(Debug, Clone)]
pub struct KernelRow {
    pub k: u64,
    pub t: f64,
    pub pmf: CertifiedPmf,
    /// Set for `t = 0`, where the row is the Dirac mass at `k`.
    pub degenerate: bool,
    parts: (BinomialLaw, PoissonLaw),
}

impl KernelRow {
    /// `ln G_k(n)`; entries past the stored window are evaluated directly.
    pub fn log_entry(&self, n: u64) -> LogValue {
        match self.pmf.log_mass(n) {
            Some(ln) => LogValue::new(ln, self.pmf.log_error()),
            None => convolution_entry(&self.parts.0, &self.parts.1, n),
        }
    }
}

/// Row `k` of the time-`t` kernel as `B(k, p_t) * pi_{rho q_t}`.
pub fn mehler_row(params: &QueueParams, t: f64, k: u64, deficit: f64) -> Result<KernelRow> {
    check_time(t)?;
    let parts = params.mehler_parts(t, k)?;
    if t == 0.0 {
        let mut log_masses = vec![f64::NEG_INFINITY; k as usize + 1];
        log_masses[k as usize] = 0.0;
        return Ok(KernelRow {
            k,
            t,
            pmf: CertifiedPmf::new(0, log_masses, 0.0, 0.0),
            degenerate: true,
            parts,
        });
    }
    let pmf = convolve(&parts.0, &parts.1, deficit)?;
    Ok(KernelRow { k, t, pmf, degenerate: false, parts })
}

/// `ln G_k(n) = ln P(X_t = n | X_0 = k)` from the `min(k, n) + 1`-term sum.
pub fn kernel_entry(params: &QueueParams, t: f64, k: u64, n: u64) -> Result<LogValue> {
    check_positive_time(t)?;
    let (fin, inf) = params.mehler_parts(t, k)?;
    Ok(convolution_entry(&fin, &inf, n))
}

type Callable = Arc<dyn Fn(u64) -> f64 + Send + Sync>;

/// A bounded non-negative function on the non-negative integers.
#[derive(Clone)]
pub enum Observable {
    /// Finite support; absent points are zero.
    Table(BTreeMap<u64, f64>),
    /// Arbitrary function with a declared supremum.
    Callable { func: Callable, sup: f64 },
}

impl fmt::Debug for Observable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Observable::Table(t) => f.debug_tuple("Table").field(t).finish(),
            Observable::Callable { sup, .. } => f.debug_struct("Callable").field("sup", sup).finish(),
        }
    }
}

/// Points probed when validating a callable observable.
const CALLABLE_SAMPLES: u64 = 1024;

impl Observable {
    pub fn table(values: impl IntoIterator<Item = (u64, f64)>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (n, v) in values {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::Observable(format!("value at {n} must be finite and >= 0, got {v}")));
            }
            if v > 0.0 {
                map.insert(n, v);
            }
        }
        if map.is_empty() {
            return Err(Error::Observable("observable is identically zero".into()));
        }
        Ok(Observable::Table(map))
    }

    /// Indicator of `lo..=hi`.
    pub fn indicator(lo: u64, hi: u64) -> Result<Self> {
        if lo > hi {
            return Err(Error::Observable(format!("empty indicator range {lo}..={hi}")));
        }
        Self::table((lo..=hi).map(|n| (n, 1.0)))
    }

    /// A callable observable; `sup` must dominate every value. The first
    /// points are sampled to check this, the rest is trusted.
    pub fn callable(func: impl Fn(u64) -> f64 + Send + Sync + 'static, sup: f64) -> Result<Self> {
        if !(sup > 0.0) || !sup.is_finite() {
            return Err(Error::Observable(format!("declared supremum must be finite and > 0, got {sup}")));
        }
        let mut nonzero = false;
        for n in 0..CALLABLE_SAMPLES {
            let v = func(n);
            if !(v >= 0.0) || v > sup {
                return Err(Error::Observable(format!("value {v} at {n} outside [0, {sup}]")));
            }
            nonzero |= v > 0.0;
        }
        if !nonzero {
            return Err(Error::Observable("observable vanishes on all sampled points".into()));
        }
        Ok(Observable::Callable { func: Arc::new(func), sup })
    }

    pub fn constant(c: f64) -> Result<Self> {
        Self::callable(move |_| c, c)
    }

    pub fn eval(&self, n: u64) -> f64 {
        match self {
            Observable::Table(t) => t.get(&n).copied().unwrap_or(0.0),
            Observable::Callable { func, .. } => func(n),
        }
    }

    pub fn sup(&self) -> f64 {
        match self {
            Observable::Table(t) => t.values().copied().fold(0.0, f64::max),
            Observable::Callable { sup, .. } => *sup,
        }
    }

    /// Largest supported point for tables.
    pub fn max_support(&self) -> Option<u64> {
        match self {
            Observable::Table(t) => t.keys().next_back().copied(),
            Observable::Callable { .. } => None,
        }
    }
}

/// A non-negative quantity with an absolute error bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub err: f64,
}

/// `A_t f(k) = sum_n f(n) G_k(n)`.
///
/// Tables are summed over their support exactly, so only rounding enters the
/// bound. Callables are summed over the certified window of row `k` and pick
/// up `sup_f * tail_deficit` for the discarded mass.
pub fn semigroup_apply(
    params: &QueueParams,
    t: f64,
    f: &Observable,
    k: u64,
    deficit: f64,
) -> Result<Estimate> {
    check_positive_time(t)?;
    let (fin, inf) = params.mehler_parts(t, k)?;
    match f {
        Observable::Table(table) => {
            let mut value = 0.0;
            let mut rounding = 0.0;
            for (&n, &v) in table {
                let entry = convolution_entry(&fin, &inf, n);
                let g = entry.value();
                value += v * g;
                rounding += v * g * (relative_from_log_error(entry.err) + 2.0 * EPS);
            }
            let err = rounding + value * table.len() as f64 * EPS;
            Ok(Estimate { value, err })
        }
        Observable::Callable { func, sup } => {
            let window = inf.window(deficit)?;
            let right = k + window.right;
            let mut value = 0.0;
            let mut rounding = 0.0;
            for n in 0..=right {
                let entry = convolution_entry(&fin, &inf, n);
                let g = entry.value();
                let v = func(n);
                value += v * g;
                rounding += v * g * (relative_from_log_error(entry.err) + 2.0 * EPS);
            }
            let err = rounding + value * (right + 1) as f64 * EPS + sup * window.tail_bound;
            Ok(Estimate { value, err })
        }
    }
}

/// `M f(n) = lambda [f(n+1) - f(n)] + n mu [f(n-1) - f(n)]` with `f(-1) = f(0)`.
pub fn generator_apply(params: &QueueParams, f: &Observable, n: u64) -> f64 {
    let here = f.eval(n);
    let up = f.eval(n + 1);
    let down = if n == 0 { here } else { f.eval(n - 1) };
    params.lambda() * (up - here) + n as f64 * params.mu() * (down - here)
}

/// Detailed-balance defect `|G_j(i) pi(j) - G_i(j) pi(i)|` with its rounding budget.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReversibilityDefect {
    pub defect: f64,
    pub budget: f64,
}

pub fn reversibility_defect(params: &QueueParams, t: f64, i: u64, j: u64) -> Result<ReversibilityDefect> {
    check_positive_time(t)?;
    if i == j {
        return Ok(ReversibilityDefect { defect: 0.0, budget: 0.0 });
    }
    let stationary = PoissonLaw::new(params.rho())?;
    let side = |from: u64, to: u64| -> Result<(f64, f64)> {
        let g = kernel_entry(params, t, from, to)?;
        let pi = stationary.log_term(from);
        let ln = g.ln + pi.ln;
        let err = g.err + pi.err + EPS * ln.abs();
        let v = ln.exp();
        Ok((v, v * (relative_from_log_error(err) + EPS)))
    };
    let (left, left_err) = side(j, i)?;
    let (right, right_err) = side(i, j)?;
    Ok(ReversibilityDefect {
        defect: (left - right).abs(),
        budget: left_err + right_err + EPS * left.max(right),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::poisson_log_pmf;

    fn params(rho: f64) -> QueueParams {
        QueueParams::from_rho(rho, 1.0).unwrap()
    }

    #[test]
    fn params_validation_and_accessors() {
        assert!(QueueParams::new(0.0, 1.0).is_err());
        assert!(QueueParams::new(1.0, -1.0).is_err());
        let q = QueueParams::new(3.0, 1.5).unwrap();
        assert_eq!(q.rho(), 2.0);
        assert_eq!(q.p(0.0), 1.0);
        assert_eq!(q.q(0.0), 0.0);
        let t = q.time_for_p(0.25).unwrap();
        assert!((q.p(t) - 0.25).abs() < 1e-15);
        assert!((q.q(1e-9) - (1.5e-9 - 1.125e-18)).abs() < 1e-24);
    }

    #[test]
    fn row_zero_is_poisson() {
        let prm = params(2.5);
        let t = 0.7;
        let row = mehler_row(&prm, t, 0, 1e-12).unwrap();
        let rate = prm.rho() * prm.q(t);
        for (n, l) in row.pmf.iter() {
            assert_eq!(l, poisson_log_pmf(rate, n).unwrap());
        }
    }

    #[test]
    fn g1_closed_form() {
        // rho = 1, p = 1/2: G_1(1) = p pi_b(0) + (1-p) pi_b(1) = (1/2 + 1/4) e^{-1/2}
        let prm = params(1.0);
        let t = prm.time_for_p(0.5).unwrap();
        let row = mehler_row(&prm, t, 1, 1e-12).unwrap();
        let expected = 0.75 * (-0.5f64).exp();
        assert!((row.pmf.mass(1).unwrap() - expected).abs() / expected < 1e-14);
    }

    #[test]
    fn row_sums_to_one() {
        let prm = params(2.0);
        let t = std::f64::consts::LN_2;
        let deficit = 1e-12;
        let row = mehler_row(&prm, t, 3, deficit).unwrap();
        let m = row.pmf.windowed_mass();
        assert!(m >= 1.0 - deficit - 1e-15 && m <= 1.0 + row.pmf.len() as f64 * EPS);
        assert!(row.pmf.iter().all(|(_, l)| l.is_finite()));
    }

    #[test]
    fn time_zero_row_is_dirac() {
        let row = mehler_row(&params(1.0), 0.0, 4, 1e-12).unwrap();
        assert!(row.degenerate);
        assert_eq!(row.pmf.mass(4), Some(1.0));
        assert_eq!(row.pmf.mass(3), Some(0.0));
        assert!(mehler_row(&params(1.0), -1.0, 4, 1e-12).is_err());
    }

    #[test]
    fn entry_base_cases() {
        let prm = params(1.7);
        let t = 0.4;
        let (p, b) = (prm.p(t), prm.rho() * prm.q(t));
        for n in 0..40u64 {
            let g0 = kernel_entry(&prm, t, 0, n).unwrap();
            assert_eq!(g0.ln, poisson_log_pmf(b, n).unwrap());
            let g1 = kernel_entry(&prm, t, 1, n).unwrap();
            let closed = ((1.0 - p) + p * n as f64 / b).ln() + poisson_log_pmf(b, n).unwrap();
            assert!((g1.ln.exp() / closed.exp() - 1.0).abs() < 1e-12, "n={n}");
        }
    }

    #[test]
    fn entry_rejects_nonpositive_time() {
        assert!(kernel_entry(&params(1.0), 0.0, 1, 1).is_err());
    }

    #[test]
    fn row_extends_past_window() {
        let prm = params(1.0);
        let row = mehler_row(&prm, 1.0, 2, 1e-3).unwrap();
        let far = row.pmf.end() + 5;
        let direct = kernel_entry(&prm, 1.0, 2, far).unwrap();
        assert_eq!(row.log_entry(far).ln, direct.ln);
    }

    #[test]
    fn semigroup_examples() {
        let prm = params(1.0);
        let t = 0.9;
        let one = Observable::constant(1.0).unwrap();
        for k in [0u64, 3, 10] {
            let e = semigroup_apply(&prm, t, &one, k, 1e-12).unwrap();
            assert!((e.value - 1.0).abs() <= e.err + 1e-15, "k={k} {e:?}");
            assert!(e.err < 1e-11);
        }
        let delta0 = Observable::indicator(0, 0).unwrap();
        let e = semigroup_apply(&prm, t, &delta0, 0, 1e-12).unwrap();
        let expected = (-prm.rho() * prm.q(t)).exp();
        assert!((e.value - expected).abs() < 1e-15);

        let identity = Observable::table((0..200).map(|n| (n, n as f64))).unwrap();
        for k in [0u64, 2, 7] {
            let e = semigroup_apply(&prm, t, &identity, k, 1e-14).unwrap();
            let mean = k as f64 * prm.p(t) + prm.rho() * prm.q(t);
            assert!((e.value - mean).abs() < 1e-12, "k={k}");
        }
    }

    #[test]
    fn observable_validation() {
        assert!(Observable::table([(0, 0.0)]).is_err());
        assert!(Observable::table([(0, -1.0)]).is_err());
        assert!(Observable::indicator(3, 2).is_err());
        assert!(Observable::callable(|n| n as f64, 10.0).is_err());
        assert!(Observable::callable(|_| 0.0, 1.0).is_err());
        let f = Observable::table([(2, 3.0), (5, 1.0)]).unwrap();
        assert_eq!(f.eval(2), 3.0);
        assert_eq!(f.eval(3), 0.0);
        assert_eq!(f.sup(), 3.0);
        assert_eq!(f.max_support(), Some(5));
    }

    #[test]
    fn generator_examples() {
        let prm = QueueParams::new(2.0, 0.5).unwrap();
        let c = Observable::constant(4.0).unwrap();
        let id = Observable::callable(|n| n as f64 / 1e6, 1.0).unwrap();
        let f = Observable::table([(0, 1.0), (1, 4.0), (2, 2.0)]).unwrap();
        for n in 0..10 {
            assert_eq!(generator_apply(&prm, &c, n), 0.0);
            let expected = (2.0 - n as f64 * 0.5) / 1e6;
            assert!((generator_apply(&prm, &id, n) - expected).abs() < 1e-18);
        }
        assert_eq!(generator_apply(&prm, &f, 0), 2.0 * 3.0);
        assert_eq!(generator_apply(&prm, &f, 1), 2.0 * -2.0 + 0.5 * -3.0);
    }

    #[test]
    fn reversibility_examples() {
        let prm = params(1.0);
        let t = prm.time_for_p(0.5).unwrap();
        assert_eq!(reversibility_defect(&prm, t, 3, 3).unwrap().defect, 0.0);
        let d = reversibility_defect(&prm, t, 0, 1).unwrap();
        assert!(d.defect <= 1e-13 && d.defect <= d.budget, "{d:?}");
        let prm = params(3.0);
        let t = prm.time_for_p(0.9).unwrap();
        let d = reversibility_defect(&prm, t, 2, 5).unwrap();
        assert!(d.defect <= d.budget, "{d:?}");
    }
}
