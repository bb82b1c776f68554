//! Semi-log-convexity constants and grid verification of the three
//! inequalities: the bound on `Delta_d log A_t f`, semi-ultra-log-convexity of
//! the kernel rows, and its binomial-Poisson generalization.
//!
//! Every check is a log-domain margin `lhs - rhs` compared against an additive
//! error budget assembled from the rounding bounds of its inputs.

use std::fmt;

use crate::distributions::{convolution_entry, BinomialLaw, LogValue, PoissonLaw};
use crate::error::{domain, Error, Result};
use crate::kernel::{mehler_row, semigroup_apply, Estimate, Observable, QueueParams};
use crate::numeric::{EPS, LN_12, TERM_ULPS};

/// Entries with mass below `1e-280` are reported untestable.
pub const UNTESTABLE_MASS: f64 = 1e-280;

fn ln_floor() -> f64 {
    UNTESTABLE_MASS.ln()
}

/// `ln(1 - a^2 / (u + a)^2)` rewritten as `ln u + ln(u + 2a) - 2 ln(u + a)`,
/// which stays accurate when the ratio is close to 1.
fn log_one_minus_ratio(u: f64, a: f64) -> LogValue {
    if u == 0.0 {
        return LogValue::new(f64::NEG_INFINITY, 0.0);
    }
    let (l1, l2, l3) = (u.ln(), (u + 2.0 * a).ln(), (u + a).ln());
    let ln = l1 + l2 - 2.0 * l3;
    LogValue::new(ln, TERM_ULPS * EPS * (1.0 + l1.abs() + l2.abs() + 2.0 * l3.abs()))
}

fn check_rho(rho: f64) -> Result<()> {
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(domain(format!("rho must be positive and finite, got {rho}")));
    }
    Ok(())
}

fn check_unit(name: &str, x: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&x) {
        return Err(domain(format!("{name} must lie in [0, 1], got {x}")));
    }
    Ok(())
}

fn check_n(n: u64) -> Result<()> {
    if n == 0 {
        return Err(domain("n must be a positive integer"));
    }
    Ok(())
}

fn ln_ratio(n: u64) -> f64 {
    ((n + 1) as f64 / n as f64).ln()
}

/// `log(1 - p^2 / [p + rho (1-p)^2]^2)`.
pub fn sharp_bound(rho: f64, p: f64) -> Result<f64> {
    check_rho(rho)?;
    check_unit("p", p)?;
    let q = 1.0 - p;
    Ok(log_one_minus_ratio(rho * q * q, p).ln)
}

/// The same bound at time `t`, using the cancellation-free `q_t`.
pub fn sharp_bound_at(params: &QueueParams, t: f64) -> LogValue {
    let q = params.q(t);
    log_one_minus_ratio(params.rho() * q * q, params.p(t))
}

/// The earlier bound carrying the extra factor `1/12`.
pub fn glmrs_bound(rho: f64, p: f64) -> Result<f64> {
    Ok(sharp_bound(rho, p)? - LN_12)
}

/// `K = ((n+1)/n) / (1 - p^2/[rho(1-p)^2 + p]^2)`; `+inf` at `p = 1`.
pub fn lemma_k(rho: f64, p: f64, n: u64) -> Result<f64> {
    check_rho(rho)?;
    check_unit("p", p)?;
    check_n(n)?;
    Ok((ln_ratio(n) - sharp_bound(rho, p)?).exp())
}

/// `M = ((n+1)/n) / (1 - a^2/[(1-a) b + a]^2)`; `+inf` when `(1-a) b = 0`.
pub fn remark_m(a: f64, b: f64, n: u64) -> Result<f64> {
    Ok(ln_remark_m(a, b, n)?.ln.exp())
}

fn ln_remark_m(a: f64, b: f64, n: u64) -> Result<LogValue> {
    check_unit("a", a)?;
    if !(b >= 0.0) || !b.is_finite() {
        return Err(domain(format!("b must be finite and >= 0, got {b}")));
    }
    check_n(n)?;
    if (1.0 - a) * b + a == 0.0 {
        return Err(Error::Degenerate("(1-a) b + a = 0 (a = 0 and b = 0)".into()));
    }
    let inner = log_one_minus_ratio((1.0 - a) * b, a);
    Ok(LogValue::new(ln_ratio(n) - inner.ln, inner.err + 2.0 * EPS))
}

fn ln_lemma_k_at(params: &QueueParams, t: f64, n: u64) -> LogValue {
    let inner = sharp_bound_at(params, t);
    LogValue::new(ln_ratio(n) - inner.ln, inner.err + 2.0 * EPS)
}

/// `log h(n+1) + log h(n-1) - 2 log h(n)`.
pub fn log_laplacian(h_minus: f64, h: f64, h_plus: f64) -> Result<f64> {
    if !(h_minus > 0.0 && h > 0.0 && h_plus > 0.0) {
        return Err(domain(format!(
            "log-Laplacian needs positive values, got ({h_minus}, {h}, {h_plus})"
        )));
    }
    Ok(log_laplacian_ln(h_minus.ln(), h.ln(), h_plus.ln()))
}

/// [`log_laplacian`] from log-domain inputs.
pub fn log_laplacian_ln(l_minus: f64, l: f64, l_plus: f64) -> f64 {
    l_plus + l_minus - 2.0 * l
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CaseStatus {
    Pass,
    Fail,
    /// Inputs too small to resolve at double precision.
    Untestable,
}

impl fmt::Display for CaseStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CaseStatus::Pass => "pass",
            CaseStatus::Fail => "fail",
            CaseStatus::Untestable => "untestable",
        })
    }
}

/// Identifiers of one verification case. Unused fields stay `None`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CaseId {
    pub rho: Option<f64>,
    pub p: Option<f64>,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub k: Option<u64>,
    pub n: u64,
    pub observable: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaseResult {
    pub id: CaseId,
    pub margin: f64,
    pub budget: f64,
    pub status: CaseStatus,
}

impl CaseResult {
    fn judge(id: CaseId, margin: f64, budget: f64) -> Self {
        let status = if margin.is_nan() || budget.is_nan() {
            CaseStatus::Untestable
        } else if margin >= -budget {
            CaseStatus::Pass
        } else {
            CaseStatus::Fail
        };
        Self { id, margin, budget, status }
    }

    fn untestable(id: CaseId) -> Self {
        Self { id, margin: f64::NAN, budget: f64::NAN, status: CaseStatus::Untestable }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
}

/// Per-case margins for one inequality. Reports merge by concatenation; the
/// worst case is the minimum margin over testable cases.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct VerificationReport {
    pub grid: String,
    pub cases: Vec<CaseResult>,
}

impl VerificationReport {
    pub fn new(grid: impl Into<String>) -> Self {
        Self { grid: grid.into(), cases: Vec::new() }
    }

    /// Pass iff every testable margin is at least `-budget`.
    pub fn verdict(&self) -> Verdict {
        if self.cases.iter().any(|c| c.status == CaseStatus::Fail) {
            Verdict::Fail
        } else {
            Verdict::Pass
        }
    }

    pub fn passed(&self) -> bool {
        self.verdict() == Verdict::Pass
    }

    pub fn worst_case(&self) -> Option<&CaseResult> {
        self.cases
            .iter()
            .filter(|c| c.status != CaseStatus::Untestable)
            .min_by(|x, y| x.margin.total_cmp(&y.margin))
    }

    pub fn count(&self, status: CaseStatus) -> usize {
        self.cases.iter().filter(|c| c.status == status).count()
    }

    /// Largest error budget among testable cases.
    pub fn error_budget(&self) -> f64 {
        self.cases
            .iter()
            .filter(|c| c.status != CaseStatus::Untestable)
            .map(|c| c.budget)
            .fold(0.0, f64::max)
    }

    pub fn merge(mut self, other: VerificationReport) -> Self {
        if self.grid.is_empty() {
            self.grid = other.grid;
        } else if !other.grid.is_empty() && other.grid != self.grid {
            self.grid = format!("{}; {}", self.grid, other.grid);
        }
        self.cases.extend(other.cases);
        self
    }

    pub fn with_observable_label(mut self, label: &str) -> Self {
        for c in &mut self.cases {
            c.id.observable = Some(label.to_owned());
        }
        self
    }
}

/// Margin of `h(n)^2 <= C h(n+1) h(n-1)` in log form, or `None` when an
/// entry is below the testable floor.
fn ultra_margin(lower: LogValue, mid: LogValue, upper: LogValue, ln_const: LogValue) -> Option<(f64, f64)> {
    let floor = ln_floor();
    if lower.ln < floor || mid.ln < floor || upper.ln < floor {
        return None;
    }
    if ln_const.ln == f64::INFINITY {
        return Some((f64::INFINITY, 0.0));
    }
    let margin = ln_const.ln + log_laplacian_ln(lower.ln, mid.ln, upper.ln);
    let budget = ln_const.err
        + lower.err
        + upper.err
        + 2.0 * mid.err
        + 4.0 * EPS * (ln_const.ln.abs() + lower.ln.abs() + upper.ln.abs() + 2.0 * mid.ln.abs());
    Some((margin, budget))
}

/// Checks `G_k(n)^2 <= K G_k(n+1) G_k(n-1)` for `k <= k_max`, `1 <= n <= n_max`.
pub fn verify_kernel_lemma(
    params: &QueueParams,
    t: f64,
    k_max: u64,
    n_max: u64,
    deficit: f64,
) -> Result<VerificationReport> {
    if !(t > 0.0) {
        return Err(domain(format!("time must be > 0, got {t}")));
    }
    let (rho, p) = (params.rho(), params.p(t));
    let mut report = VerificationReport::new(format!(
        "lemma rho={rho} p={p} k<={k_max} n<={n_max}"
    ));
    for k in 0..=k_max {
        let row = mehler_row(params, t, k, deficit)?;
        for n in 1..=n_max {
            let id = CaseId { rho: Some(rho), p: Some(p), k: Some(k), n, ..Default::default() };
            let ln_k = ln_lemma_k_at(params, t, n);
            report.cases.push(
                match ultra_margin(row.log_entry(n - 1), row.log_entry(n), row.log_entry(n + 1), ln_k) {
                    Some((m, b)) => CaseResult::judge(id, m, b),
                    None => CaseResult::untestable(id),
                },
            );
        }
    }
    Ok(report)
}

/// Checks `H_k(n)^2 <= M H_k(n+1) H_k(n-1)` for `H_k = B(k, a) * pi_b`.
pub fn verify_generalized(a: f64, b: f64, k_max: u64, n_max: u64, deficit: f64) -> Result<VerificationReport> {
    // Validates (a, b) and rejects the degenerate pair up front.
    ln_remark_m(a, b, 1)?;
    if !(deficit > 0.0 && deficit < 1.0) {
        return Err(domain(format!("deficit must lie in (0, 1), got {deficit}")));
    }
    let inf = PoissonLaw::new(b)?;
    let mut report = VerificationReport::new(format!("generalized a={a} b={b} k<={k_max} n<={n_max}"));
    for k in 0..=k_max {
        let fin = BinomialLaw::new(k, a)?;
        let entry = |n: u64| convolution_entry(&fin, &inf, n);
        for n in 1..=n_max {
            let id = CaseId { a: Some(a), b: Some(b), k: Some(k), n, ..Default::default() };
            let ln_m = ln_remark_m(a, b, n)?;
            report.cases.push(match ultra_margin(entry(n - 1), entry(n), entry(n + 1), ln_m) {
                Some((m, bud)) => CaseResult::judge(id, m, bud),
                None => CaseResult::untestable(id),
            });
        }
    }
    Ok(report)
}

/// Which lower bound on `Delta_d log A_t f` to test against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TheoremBound {
    /// `log(1 - p^2/[p + rho(1-p)^2]^2)`.
    Sharp,
    /// The same with the extra factor `1/12`.
    Glmrs,
}

fn bound_at(bound: TheoremBound, params: &QueueParams, t: f64) -> LogValue {
    let sharp = sharp_bound_at(params, t);
    match bound {
        TheoremBound::Sharp => sharp,
        TheoremBound::Glmrs => LogValue::new(sharp.ln - LN_12, sharp.err + EPS * (sharp.ln.abs() + LN_12)),
    }
}

/// `ln` of an estimate plus the absolute error of that logarithm, or `None`
/// when the estimate cannot be separated from zero.
fn log_estimate(e: Estimate) -> Option<LogValue> {
    if !(e.value > e.err) || e.value < UNTESTABLE_MASS {
        return None;
    }
    let ln = e.value.ln();
    Some(LogValue::new(ln, -(-e.err / e.value).ln_1p() + EPS * ln.abs()))
}

/// Evaluates `A_t f` at `0..=n_max + 1`.
fn semigroup_values(
    params: &QueueParams,
    t: f64,
    f: &Observable,
    n_max: u64,
    deficit: f64,
) -> Result<Vec<Estimate>> {
    (0..=n_max + 1).map(|k| semigroup_apply(params, t, f, k, deficit)).collect()
}

fn laplacian_of_estimates(lower: Estimate, mid: Estimate, upper: Estimate) -> Option<LogValue> {
    let (l, m, u) = (log_estimate(lower)?, log_estimate(mid)?, log_estimate(upper)?);
    let ln = log_laplacian_ln(l.ln, m.ln, u.ln);
    Some(LogValue::new(ln, l.err + u.err + 2.0 * m.err + 4.0 * EPS * (l.ln.abs() + u.ln.abs() + 2.0 * m.ln.abs())))
}

/// Checks `Delta_d log A_t f(n) >= sharp bound` for `1 <= n <= n_max`.
pub fn verify_theorem(
    params: &QueueParams,
    t: f64,
    f: &Observable,
    n_max: u64,
    deficit: f64,
) -> Result<VerificationReport> {
    verify_theorem_with(TheoremBound::Sharp, params, t, f, n_max, deficit)
}

pub fn verify_theorem_with(
    bound: TheoremBound,
    params: &QueueParams,
    t: f64,
    f: &Observable,
    n_max: u64,
    deficit: f64,
) -> Result<VerificationReport> {
    if !(t > 0.0) {
        return Err(domain(format!("time must be > 0, got {t}")));
    }
    let values = semigroup_values(params, t, f, n_max, deficit)?;
    let rhs = bound_at(bound, params, t);
    let (rho, p) = (params.rho(), params.p(t));
    let mut report = VerificationReport::new(format!("theorem {bound:?} rho={rho} p={p} n<={n_max}"));
    for n in 1..=n_max {
        let i = n as usize;
        let id = CaseId { rho: Some(rho), p: Some(p), n, ..Default::default() };
        report.cases.push(match laplacian_of_estimates(values[i - 1], values[i], values[i + 1]) {
            Some(lap) => {
                let margin = lap.ln - rhs.ln;
                CaseResult::judge(id, margin, lap.err + rhs.err + EPS * margin.abs())
            }
            None => CaseResult::untestable(id),
        });
    }
    Ok(report)
}

/// One time point of [`sharpness_decay`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SharpnessPoint {
    pub t: f64,
    /// `|Delta_d log A_t f(n)|`.
    pub laplacian: f64,
    /// `|sharp bound|` at `p_t`.
    pub bound: f64,
}

/// Both sides of the theorem at `n` along an increasing time sequence.
pub fn sharpness_decay(
    params: &QueueParams,
    f: &Observable,
    n: u64,
    times: &[f64],
    deficit: f64,
) -> Result<Vec<SharpnessPoint>> {
    check_n(n)?;
    if times.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(domain("time sequence must be strictly increasing"));
    }
    times
        .iter()
        .map(|&t| {
            if !(t > 0.0) {
                return Err(domain(format!("time must be > 0, got {t}")));
            }
            let at = |k: u64| semigroup_apply(params, t, f, k, deficit);
            let lap = laplacian_of_estimates(at(n - 1)?, at(n)?, at(n + 1)?)
                .ok_or_else(|| domain(format!("A_t f vanishes near n={n} at t={t}")))?;
            Ok(SharpnessPoint { t, laplacian: lap.ln.abs(), bound: sharp_bound_at(params, t).ln.abs() })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn sharp_bound_examples() {
        assert_eq!(sharp_bound(3.0, 0.0).unwrap(), 0.0);
        assert_eq!(sharp_bound(3.0, 1.0).unwrap(), f64::NEG_INFINITY);
        assert!(close(sharp_bound(1.0, 0.5).unwrap(), (5.0f64 / 9.0).ln(), 1e-15));
        assert!(sharp_bound(0.0, 0.5).is_err());
        assert!(sharp_bound(1.0, 1.5).is_err());
    }

    #[test]
    fn glmrs_examples() {
        assert!(close(glmrs_bound(2.0, 0.0).unwrap(), -(12f64.ln()), 1e-15));
        assert!(close(glmrs_bound(1.0, 0.5).unwrap(), (5.0f64 / 9.0).ln() - 12f64.ln(), 1e-15));
        for rho in [0.25, 1.0, 7.0] {
            for p in [0.0, 0.3, 0.99] {
                let d = sharp_bound(rho, p).unwrap() - glmrs_bound(rho, p).unwrap();
                assert!(close(d, LN_12, 4.0 * EPS));
            }
        }
    }

    #[test]
    fn lemma_k_examples() {
        assert!(close(lemma_k(1.0, 0.0, 1).unwrap(), 2.0, 1e-15));
        for n in 1..20u64 {
            assert!(close(lemma_k(4.2, 0.0, n).unwrap(), (n + 1) as f64 / n as f64, 1e-15));
        }
        assert!(close(lemma_k(1.0, 0.5, 2).unwrap(), 2.7, 1e-14));
        assert_eq!(lemma_k(1.0, 1.0, 2).unwrap(), f64::INFINITY);
        assert!(lemma_k(1.0, 0.5, 0).is_err());
    }

    #[test]
    fn k_exceeds_ultra_constant() {
        for rho in [0.3, 1.0, 9.0] {
            for p in [0.01, 0.5, 0.95] {
                for n in 1..10 {
                    assert!(lemma_k(rho, p, n).unwrap() > (n + 1) as f64 / n as f64);
                }
            }
        }
    }

    #[test]
    fn remark_m_examples() {
        for n in 1..10u64 {
            assert!(close(remark_m(0.0, 2.0, n).unwrap(), (n + 1) as f64 / n as f64, 1e-15));
            let reduced = remark_m(0.5, 0.5, n).unwrap();
            assert!(close(reduced, lemma_k(1.0, 0.5, n).unwrap(), 1e-14));
        }
        // a = 3/10, b = 2: D = 17/10, 1 - 9/289 = 280/289, M = 2 * 289/280
        assert!(close(remark_m(0.3, 2.0, 1).unwrap(), 578.0 / 280.0, 1e-14));
        assert!(matches!(remark_m(0.0, 0.0, 1), Err(Error::Degenerate(_))));
        assert_eq!(remark_m(0.4, 0.0, 3).unwrap(), f64::INFINITY);
        assert!(remark_m(0.4, -1.0, 3).is_err());
    }

    #[test]
    fn log_laplacian_examples() {
        assert_eq!(log_laplacian(2.0, 2.0, 2.0).unwrap(), 0.0);
        assert!(close(log_laplacian(3.0, 6.0, 12.0).unwrap(), 0.0, 1e-15));
        assert!(close(log_laplacian(1.0, 2.0, 5.0).unwrap(), (5.0f64 / 4.0).ln(), 1e-15));
        assert!(log_laplacian(1.0, 0.0, 5.0).is_err());
        assert!(log_laplacian(-1.0, 1.0, 5.0).is_err());
    }

    #[test]
    fn theorem_constant_observable() {
        let prm = QueueParams::from_rho(1.5, 1.0).unwrap();
        let f = Observable::constant(1.0).unwrap();
        let report = verify_theorem(&prm, 0.8, &f, 10, 1e-14).unwrap();
        assert!(report.passed());
        let sharp = sharp_bound_at(&prm, 0.8).ln;
        for c in &report.cases {
            assert!(close(c.margin, -sharp, 1e-12), "{c:?}");
        }
    }

    #[test]
    fn theorem_indicator_zero() {
        let prm = QueueParams::from_rho(1.0, 1.0).unwrap();
        let f = Observable::indicator(0, 0).unwrap();
        let report = verify_theorem(&prm, 1.0, &f, 20, 1e-14).unwrap();
        assert!(report.passed(), "{:?}", report.worst_case());
        assert_eq!(report.count(CaseStatus::Untestable), 0);
    }

    #[test]
    fn glmrs_offset_in_reports() {
        let prm = QueueParams::from_rho(2.0, 1.0).unwrap();
        let f = Observable::table([(1, 0.5), (4, 2.0), (6, 1.0)]).unwrap();
        let sharp = verify_theorem_with(TheoremBound::Sharp, &prm, 0.6, &f, 12, 1e-14).unwrap();
        let glmrs = verify_theorem_with(TheoremBound::Glmrs, &prm, 0.6, &f, 12, 1e-14).unwrap();
        for (s, g) in sharp.cases.iter().zip(&glmrs.cases) {
            assert!(close(g.margin - s.margin, LN_12, 1e-12));
        }
    }

    #[test]
    fn lemma_row_zero_margin_is_exact() {
        let prm = QueueParams::from_rho(2.0, 1.0).unwrap();
        let t = prm.time_for_p(0.3).unwrap();
        let report = verify_kernel_lemma(&prm, t, 0, 30, 1e-14).unwrap();
        let sharp = sharp_bound_at(&prm, t).ln;
        for c in &report.cases {
            // ln K + ln(n/(n+1)) = -sharp
            assert!(close(c.margin, -sharp, c.budget), "{c:?}");
        }
    }

    #[test]
    fn lemma_first_row_at_n_one() {
        let prm = QueueParams::from_rho(1.0, 1.0).unwrap();
        let t = prm.time_for_p(0.5).unwrap();
        let report = verify_kernel_lemma(&prm, t, 1, 1, 1e-14).unwrap();
        assert!(report.passed());
    }

    #[test]
    fn lemma_heavy_survival_grid() {
        let prm = QueueParams::from_rho(2.0, 1.0).unwrap();
        let t = prm.time_for_p(0.9).unwrap();
        let report = verify_kernel_lemma(&prm, t, 15, 30, 1e-14).unwrap();
        assert!(report.passed(), "{:?}", report.worst_case());
    }

    #[test]
    fn generalized_poisson_equality() {
        let report = verify_generalized(0.0, 1.5, 0, 40, 1e-14).unwrap();
        for c in &report.cases {
            assert!(c.margin.abs() <= c.budget, "{c:?}");
        }
    }

    #[test]
    fn generalized_reduces_to_lemma() {
        let prm = QueueParams::from_rho(1.0, 1.0).unwrap();
        let t = prm.time_for_p(0.5).unwrap();
        let lemma = verify_kernel_lemma(&prm, t, 10, 20, 1e-14).unwrap();
        let general = verify_generalized(0.5, 0.5, 10, 20, 1e-14).unwrap();
        for (l, g) in lemma.cases.iter().zip(&general.cases) {
            assert_eq!((l.id.k, l.id.n), (g.id.k, g.id.n));
            assert!(close(l.margin, g.margin, l.budget + g.budget), "{l:?} {g:?}");
        }
    }

    #[test]
    fn generalized_passing_point() {
        let report = verify_generalized(0.7, 3.0, 20, 40, 1e-14).unwrap();
        assert!(report.passed(), "{:?}", report.worst_case());
    }

    #[test]
    fn generalized_zero_b_is_untestable_past_support() {
        let report = verify_generalized(0.5, 0.0, 3, 6, 1e-14).unwrap();
        let c = report.cases.iter().find(|c| c.id.k == Some(3) && c.id.n == 2).unwrap();
        assert_eq!(c.margin, f64::INFINITY);
        let c = report.cases.iter().find(|c| c.id.k == Some(3) && c.id.n == 3).unwrap();
        assert_eq!(c.status, CaseStatus::Untestable);
        assert!(verify_generalized(0.0, 0.0, 3, 6, 1e-14).is_err());
    }

    #[test]
    fn report_merge_and_worst() {
        let mut a = VerificationReport::new("a");
        a.cases.push(CaseResult::judge(CaseId { n: 1, ..Default::default() }, 0.5, 0.0));
        let mut b = VerificationReport::new("b");
        b.cases.push(CaseResult::judge(CaseId { n: 2, ..Default::default() }, -1e-13, 1e-12));
        b.cases.push(CaseResult::untestable(CaseId { n: 3, ..Default::default() }));
        let merged = a.merge(b);
        assert!(merged.passed());
        assert_eq!(merged.worst_case().unwrap().id.n, 2);
        assert_eq!(merged.count(CaseStatus::Untestable), 1);
        let mut c = VerificationReport::new("c");
        c.cases.push(CaseResult::judge(CaseId { n: 4, ..Default::default() }, -1e-3, 1e-12));
        assert_eq!(merged.merge(c).verdict(), Verdict::Fail);
    }

    #[test]
    fn sharpness_constant_observable() {
        let prm = QueueParams::from_rho(1.0, 1.0).unwrap();
        let f = Observable::constant(1.0).unwrap();
        let pts = sharpness_decay(&prm, &f, 2, &[1.0, 2.0, 4.0], 1e-15).unwrap();
        for pt in pts {
            assert!(pt.laplacian < 1e-13);
            let p = prm.p(pt.t);
            // -ln(1 - x) lies in [x, x / (1 - x)]
            let x = p * p / (p + (1.0 - p) * (1.0 - p)).powi(2);
            assert!(pt.bound >= x * (1.0 - 1e-12) && pt.bound <= x / (1.0 - x) * (1.0 + 1e-12));
        }
        assert!(sharpness_decay(&prm, &f, 2, &[2.0, 1.0], 1e-15).is_err());
    }
}
