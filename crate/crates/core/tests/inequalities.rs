use mminf::bounds::{verify_theorem_with, CaseStatus, TheoremBound};
use mminf::oracle::exact::ExactConvolution;
use mminf::{sharp_bound, verify_generalized, verify_kernel_lemma, verify_theorem, Observable, QueueParams};
use num_rational::BigRational;

fn ratio(n: i64, d: i64) -> BigRational {
    BigRational::new(n.into(), d.into())
}

fn at(rho: f64, p: f64) -> (QueueParams, f64) {
    let params = QueueParams::from_rho(rho, 1.0).unwrap();
    let t = params.time_for_p(p).unwrap();
    (params, t)
}

// rho = 1/2, p = 1/10, k = 2, n = 1: the kernel row is not semi-ultra-log-convex
// with the constant K, in exact arithmetic.
#[test]
fn pinned_lemma_counterexample() {
    let a = ratio(1, 10);
    let b = ratio(1, 2) * ratio(9, 10);
    let cmp = ExactConvolution::new(2, &a, &b, 3).ultra_log_convexity(1);
    assert!(!cmp.holds());
    assert!((cmp.log_gap() + 0.01619).abs() < 1e-4, "{}", cmp.log_gap());

    let (params, t) = at(0.5, 0.1);
    let report = verify_kernel_lemma(&params, t, 2, 1, 1e-14).unwrap();
    let case = report.cases.iter().find(|c| c.id.k == Some(2)).unwrap();
    assert_eq!(case.status, CaseStatus::Fail);
    assert!((case.margin - cmp.log_gap()).abs() < 1e-10);
}

#[test]
fn point_mass_observable_inherits_the_counterexample() {
    let (params, t) = at(0.5, 0.1);
    let delta = Observable::table([(2, 1.0)]).unwrap();
    let sharp = verify_theorem(&params, t, &delta, 1, 1e-14).unwrap();
    assert_eq!(sharp.cases[0].status, CaseStatus::Fail);
    let weak = verify_theorem_with(TheoremBound::Glmrs, &params, t, &delta, 1, 1e-14).unwrap();
    assert_eq!(weak.cases[0].status, CaseStatus::Pass);
}

#[test]
fn lemma_holds_at_large_survival() {
    let (params, t) = at(2.0, 0.9);
    let report = verify_kernel_lemma(&params, t, 15, 40, 1e-14).unwrap();
    assert!(report.passed(), "{:?}", report.worst_case());
    for k in 0..=12 {
        let conv = ExactConvolution::new(k, &ratio(9, 10), &(ratio(2, 1) * ratio(1, 10)), 26);
        assert!((1..=25).all(|n| conv.ultra_log_convexity(n).holds()), "k={k}");
    }
}

// Where the lemma holds on every row, the theorem follows for any non-negative f.
#[test]
fn lemma_implies_theorem_on_passing_cells() {
    let observables = [
        Observable::indicator(0, 1).unwrap(),
        Observable::table([(0, 0.3), (4, 1.0), (9, 0.2)]).unwrap(),
        Observable::table([(7, 1.0)]).unwrap(),
    ];
    for &(rho, p) in &[(2.0, 0.9), (5.0, 0.5), (1.0, 0.8)] {
        let (params, t) = at(rho, p);
        if !verify_kernel_lemma(&params, t, 30, 30, 1e-14).unwrap().passed() {
            continue;
        }
        for f in &observables {
            let report = verify_theorem(&params, t, f, 20, 1e-14).unwrap();
            assert!(report.passed(), "rho={rho} p={p}: {:?}", report.worst_case());
        }
    }
}

#[test]
fn weak_bound_holds_where_sharp_fails() {
    let f = Observable::table([(1, 0.7), (4, 1.0)]).unwrap();
    for &rho in &[0.25, 0.5, 1.0] {
        for &p in &[0.05, 0.1, 0.2] {
            let (params, t) = at(rho, p);
            let report = verify_theorem_with(TheoremBound::Glmrs, &params, t, &f, 30, 1e-14).unwrap();
            assert!(report.passed(), "rho={rho} p={p}");
        }
    }
}

#[test]
fn generalized_pinned_cells() {
    assert!(verify_generalized(0.7, 3.0, 20, 40, 1e-14).unwrap().passed());
    assert!(!verify_generalized(0.25, 0.5, 20, 40, 1e-14).unwrap().passed());
    assert!(verify_generalized(0.0, 0.0, 5, 5, 1e-14).is_err());
}

#[test]
fn sharp_bound_is_negative_and_tends_to_zero() {
    let mut last = f64::NEG_INFINITY;
    for i in 1..=20 {
        let p = 0.5f64.powi(i);
        let s = sharp_bound(1.0, p).unwrap();
        assert!(s < 0.0 && s > last);
        last = s;
    }
}
