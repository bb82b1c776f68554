use mminf::oracle::exact::{rational_from_f64, ExactConvolution};
use mminf::oracle::uniformization::uniformized_kernel;
use mminf::{kernel_entry, mehler_row, semigroup_apply, generator_apply, Observable, QueueParams};
use proptest::prelude::*;

fn params(rho: f64) -> QueueParams {
    QueueParams::from_rho(rho, 1.0).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rows_are_probability_vectors(rho in 0.05f64..20.0, p in 0.01f64..0.99, k in 0u64..40) {
        let params = params(rho);
        let t = params.time_for_p(p).unwrap();
        let row = mehler_row(&params, t, k, 1e-14).unwrap();
        let total = row.pmf.windowed_mass();
        prop_assert!(total <= 1.0 + 1e-12);
        prop_assert!(total + row.pmf.tail_deficit() >= 1.0 - 1e-12);
    }

    #[test]
    fn matches_exact_rational_oracle(rho in 0.1f64..8.0, p in 0.02f64..0.98, k in 0u64..12) {
        let params = params(rho);
        let t = params.time_for_p(p).unwrap();
        let a = rational_from_f64(params.p(t));
        let b = rational_from_f64(rho * params.q(t));
        let exact = ExactConvolution::new(k, &a, &b, 25);
        for n in 0..=25 {
            let g = kernel_entry(&params, t, k, n).unwrap();
            prop_assert!((g.ln - exact.ln_mass(n)).abs() <= 1e-12, "k={} n={} {} vs {}", k, n, g.ln, exact.ln_mass(n));
        }
    }
}

#[test]
fn matches_uniformization() {
    for &rho in &[0.5, 3.0] {
        let params = params(rho);
        let t = params.time_for_p(0.4).unwrap();
        let u = uniformized_kernel(&params, t, 80, 1e-12).unwrap();
        for k in 0..=10 {
            for n in 0..=25 {
                let g = kernel_entry(&params, t, k, n).unwrap().value();
                assert!((g - u.get(k as usize, n as usize)).abs() <= 1e-10, "rho={rho} k={k} n={n}");
            }
        }
    }
}

#[test]
fn chapman_kolmogorov() {
    let params = params(2.0);
    let (s, t) = (0.3, 0.8);
    for k in [0u64, 3, 9] {
        let first = mehler_row(&params, s, k, 1e-16).unwrap();
        for n in 0..=20 {
            let composed: f64 = first
                .pmf
                .iter()
                .map(|(m, lg)| lg.exp() * kernel_entry(&params, t, m, n).unwrap().value())
                .sum();
            let direct = kernel_entry(&params, s + t, k, n).unwrap().value();
            assert!((composed - direct).abs() <= 1e-13, "k={k} n={n}: {composed} vs {direct}");
        }
    }
}

#[test]
fn semigroup_of_constant_is_constant() {
    let params = params(1.5);
    let one = Observable::constant(1.0).unwrap();
    for k in 0..=20 {
        let e = semigroup_apply(&params, 0.7, &one, k, 1e-14).unwrap();
        assert!((e.value - 1.0).abs() <= 1e-12 + e.err, "k={k}: {e:?}");
    }
}

#[test]
fn short_time_derivative_is_the_generator() {
    let params = params(2.0);
    let f = Observable::table([(0, 1.0), (2, 0.5), (3, 2.0), (6, 1.0)]).unwrap();
    let error = |t: f64| {
        (0..=8)
            .map(|n| ((semigroup_apply(&params, t, &f, n, 1e-14).unwrap().value - f.eval(n)) / t
                - generator_apply(&params, &f, n))
            .abs())
            .fold(0.0, f64::max)
    };
    let (coarse, fine) = (error(1e-3), error(1e-4));
    assert!(fine < 1e-2);
    assert!((5.0..=15.0).contains(&(coarse / fine)), "{coarse} {fine}");
}
