use datgan_core::bounds::{
    chain_caps, mixing_matrix_norm, required_samples, tail_failure_prob, tail_log_failure, BoundInputs,
};
use proptest::prelude::*;

fn inputs() -> impl Strategy<Value = BoundInputs> {
    (
        0.1f64..10.0,
        0.1f64..10.0,
        1.0f64..8.0,
        0.0f64..5.0,
        0.5f64..5.0,
        0.5f64..5.0,
        1.0f64..500.0,
        1e2f64..1e9,
        0.0f64..1e4,
        1e-3f64..1.0,
    )
        .prop_map(|(b_x, b_f, k, delta_beta, l, l_tilde, p, i, m, eps)| BoundInputs {
            b_x,
            b_f,
            k,
            delta_beta,
            l,
            l_tilde,
            p,
            i,
            m,
            eps,
            ..BoundInputs::default()
        })
}

fn lf(x: &BoundInputs) -> f64 {
    tail_log_failure(x).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn monotone_in_every_argument(x in inputs(), f in 1.01f64..4.0) {
        let base = lf(&x);
        let more_i = lf(&BoundInputs { i: x.i * f, ..x });
        let more_m = lf(&BoundInputs { m: x.m * f + 1.0, ..x });
        let more_p = lf(&BoundInputs { p: x.p * f, ..x });
        let more_k = lf(&BoundInputs { k: x.k * f, ..x });
        let more_beta = lf(&BoundInputs { delta_beta: x.delta_beta * f + 0.1, ..x });
        let less_eps = lf(&BoundInputs { eps: x.eps / f, ..x });
        prop_assert!(more_i <= base);
        prop_assert!(more_m >= base);
        prop_assert!(more_p >= base);
        prop_assert!(more_k >= base);
        prop_assert!(more_beta >= base);
        prop_assert!(less_eps >= base);
        let p = tail_failure_prob(&x).unwrap();
        prop_assert!((0.0..=1.0).contains(&p));
    }

    #[test]
    fn extreme_magnitudes_stay_finite_or_vanish(e_i in 0i32..300, e_p in 0i32..290, e_m in 0i32..300) {
        let x = BoundInputs { i: 10f64.powi(e_i), p: 10f64.powi(e_p), m: 10f64.powi(e_m), ..BoundInputs::default() };
        let v = tail_log_failure(&x).unwrap();
        prop_assert!(!v.is_nan() && v != f64::INFINITY);
        let p = tail_failure_prob(&x).unwrap();
        prop_assert!(p.is_finite() && (0.0..=1.0).contains(&p));
    }

    #[test]
    fn required_samples_is_the_threshold(x in inputs(), delta in 1e-6f64..0.5) {
        let x = BoundInputs { p: x.p.min(20.0), ..x };
        if let Ok(n) = required_samples(&x, delta) {
            let at = |i: u64| tail_failure_prob(&BoundInputs { i: i as f64, ..x }).unwrap();
            prop_assert!(at(n) <= delta);
            if n > 1 {
                prop_assert!(at(n - 1) > delta);
            }
        }
    }

    #[test]
    fn mixing_bound_dominates_exact(beta in prop::collection::vec(0.0f64..1.0, 0..30), n in 1usize..60, k in 1usize..8) {
        let m = mixing_matrix_norm(&beta, n, k).unwrap();
        prop_assert!(m.exact_row_max <= m.bound + 1e-12);
        prop_assert!(m.exact_row_max >= 1.0);
    }

    #[test]
    fn chain_caps_grow_with_range(b in 0.01f64..10.0, f in 1.01f64..3.0) {
        let lo = chain_caps(b, 0.01, 1.0, 4).unwrap();
        let hi = chain_caps(b * f, 0.01, 1.0, 4).unwrap();
        prop_assert!(hi.utility_abs >= lo.utility_abs);
        prop_assert!(hi.precision_min_eig <= lo.precision_min_eig);
        prop_assert_eq!(hi.precision_max_eig, lo.precision_max_eig);
    }
}

#[test]
fn invalid_inputs_rejected() {
    assert!(tail_log_failure(&BoundInputs {
        eps: 0.0,
        ..BoundInputs::default()
    })
    .is_err());
    assert!(required_samples(&BoundInputs::default(), 0.0).is_err());
    assert!(chain_caps(1.0, 1.5, 1.0, 4).is_err());
}
