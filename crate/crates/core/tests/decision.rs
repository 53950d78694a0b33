use datgan_core::bounds::chain_caps;
use datgan_core::decision::{
    chain_backward, decision_chain, decision_chain_taped, mean_variance_weights, shrink_precision, OutputCotangent,
};
use datgan_core::linalg::symmetric_eigenvalues;
use datgan_core::markets::{build_conditioning, ReturnPanel, DEFAULT_WINDOWS};
use datgan_core::DecisionParams;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

/// Projected gradient ascent on `u^T w - phi w^T S w` over the budget plane.
fn qp_oracle(u: &DVector<f64>, s: &DMatrix<f64>, phi: f64) -> DVector<f64> {
    let d = u.len();
    let lmax = symmetric_eigenvalues(s).max();
    let step = 1.0 / (2.0 * phi * lmax);
    let mut w = DVector::from_element(d, 1.0 / d as f64);
    for _ in 0..200_000 {
        let g = u - s * &w * (2.0 * phi);
        let g = &g - DVector::from_element(d, g.mean());
        let next = &w + g * step;
        let done = (&next - &w).amax() < 1e-16;
        w = next;
        if done {
            break;
        }
    }
    w
}

fn spd(d: usize, raw: &[f64], floor: f64) -> DMatrix<f64> {
    let m = DMatrix::from_row_slice(d, d, &raw[..d * d]);
    &m * m.transpose() + DMatrix::identity(d, d) * floor
}

fn panel(rows: &[Vec<f64>]) -> ReturnPanel {
    ReturnPanel::from_rows(rows).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn weights_match_projected_gradient(raw in prop::collection::vec(-1.0f64..1.0, 16),
                                        u in prop::collection::vec(-0.5f64..0.5, 4),
                                        phi in 0.3f64..3.0) {
        let s = spd(4, &raw, 0.05);
        let h = s.clone().try_inverse().unwrap();
        let u = DVector::from_vec(u);
        let w = mean_variance_weights(&u, &h, phi).unwrap();
        prop_assert!((w.sum() - 1.0).abs() < 1e-10);
        let oracle = qp_oracle(&u, &s, phi);
        prop_assert!((&w - &oracle).amax() < 1e-6, "{w} vs {oracle}");
    }

    #[test]
    fn shrinkage_spectrum(raw in prop::collection::vec(-1.0f64..1.0, 9), tau in 0.001f64..0.9) {
        let s = spd(3, &raw, 0.0);
        let h = shrink_precision(&s, tau).unwrap();
        let ev = symmetric_eigenvalues(&h);
        prop_assert!(ev.max() <= 1.0 / tau * (1.0 + 1e-12));
        prop_assert!(ev.min() > 0.0);
    }

    #[test]
    fn outputs_respect_caps(rows in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 4), 25..40),
                            block in prop::collection::vec(-1.0f64..1.0, 16)) {
        let params = DecisionParams::default();
        let p = panel(&rows);
        let cond = build_conditioning(&p, p.len() - 1, &DEFAULT_WINDOWS, params.zeta).unwrap();
        let block = DMatrix::from_row_slice(4, 4, &block);
        let caps = chain_caps(1.0, params.tau, params.phi, 4).unwrap();
        for out in decision_chain(&block, &cond, &params).unwrap() {
            let ev = symmetric_eigenvalues(&out.h_hat);
            prop_assert!(ev.max() <= caps.precision_max_eig * (1.0 + 1e-12));
            prop_assert!(ev.min() >= caps.precision_min_eig_strict * (1.0 - 1e-12));
            prop_assert!(out.u_hat.amax() <= caps.u_hat_abs);
            prop_assert!(out.sigma_hat.amax() <= caps.sigma_entry_abs);
            prop_assert!(out.w.norm() <= caps.w_norm);
            prop_assert!(out.p.abs() <= caps.p_abs);
            prop_assert!(out.utility.abs() <= caps.utility_abs);
            prop_assert!((out.w.sum() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn utility_gradient_matches_central_differences(rows in prop::collection::vec(prop::collection::vec(-0.05f64..0.05, 4), 25..30),
                                                    block in prop::collection::vec(-0.05f64..0.05, 12),
                                                    g in prop::collection::vec(-1.0f64..1.0, 3)) {
        let params = DecisionParams::default();
        let p = panel(&rows);
        let cond = build_conditioning(&p, p.len() - 1, &DEFAULT_WINDOWS, params.zeta).unwrap();
        let block = DMatrix::from_row_slice(3, 4, &block);
        let (_, tape) = decision_chain_taped(&block, &cond.ma, &params).unwrap();
        let cot: Vec<OutputCotangent> = g.iter().map(|&v| OutputCotangent::utility(v)).collect();
        let grad = chain_backward(&tape, &cot).unwrap();
        let f = |b: &DMatrix<f64>| -> f64 {
            decision_chain(b, &cond, &params).unwrap().iter().zip(&g).map(|(o, v)| o.utility * v).sum()
        };
        let h = 1e-6;
        for idx in 0..block.len() {
            let mut up = block.clone();
            let mut dn = block.clone();
            up[idx] += h;
            dn[idx] -= h;
            let fd = (f(&up) - f(&dn)) / (2.0 * h);
            let scale = fd.abs().max(grad[idx].abs()).max(1e-3);
            prop_assert!((fd - grad[idx]).abs() / scale < 1e-4, "entry {idx}: {fd} vs {}", grad[idx]);
        }
    }
}
