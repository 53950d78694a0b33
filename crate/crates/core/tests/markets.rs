#![allow(clippy::needless_range_loop)]

use std::fs::File;

use datgan_core::markets::{
    anchor_range, build_conditioning, load_etf_csv, read_panel_csv, sample_anchors, sample_mvt, simulate_panel,
    write_etf_csv, write_panel_csv, DgpParams, MvtSpec, PreparedPanel, PriceRow, ReturnPanel, DEFAULT_WINDOWS,
};
use datgan_core::DecisionParams;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn price_rows(tickers: &[&str], days: usize, rng: &mut ChaCha8Rng) -> Vec<PriceRow> {
    let mut rows = Vec::new();
    for (k, t) in tickers.iter().enumerate() {
        let mut p = 50.0 + 10.0 * k as f64;
        for day in 0..days {
            rows.push(PriceRow {
                date: format!("2001-{:02}-{:02}", 1 + day / 28, 1 + day % 28),
                ticker: t.to_string(),
                close: p,
            });
            p *= 1.0 + (rng.random::<f64>() - 0.5) * 0.04;
        }
    }
    rows
}

#[test]
fn etf_prices_round_trip_to_exact_returns() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let tickers = ["EEM", "EFA", "SPY", "AGG"];
    let rows = price_rows(&tickers, 60, &mut rng);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("prices.csv");
    write_etf_csv(File::create(&path).unwrap(), &rows).unwrap();
    let names: Vec<String> = tickers.iter().map(|s| s.to_string()).collect();
    let panel = load_etf_csv(&path, &names).unwrap();
    assert_eq!(panel.len(), 59);
    for (a, _) in tickers.iter().enumerate() {
        let closes: Vec<f64> = rows[a * 60..(a + 1) * 60].iter().map(|r| r.close).collect();
        for t in 0..59 {
            assert_eq!(panel.returns()[(t, a)], closes[t + 1] / closes[t] - 1.0);
        }
    }

    let copy = dir.path().join("panel.csv");
    write_panel_csv(File::create(&copy).unwrap(), &panel).unwrap();
    let back = read_panel_csv(&copy).unwrap();
    assert_eq!(back.returns(), panel.returns());
    assert_eq!(back.dates(), panel.dates());
}

#[test]
fn anchor_histogram_is_uniform() {
    let range = anchor_range(140, 4, &DEFAULT_WINDOWS).unwrap();
    let bins = range.clone().count();
    let n = 100_000;
    let mut counts = vec![0usize; bins];
    for t in sample_anchors(&range, n, &mut ChaCha8Rng::seed_from_u64(8)) {
        counts[t - range.start()] += 1;
    }
    let expected = n as f64 / bins as f64;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    let df = (bins - 1) as f64;
    assert!((chi2 - df).abs() <= 3.0 * (2.0 * df).sqrt(), "chi2 {chi2} df {df}");
}

#[test]
fn prepared_blocks_match_direct_computation() {
    let panel = simulate_panel(&DgpParams::default(), 80, 50, 3).unwrap();
    let params = DecisionParams::default();
    let prep = PreparedPanel::new(panel.clone(), 3, DEFAULT_WINDOWS, params).unwrap();
    for t in prep.anchors().step_by(7) {
        let direct = build_conditioning(&panel, t, &DEFAULT_WINDOWS, params.zeta).unwrap();
        assert_eq!(prep.conditioning(t).unwrap(), &direct);
        let b = prep.block(t).unwrap();
        for k in 0..3 {
            assert_eq!(b.real_block.row(k), panel.returns().row(t + 1 + k));
        }
        for a in 0..4 {
            assert_eq!(direct.features[(a, 0)], panel.returns()[(t, a)]);
        }
    }
}

#[test]
fn mvt_covariance_scaled_by_dof_ratio() {
    let spec = MvtSpec::market_default(4);
    let x = sample_mvt(&spec, 50_000, &mut ChaCha8Rng::seed_from_u64(21)).unwrap();
    let n = x.nrows() as f64;
    let mean = x.row_mean();
    let mut cov = nalgebra::DMatrix::zeros(4, 4);
    for row in x.row_iter() {
        let dv = (row - &mean).transpose();
        cov += &dv * dv.transpose();
    }
    cov /= n - 1.0;
    let target = spec.shape_matrix().unwrap() * (spec.dof / (spec.dof - 2.0));
    let tol = 0.05 * spec.dof / (spec.dof - 2.0);
    for i in 0..4 {
        for j in 0..4 {
            assert!((cov[(i, j)] - target[(i, j)]).abs() <= tol.max(0.05 * target[(i, j)].abs()));
        }
    }
}

#[test]
fn dof_two_is_rejected() {
    let mut p = DgpParams::default();
    p.noise.dof = 2.0;
    assert!(simulate_panel(&p, 10, 0, 0).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn first_feature_is_last_return(rows in prop::collection::vec(prop::collection::vec(-0.1f64..0.1, 3), 21..60), pick in 0usize..1000) {
        let panel = ReturnPanel::from_rows(&rows).unwrap();
        let t = 20 + pick % (panel.len() - 20);
        let c = build_conditioning(&panel, t, &DEFAULT_WINDOWS, 0.74).unwrap();
        for a in 0..3 {
            prop_assert_eq!(c.features[(a, 0)], rows[t][a]);
            let mean21: f64 = (t - 20..=t).map(|s| rows[s][a]).sum::<f64>() / 21.0;
            prop_assert!((c.features[(a, 4)] - mean21).abs() < 1e-15);
        }
    }

    #[test]
    fn anchors_stay_in_range(len in 30usize..400, k in 1usize..6, seed in any::<u64>()) {
        let range = anchor_range(len, k, &DEFAULT_WINDOWS).unwrap();
        prop_assert_eq!(*range.start(), 20);
        prop_assert_eq!(*range.end(), len - 1 - k);
        for t in sample_anchors(&range, 200, &mut ChaCha8Rng::seed_from_u64(seed)) {
            prop_assert!(range.contains(&t));
        }
    }
}
