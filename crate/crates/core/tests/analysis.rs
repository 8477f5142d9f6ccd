use mltt::analysis::{empirical_rip, fit_decay_rate, median, relative_rmse, rip_constant, rmse, RipClass, TestSet};
use proptest::collection::vec;
use proptest::prelude::*;

proptest! {
    #[test]
    fn median_is_lower_middle_order_statistic(mut v in vec(-1e3..1e3f64, 1..40)) {
        let m = median(&v).unwrap();
        v.sort_by(f64::total_cmp);
        prop_assert_eq!(m, v[(v.len() - 1) / 2]);
    }

    #[test]
    fn median_ignores_nan(v in vec(-1.0..1.0f64, 1..10), nans in 0usize..5) {
        let mut w = v.clone();
        w.extend(std::iter::repeat(f64::NAN).take(nans));
        prop_assert_eq!(median(&w), median(&v));
    }

    #[test]
    fn decay_rate_of_geometric_sequence(rate in 0.0..4.0f64, start in 1e-3..1e3f64, len in 2usize..10) {
        let e: Vec<f64> = (0..len).map(|l| start * 2f64.powf(-rate * l as f64)).collect();
        prop_assert!((fit_decay_rate(&e).unwrap() - rate).abs() < 1e-9);
    }

    #[test]
    fn rmse_scales_out(refs in vec(0.5..2.0f64, 1..20), s in 0.1..10.0f64) {
        let preds: Vec<f64> = refs.iter().map(|r| r * 1.1).collect();
        let a = relative_rmse(&preds, &refs).unwrap();
        let scaled: Vec<f64> = preds.iter().map(|p| p * s).collect();
        let refs_s: Vec<f64> = refs.iter().map(|r| r * s).collect();
        prop_assert!((relative_rmse(&scaled, &refs_s).unwrap() - a).abs() < 1e-12);
        prop_assert!((a - 0.1).abs() < 1e-12);
    }
}

#[test]
fn rmse_of_exact_model_is_zero() {
    let test = TestSet::new(vec![vec![0.1], vec![0.7]], vec![0.2, 1.4]).unwrap();
    assert_eq!(rmse(|y: &[f64]| Ok(2.0 * y[0]), &test).unwrap(), 0.0);
}

#[test]
fn rip_constant_of_constant_function_is_zero() {
    // The constant L_0 = 1 has empirical norm exactly one at any points.
    let class = RipClass::Members(vec![vec![(vec![0, 0], 1.0)]]);
    let (d, skipped) = rip_constant(&class, &[vec![0.2, -0.4], vec![0.9, 0.1]], 0).unwrap();
    assert_eq!((d, skipped), (0.0, 0));
}

#[test]
fn rip_constants_shrink_with_samples() {
    let class = RipClass::Sparse { order: 2, degree: 3, sparsity: 1, max_supports: 1000 };
    let small = empirical_rip(&class, 100, 30, 1).unwrap();
    let large = empirical_rip(&class, 1600, 30, 1).unwrap();
    assert!(large.median() < small.median());
    assert_eq!(large.deltas.len(), 30);
}
