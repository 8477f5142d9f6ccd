use mltt::basis::{legendre_eval, WeightSequence};
use mltt::regression::{
    draw_points, fit, lambda_cv, surrogate_eval, weighted_lasso, Algorithm, CvOptions, FitConfig, LambdaGrid,
    SampleSet, Surrogate,
};
use nalgebra::DMatrix;
use proptest::collection::vec;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn objective(a: &DMatrix<f64>, f: &[f64], w: &[f64], c: &[f64], lambda: f64) -> f64 {
    let r = DMatrix::from_column_slice(f.len(), 1, f) - a * DMatrix::from_column_slice(c.len(), 1, c);
    r.norm_squared() + lambda * c.iter().zip(w).map(|(c, w)| w * c.abs()).sum::<f64>()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// The solution cannot be improved by perturbing single coordinates.
    #[test]
    fn lasso_is_coordinatewise_optimal(rows in 5usize..15, cols in 1usize..8, seed in 0u64..1000, lambda in 1e-3..2.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = DMatrix::from_fn(rows, cols, |_, _| rand::Rng::gen_range(&mut rng, -1.0..1.0));
        let f: Vec<f64> = (0..rows).map(|_| rand::Rng::gen_range(&mut rng, -1.0..1.0)).collect();
        let w: Vec<f64> = (0..cols).map(|_| rand::Rng::gen_range(&mut rng, 0.5..2.0)).collect();
        let c = weighted_lasso(&a, &f, &w, lambda).unwrap();
        let base = objective(&a, &f, &w, &c, lambda);
        for j in 0..cols {
            for step in [1e-4, -1e-4] {
                let mut d = c.clone();
                d[j] += step;
                prop_assert!(objective(&a, &f, &w, &d, lambda) >= base - 1e-10);
            }
        }
    }

    #[test]
    fn orthonormal_design_soft_thresholds(f in vec(-3.0..3.0f64, 4), w in vec(0.5..2.0f64, 4), lambda in 0.0..4.0f64) {
        let a = DMatrix::identity(4, 4);
        let c = weighted_lasso(&a, &f, &w, lambda).unwrap();
        for j in 0..4 {
            let t = 0.5 * lambda * w[j];
            let expected = f[j].signum() * (f[j].abs() - t).max(0.0);
            prop_assert!((c[j] - expected).abs() <= 1e-10);
        }
    }
}

#[test]
fn cross_validation_recovers_sparse_vector() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let a = DMatrix::from_fn(60, 20, |_, _| rand::Rng::gen_range(&mut rng, -1.0..1.0));
    let mut truth = vec![0.0; 20];
    truth[2] = 1.5;
    truth[11] = -0.7;
    let f: Vec<f64> = (a.clone() * DMatrix::from_column_slice(20, 1, &truth)).iter().copied().collect();
    let w = vec![1.0; 20];
    let cv = lambda_cv(&a, &f, &w, &LambdaGrid::default(), &CvOptions::default()).unwrap();
    for (x, y) in cv.coeffs.iter().zip(&truth) {
        assert!((x - y).abs() < 1e-6, "{x} vs {y}");
    }
    assert!(cv.validation_error < 1e-6);
}

const PLANTED: [([usize; 4], f64); 8] = [
    ([0, 0, 0, 0], 1.0),
    ([1, 0, 0, 0], 0.5),
    ([0, 1, 0, 0], -0.4),
    ([0, 0, 1, 0], 0.3),
    ([0, 0, 0, 1], 0.25),
    ([2, 0, 0, 0], 0.2),
    ([1, 1, 0, 0], -0.15),
    ([0, 1, 1, 0], 0.1),
];

fn planted_value(y: &[f64]) -> f64 {
    let v: Vec<Vec<f64>> = y.iter().map(|&t| legendre_eval(4, t).unwrap()).collect();
    PLANTED.iter().map(|(nu, c)| c * nu.iter().enumerate().map(|(m, &n)| v[m][n]).product::<f64>()).sum()
}

fn planted_fit(algorithm: Algorithm, seed: u64) -> Surrogate {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = draw_points(&mut rng, 500, 4);
    let values = points.iter().map(|p| planted_value(p)).collect();
    let samples = SampleSet::new(points, values).unwrap();
    let config = FitConfig { seed, ..Default::default() };
    fit(&samples, &[4; 4], &WeightSequence::Lower, &config, algorithm).unwrap()
}

#[test]
fn planted_target_is_recovered_by_both_algorithms() {
    let probe = [[0.3, -0.2, 0.9, -0.7], [-1.0, 1.0, 0.0, 0.5]];
    for algorithm in [Algorithm::Sals, Algorithm::Ssals] {
        let s = planted_fit(algorithm, 1);
        for y in probe {
            let v = surrogate_eval(&s, &y).unwrap();
            assert!((v - planted_value(&y)).abs() < 1e-7, "{algorithm}: {v}");
        }
        let round = Surrogate::from_json(&s.to_json().unwrap()).unwrap();
        assert_eq!(round.eval(&probe[0]).unwrap(), s.eval(&probe[0]).unwrap());
    }
}

#[test]
fn fit_is_deterministic() {
    let a = planted_fit(Algorithm::Sals, 5);
    let b = planted_fit(Algorithm::Sals, 5);
    assert_eq!(a, b);
}

#[test]
fn invalid_inputs_are_rejected() {
    assert!(SampleSet::new(vec![vec![0.0]], vec![]).is_err());
    let s = SampleSet::new(vec![vec![0.0, 0.1]], vec![1.0]).unwrap();
    assert!(fit(&s, &[], &WeightSequence::Lower, &FitConfig::default(), Algorithm::Sals).is_err());
}
