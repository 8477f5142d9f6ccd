use mltt::basis::{legendre_eval, WeightSequence};
use mltt::fem::{work_estimate, Hierarchy};
use mltt::multilevel::{
    fit_multilevel, fit_single_level, plan_samples, EstimatorOptions, FemModel, LevelModel, MultilevelSurrogate,
    PlanMode, PlanParams,
};
use mltt::regression::{Algorithm, FitConfig};
use mltt::{Error, Result};
use proptest::prelude::*;

/// `g_l = p + 4^{-l} q` for sparse Legendre polynomials `p`, `q` in two
/// variables; the level updates are multiples of `q`. Work is `2^l`.
struct Planted;

fn legendre_term(y: &[f64], nu: [usize; 2]) -> f64 {
    legendre_eval(3, y[0]).unwrap()[nu[0]] * legendre_eval(3, y[1]).unwrap()[nu[1]]
}

impl LevelModel for Planted {
    fn order(&self) -> usize {
        2
    }

    fn eval_g(&self, level: u32, y: &[f64]) -> Result<(f64, u64)> {
        if level == 0 {
            return Err(Error::Input("level 0".into()));
        }
        let p = 2.0 + 0.5 * legendre_term(y, [1, 0]) - 0.25 * legendre_term(y, [0, 2]);
        let q = legendre_term(y, [1, 1]) + 0.5 * legendre_term(y, [3, 0]);
        Ok((p + 4f64.powi(-(level as i32)) * q, 1 << level))
    }
}

fn options(algorithm: Algorithm) -> EstimatorOptions {
    EstimatorOptions { algorithm, weights: WeightSequence::ExpWeak, fit: FitConfig::default() }
}

#[test]
fn multilevel_sum_recovers_finest_level() {
    let plan = plan_samples(&PlanParams::experiment(3, 8.0, 6, 3)).unwrap();
    assert_eq!(plan.samples, vec![128, 91, 64]);
    let fitted = fit_multilevel(&Planted, &plan, &options(Algorithm::Sals), 11).unwrap();
    for y in [[0.1, -0.3], [0.9, 0.8], [-1.0, 0.0]] {
        let truth = Planted.eval_g(3, &y).unwrap().0;
        let v = fitted.eval(&y).unwrap();
        assert!((v - truth).abs() < 1e-6, "{v} vs {truth}");
    }
    // Level l > 1 costs 2^l + 2^{l-1} per sample, level 1 costs 2.
    assert_eq!(fitted.work(), 128 * 2 + 91 * 6 + 64 * 12);
    assert_eq!(fitted.work() as f64, work_estimate(&plan.samples, 1.0));
}

#[test]
fn one_level_multilevel_is_single_level() {
    let plan = plan_samples(&PlanParams::experiment(1, 8.0, 3, 3)).unwrap();
    for algorithm in [Algorithm::Sals, Algorithm::Ssals] {
        let ml = fit_multilevel(&Planted, &plan, &options(algorithm), 5).unwrap();
        let sl = fit_single_level(&Planted, 1, &plan, &options(algorithm), 5).unwrap();
        assert_eq!(ml.levels.len(), 1);
        assert_eq!(ml.levels[0], sl);
        let y = [0.25, -0.75];
        assert_eq!(ml.eval(&y).unwrap().to_bits(), sl.surrogate.eval(&y).unwrap().to_bits());
    }
}

#[test]
fn bundle_round_trip() {
    let plan = plan_samples(&PlanParams::experiment(2, 4.0, 2, 2)).unwrap();
    let fitted = fit_multilevel(&Planted, &plan, &options(Algorithm::Ssals), 2).unwrap();
    let dir = tempfile::tempdir().unwrap();
    fitted.save(dir.path()).unwrap();
    let loaded = MultilevelSurrogate::load(dir.path()).unwrap();
    assert_eq!(loaded.plan, fitted.plan);
    assert_eq!(loaded.work(), fitted.work());
    for y in [[0.5, 0.5], [-0.2, 0.7]] {
        assert_eq!(loaded.eval(&y).unwrap(), fitted.eval(&y).unwrap());
    }
}

#[test]
fn fem_model_levels_share_the_finest_mesh() {
    let model = FemModel { problem: mltt::fem::DiffusionProblem::experiment(), hierarchy: Hierarchy::with_finest(64, 3).unwrap() };
    let y = [0.0; 6];
    let (g3, w3) = model.eval_g(3, &y).unwrap();
    let (g1, w1) = model.eval_g(1, &y).unwrap();
    assert_eq!((w3, w1), (64, 16));
    assert!((g3 - g1).abs() < 0.05 * g3.abs());
}

#[test]
fn theory_plan_requires_work_premise() {
    let mut params = PlanParams::experiment(3, 1.0, 1, 3);
    params.mode = PlanMode::Theory { failure_probability: 0.1, summability: 0.5, max_degree: 6 };
    params.constants.delta_work = 0.25;
    assert!(matches!(plan_samples(&params), Err(Error::Plan(_))));
    params.constants.delta_work = 1.0;
    let plan = plan_samples(&params).unwrap();
    assert!(plan.samples.windows(2).all(|w| w[0] >= w[1]));
    assert!(plan.failure.iter().map(|p| p.unwrap()).sum::<f64>() < 0.1);
}

proptest! {
    #[test]
    fn experiment_schedule_properties(levels in 1u32..6, k in 1u32..11, c in 1.0..16.0f64) {
        let plan = plan_samples(&PlanParams::experiment(levels, c, k, 5)).unwrap();
        prop_assert_eq!(plan.samples.len(), levels as usize);
        prop_assert!(plan.samples.windows(2).all(|w| w[0] >= w[1]));
        let finest = c * 2f64.powf(k as f64 / 2.0);
        prop_assert!(plan.samples_at(levels) as f64 >= finest - 1e-9);
        prop_assert!((plan.samples_at(levels) as f64) < finest + 1.0);
        prop_assert_eq!(plan.work_estimate(0.5), work_estimate(&plan.samples, 0.5));
        prop_assert!(plan.degrees.iter().all(|&d| d == 5));
    }
}
