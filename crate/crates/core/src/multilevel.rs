//! Level planning, single-level and multilevel estimators, work accounting.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::{ModelClassConfig, TheoryConstants, WeightSequence};
use crate::error::{Error, Result};
use crate::fem::{self, DiffusionProblem, Hierarchy};
use crate::regression::{draw_points, fit, Algorithm, FitConfig, SampleSet, Surrogate};
use crate::seed::{derive_seed, rng_for};

/// How per-level sample counts are chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum PlanMode {
    /// `n_l = ceil(n0 2^{alpha beta (L-l)} ln(1/p_l))`, `p_l = (p/2) 2^{-(L-l)}`;
    /// degrees from `r(gamma_l)`.
    Theory { failure_probability: f64, summability: f64, max_degree: usize },
    /// `n_{l,k} = ceil(c 2^{k/2} 2^{(L-l)/2})` with one degree bound on every level.
    Experiment { c: f64, k: u32, degree: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanParams {
    pub levels: u32,
    pub constants: TheoryConstants,
    pub mode: PlanMode,
}

impl PlanParams {
    pub fn experiment(levels: u32, c: f64, k: u32, degree: usize) -> Self {
        PlanParams { levels, constants: TheoryConstants::default(), mode: PlanMode::Experiment { c, k, degree } }
    }
}

/// Per-level accuracies, budgets, failure probabilities, sample counts and
/// degree bounds; index 0 is level 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelPlan {
    pub levels: u32,
    pub gamma: Vec<f64>,
    /// `r(gamma_l)`; unset when the budget is left to cross-validation.
    pub budget: Vec<Option<f64>>,
    pub failure: Vec<Option<f64>>,
    pub samples: Vec<usize>,
    pub degrees: Vec<usize>,
    pub constants: TheoryConstants,
    pub mode: PlanMode,
}

impl LevelPlan {
    pub fn samples_at(&self, level: u32) -> usize {
        self.samples[level as usize - 1]
    }

    pub fn degree_at(&self, level: u32) -> usize {
        self.degrees[level as usize - 1]
    }

    /// `tau = h0^{-1}(2 n_1 + sum n_l (2^l + 2^{l-1}))`.
    pub fn work_estimate(&self, h0: f64) -> f64 {
        fem::work_estimate(&self.samples, h0)
    }
}

pub fn plan_samples(params: &PlanParams) -> Result<LevelPlan> {
    let big_l = params.levels;
    if big_l == 0 {
        return Err(Error::Plan("at least one level is required".into()));
    }
    params.constants.validate()?;
    let c = &params.constants;
    let gamma: Vec<f64> = (1..=big_l).map(|l| 2f64.powf(-c.alpha * (big_l - l) as f64)).collect();
    let (budget, failure, samples, degrees) = match params.mode {
        PlanMode::Theory { failure_probability: p, summability, max_degree } => {
            if !c.multilevel_premise() {
                return Err(Error::Plan(format!(
                    "work exponent {} does not exceed alpha*beta = {}",
                    c.delta_work,
                    c.alpha * c.beta
                )));
            }
            if !(p > 0.0 && p < 1.0) {
                return Err(Error::Plan(format!("failure probability must lie in (0, 1), got {p}")));
            }
            let mut budget = Vec::new();
            let mut failure = Vec::new();
            let mut samples = Vec::new();
            let mut degrees = Vec::new();
            for (i, &g) in gamma.iter().enumerate() {
                let gap = (big_l - 1 - i as u32) as f64;
                let class = ModelClassConfig::for_accuracy(g, summability, max_degree)?;
                let pl = p / 2.0 * 2f64.powf(-gap);
                let n = (c.n0 * 2f64.powf(c.alpha * c.beta * gap) * (1.0 / pl).ln()).ceil();
                budget.push(Some(class.budget));
                failure.push(Some(pl));
                samples.push((n as usize).max(1));
                degrees.push(class.degree);
            }
            (budget, failure, samples, degrees)
        }
        PlanMode::Experiment { c: cc, k, degree } => {
            if !(cc > 0.0 && cc.is_finite()) {
                return Err(Error::Plan(format!("schedule constant must be positive, got {cc}")));
            }
            let samples: Vec<usize> = (1..=big_l)
                .map(|l| {
                    let n = cc * 2f64.powf(k as f64 / 2.0) * 2f64.powf((big_l - l) as f64 / 2.0);
                    // Guard against 16.000000000000004-style ceilings.
                    let r = n.round();
                    let n = if (n - r).abs() < 1e-9 * r.max(1.0) { r } else { n.ceil() };
                    (n as usize).max(1)
                })
                .collect();
            let l = big_l as usize;
            (vec![None; l], vec![None; l], samples, vec![degree; l])
        }
    };
    Ok(LevelPlan { levels: big_l, gamma, budget, failure, samples, degrees, constants: params.constants, mode: params.mode.clone() })
}

/// Source of level values `g_l(y)` together with their work units.
pub trait LevelModel: Sync {
    /// Parameter dimension.
    fn order(&self) -> usize;

    fn eval_g(&self, level: u32, y: &[f64]) -> Result<(f64, u64)>;

    /// `g_l - g_{l-1}` with `g_0 := 0`.
    fn eval_delta(&self, level: u32, y: &[f64]) -> Result<(f64, u64)> {
        match level {
            0 => Err(Error::Input("level updates start at l = 1".into())),
            1 => self.eval_g(1, y),
            l => {
                let (fine, wf) = self.eval_g(l, y)?;
                let (coarse, wc) = self.eval_g(l - 1, y)?;
                Ok((fine - coarse, wf + wc))
            }
        }
    }
}

/// The diffusion problem on a nested mesh family.
#[derive(Debug, Clone)]
pub struct FemModel {
    pub problem: DiffusionProblem,
    pub hierarchy: Hierarchy,
}

impl LevelModel for FemModel {
    fn order(&self) -> usize {
        self.problem.m
    }

    fn eval_g(&self, level: u32, y: &[f64]) -> Result<(f64, u64)> {
        fem::eval_g(&self.problem, &self.hierarchy, level, y)
    }

    fn eval_delta(&self, level: u32, y: &[f64]) -> Result<(f64, u64)> {
        fem::eval_delta_g(&self.problem, &self.hierarchy, level, y)
    }
}

/// Basis and sweep settings shared by every level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorOptions {
    pub algorithm: Algorithm,
    pub weights: WeightSequence,
    pub fit: FitConfig,
}

/// One fitted level.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelSurrogate {
    pub level: u32,
    pub surrogate: Surrogate,
    pub samples: usize,
    pub work: u64,
    pub seed: u64,
}

#[derive(Clone, Copy)]
enum Target {
    Value,
    Update,
}

fn fit_level(
    model: &dyn LevelModel,
    level: u32,
    n: usize,
    degree: usize,
    target: Target,
    options: &EstimatorOptions,
    seed: u64,
) -> Result<LevelSurrogate> {
    let level_seed = derive_seed(seed, &[level as u64]);
    let mut rng = rng_for(level_seed, &[0]);
    let points = draw_points(&mut rng, n, model.order());
    let evals: Vec<(f64, u64)> = points
        .par_iter()
        .map(|y| match target {
            Target::Value => model.eval_g(level, y),
            Target::Update => model.eval_delta(level, y),
        })
        .collect::<Result<_>>()?;
    let work = evals.iter().map(|e| e.1).sum();
    let values = evals.into_iter().map(|e| e.0).collect();
    let samples = SampleSet::new(points, values)?.with_seed(level_seed);
    let mut config = options.fit.clone();
    config.seed = derive_seed(level_seed, &[1]);
    let degrees = vec![degree; model.order()];
    let surrogate = fit(&samples, &degrees, &options.weights, &config, options.algorithm)?;
    Ok(LevelSurrogate { level, surrogate, samples: n, work, seed: level_seed })
}

/// Fits `g_level` from the finest count and degree of a one-level plan.
pub fn fit_single_level(
    model: &dyn LevelModel,
    level: u32,
    plan: &LevelPlan,
    options: &EstimatorOptions,
    seed: u64,
) -> Result<LevelSurrogate> {
    if plan.levels != 1 {
        return Err(Error::Plan(format!("single-level fit needs a one-level plan, got {} levels", plan.levels)));
    }
    if level == 0 {
        return Err(Error::Input("levels start at 1".into()));
    }
    fit_level(model, level, plan.samples[0], plan.degrees[0], Target::Value, options, seed)
}

/// `sum_l Delta g~_l`, each update fitted on fresh samples of its level.
#[derive(Debug, Clone, PartialEq)]
pub struct MultilevelSurrogate {
    pub levels: Vec<LevelSurrogate>,
    pub plan: LevelPlan,
    pub seed: u64,
}

pub fn fit_multilevel(
    model: &dyn LevelModel,
    plan: &LevelPlan,
    options: &EstimatorOptions,
    seed: u64,
) -> Result<MultilevelSurrogate> {
    let levels = (1..=plan.levels)
        .map(|l| fit_level(model, l, plan.samples_at(l), plan.degree_at(l), Target::Update, options, seed))
        .collect::<Result<Vec<_>>>()?;
    Ok(MultilevelSurrogate { levels, plan: plan.clone(), seed })
}

impl MultilevelSurrogate {
    pub fn eval(&self, y: &[f64]) -> Result<f64> {
        let mut s = 0.0;
        for l in &self.levels {
            s += l.surrogate.eval(y)?;
        }
        Ok(s)
    }

    /// Total work units over all levels and samples.
    pub fn work(&self) -> u64 {
        self.levels.iter().map(|l| l.work).sum()
    }

    pub fn samples(&self) -> Vec<usize> {
        self.levels.iter().map(|l| l.samples).collect()
    }

    /// Writes `manifest.json` and one surrogate file per level into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let mut entries = Vec::new();
        for l in &self.levels {
            let file = format!("level-{}.json", l.level);
            l.surrogate.save(&dir.join(&file))?;
            entries.push(ManifestLevel { level: l.level, file, samples: l.samples, work: l.work, seed: l.seed });
        }
        let manifest = Manifest {
            format: MANIFEST_FORMAT.into(),
            version: 1,
            seed: self.seed,
            plan: self.plan.clone(),
            total_work: self.work(),
            levels: entries,
        };
        fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let manifest: Manifest = serde_json::from_str(&fs::read_to_string(dir.join("manifest.json"))?)?;
        if manifest.format != MANIFEST_FORMAT || manifest.version != 1 {
            return Err(Error::Parse(format!("unsupported bundle {} v{}", manifest.format, manifest.version)));
        }
        if manifest.levels.is_empty() {
            return Err(Error::Parse("bundle lists no levels".into()));
        }
        let mut levels = Vec::new();
        for e in manifest.levels {
            let path: PathBuf = dir.join(&e.file);
            levels.push(LevelSurrogate {
                level: e.level,
                surrogate: Surrogate::load(&path)?,
                samples: e.samples,
                work: e.work,
                seed: e.seed,
            });
        }
        Ok(MultilevelSurrogate { levels, plan: manifest.plan, seed: manifest.seed })
    }
}

const MANIFEST_FORMAT: &str = "mltt-multilevel";

#[derive(Serialize, Deserialize)]
struct ManifestLevel {
    level: u32,
    file: String,
    samples: usize,
    work: u64,
    seed: u64,
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    format: String,
    version: u32,
    seed: u64,
    plan: LevelPlan,
    total_work: u64,
    levels: Vec<ManifestLevel>,
}

/// Work overhead: total work in units of one finest-level solve.
pub fn overhead(total_work: f64, finest_solve_work: f64) -> Result<f64> {
    if !(finest_solve_work > 0.0) || total_work < 0.0 {
        return Err(Error::Input(format!("overhead of {total_work} over {finest_solve_work}")));
    }
    Ok(total_work / finest_solve_work)
}
