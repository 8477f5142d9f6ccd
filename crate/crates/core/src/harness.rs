//! Experiment configuration, reference test sets and the resumable result
//! grid.

use std::collections::HashSet;
use std::fs::{self, OpenOptions};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{rmse, TestSet};
use crate::basis::WeightSequence;
use crate::error::{Error, Result};
use crate::fem::{reference_qoi_with, DiffusionProblem, Hierarchy};
use crate::multilevel::{fit_multilevel, plan_samples, EstimatorOptions, FemModel, PlanParams};
use crate::regression::{draw_points, Algorithm, FitConfig};
use crate::seed::{derive_seed, rng_for};

/// Test-set size and reference discretisation (`h = 2^-elements_log2`,
/// quadratic elements).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReferenceConfig {
    pub test_size: usize,
    pub elements_log2: u32,
}

impl Default for ReferenceConfig {
    fn default() -> Self {
        ReferenceConfig { test_size: 1000, elements_log2: 14 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: DiffusionProblem,
    /// Finest mesh width `h_L = 2^-finest_log2`, shared by every `L`.
    pub finest_log2: u32,
    pub levels: Vec<u32>,
    /// Constant `c` of `n_{l,k} = c 2^{k/2} 2^{(L-l)/2}`.
    pub schedule_c: f64,
    pub k: Vec<u32>,
    pub trials: usize,
    pub algorithms: Vec<Algorithm>,
    pub weights: Vec<WeightSequence>,
    /// Polynomial degree bound per mode on every level.
    pub degree: usize,
    pub reference: ReferenceConfig,
    pub fit: FitConfig,
    pub seed: u64,
    pub output: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            problem: DiffusionProblem::experiment(),
            finest_log2: 10,
            levels: (1..=5).collect(),
            schedule_c: 8.0,
            k: (1..=10).collect(),
            trials: 20,
            algorithms: vec![Algorithm::Sals, Algorithm::Ssals],
            weights: vec![WeightSequence::ExpWeak, WeightSequence::ExpStrong],
            degree: 5,
            reference: ReferenceConfig::default(),
            fit: FitConfig::default(),
            seed: 0,
            output: PathBuf::from("results"),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: ExperimentConfig = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.problem.validate()?;
        if self.levels.is_empty() || self.k.is_empty() || self.algorithms.is_empty() || self.weights.is_empty() {
            return Err(Error::Input("levels, k, algorithms and weights must be non-empty".into()));
        }
        for &l in &self.levels {
            if l == 0 || l > self.finest_log2 {
                return Err(Error::Input(format!("L = {l} must lie in 1..={}", self.finest_log2)));
            }
        }
        if self.finest_log2 > 30 || self.reference.elements_log2 > 30 {
            return Err(Error::Input("mesh exponents above 30 are not supported".into()));
        }
        if self.reference.test_size == 0 {
            return Err(Error::Input("test set must not be empty".into()));
        }
        Ok(())
    }

    pub fn finest_elements(&self) -> usize {
        1usize << self.finest_log2
    }

    pub fn results_path(&self) -> PathBuf {
        self.output.join("results.csv")
    }

    /// Cache key of the reference test set: problem, seed and resolution.
    fn reference_key(&self) -> u64 {
        let p = &self.problem;
        derive_seed(
            self.seed,
            &[
                p.a0.to_bits(),
                p.eta.to_bits(),
                p.m as u64,
                p.source.to_bits(),
                self.reference.test_size as u64,
                self.reference.elements_log2 as u64,
            ],
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ReferenceFile {
    problem: DiffusionProblem,
    seed: u64,
    elements: usize,
    points: Vec<Vec<f64>>,
    values: Vec<f64>,
}

/// Stream reserved for test points, disjoint from all grid-cell streams.
const REFERENCE_STREAM: u64 = u64::MAX;

/// Reference test set for the configured problem: read from the cache in
/// the output directory, or computed and written there.
pub fn make_reference(config: &ExperimentConfig) -> Result<(PathBuf, TestSet)> {
    config.validate()?;
    fs::create_dir_all(&config.output)?;
    let path = config.output.join(format!("reference-{:016x}.json", config.reference_key()));
    let elements = 1usize << config.reference.elements_log2;
    if path.exists() {
        let file: ReferenceFile = serde_json::from_str(&fs::read_to_string(&path)?)?;
        if file.problem == config.problem && file.seed == config.seed && file.elements == elements {
            return Ok((path, TestSet::new(file.points, file.values)?));
        }
    }
    let test = build_reference(&config.problem, config.reference.test_size, elements, config.seed)?;
    let file = ReferenceFile {
        problem: config.problem.clone(),
        seed: config.seed,
        elements,
        points: test.points.clone(),
        values: test.values.clone(),
    };
    let tmp = path.with_extension("json.tmp");
    fs::write(&tmp, serde_json::to_string(&file)?)?;
    fs::rename(&tmp, &path)?;
    Ok((path, test))
}

/// `size` uniform points with degree-2 reference QoIs on `elements` elements.
pub fn build_reference(problem: &DiffusionProblem, size: usize, elements: usize, seed: u64) -> Result<TestSet> {
    let mut rng = rng_for(seed, &[REFERENCE_STREAM]);
    let points = draw_points(&mut rng, size, problem.m);
    let values = points.par_iter().map(|y| reference_qoi_with(problem, y, elements)).collect::<Result<Vec<_>>>()?;
    TestSet::new(points, values)
}

/// One grid cell's outcome; field names are the CSV header.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub trial: usize,
    pub algorithm: Algorithm,
    pub weights: String,
    #[serde(rename = "L")]
    pub levels: u32,
    pub k: u32,
    /// Per-level sample counts joined by `;`.
    pub n_levels: String,
    pub work_est: f64,
    pub wall_ms: f64,
    /// NaN marks a failed fit.
    pub rmse: f64,
    /// Sweeps summed over levels.
    pub sweeps: usize,
    /// Nonzero core entries summed over levels.
    pub core_sparsity: usize,
}

type CellKey = (usize, Algorithm, String, u32, u32);

impl ResultRow {
    fn key(&self) -> CellKey {
        (self.trial, self.algorithm, self.weights.clone(), self.levels, self.k)
    }
}

#[derive(Debug, Clone)]
struct Cell {
    trial: usize,
    algorithm: Algorithm,
    weights: WeightSequence,
    levels: u32,
    k: u32,
}

impl Cell {
    fn key(&self) -> CellKey {
        (self.trial, self.algorithm, self.weights.id(), self.levels, self.k)
    }
}

fn grid(config: &ExperimentConfig) -> Vec<Cell> {
    let mut cells = Vec::new();
    for trial in 0..config.trials {
        for &algorithm in &config.algorithms {
            for weights in &config.weights {
                for &levels in &config.levels {
                    for &k in &config.k {
                        cells.push(Cell { trial, algorithm, weights: weights.clone(), levels, k });
                    }
                }
            }
        }
    }
    cells
}

/// Seed of one estimator: shared by algorithms and weight sequences so
/// they are compared on the same samples.
pub fn cell_seed(root: u64, trial: usize, levels: u32, k: u32) -> u64 {
    derive_seed(root, &[trial as u64, levels as u64, k as u64])
}

/// Sample counts of the `(L, k)` estimator.
pub fn cell_plan(config: &ExperimentConfig, levels: u32, k: u32) -> Result<crate::multilevel::LevelPlan> {
    plan_samples(&PlanParams::experiment(levels, config.schedule_c, k, config.degree))
}

fn run_cell(config: &ExperimentConfig, test: &TestSet, cell: &Cell) -> Result<ResultRow> {
    let start = Instant::now();
    let hierarchy = Hierarchy::with_finest(config.finest_elements(), cell.levels)?;
    let plan = cell_plan(config, cell.levels, cell.k)?;
    let work_est = plan.work_estimate(hierarchy.h0());
    let model = FemModel { problem: config.problem.clone(), hierarchy };
    let options = EstimatorOptions { algorithm: cell.algorithm, weights: cell.weights.clone(), fit: config.fit.clone() };
    let n_levels = plan.samples.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(";");
    let mut row = ResultRow {
        trial: cell.trial,
        algorithm: cell.algorithm,
        weights: cell.weights.id(),
        levels: cell.levels,
        k: cell.k,
        n_levels,
        work_est,
        wall_ms: 0.0,
        rmse: f64::NAN,
        sweeps: 0,
        core_sparsity: 0,
    };
    let seed = cell_seed(config.seed, cell.trial, cell.levels, cell.k);
    if let Ok(fit) = fit_multilevel(&model, &plan, &options, seed) {
        if fit.work() as f64 != work_est {
            return Err(Error::Internal(format!("measured work {} differs from estimate {work_est}", fit.work())));
        }
        row.rmse = rmse(|y| fit.eval(y), test).unwrap_or(f64::NAN);
        row.sweeps = fit.levels.iter().map(|l| l.surrogate.diagnostics.sweeps).sum();
        row.core_sparsity = fit
            .levels
            .iter()
            .map(|l| l.surrogate.tt.core_position().map(|k| l.surrogate.tt.component(k).nnz()).unwrap_or(0))
            .sum();
    }
    row.wall_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok(row)
}

/// Counts of one `run_experiment` call.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RunSummary {
    pub written: usize,
    pub skipped: usize,
    pub failed: usize,
}

/// Rows already present in a results file.
pub fn read_rows(path: &Path) -> Result<Vec<ResultRow>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let mut reader = csv::Reader::from_path(path)?;
    reader.deserialize().map(|r| r.map_err(Error::from)).collect()
}

/// Runs every missing grid cell, appending rows to `results.csv` in grid
/// order. Cells run in parallel batches; a single writer flushes each batch.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunSummary> {
    config.validate()?;
    let (_, test) = make_reference(config)?;
    let path = config.results_path();
    let done: HashSet<CellKey> = read_rows(&path)?.iter().map(ResultRow::key).collect();
    let todo: Vec<Cell> = grid(config).into_iter().filter(|c| !done.contains(&c.key())).collect();
    let mut summary = RunSummary { skipped: done.len(), ..Default::default() };
    let has_header = path.exists() && fs::metadata(&path)?.len() > 0;
    let file = OpenOptions::new().create(true).append(true).open(&path)?;
    let mut writer = csv::WriterBuilder::new().has_headers(!has_header).from_writer(file);
    let batch = rayon::current_num_threads().max(1);
    for chunk in todo.chunks(batch) {
        let rows = chunk.par_iter().map(|c| run_cell(config, &test, c)).collect::<Result<Vec<_>>>()?;
        for row in rows {
            if row.rmse.is_nan() {
                summary.failed += 1;
            }
            writer.serialize(&row)?;
            summary.written += 1;
        }
        writer.flush()?;
    }
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let c = ExperimentConfig::default();
        let text = c.to_toml().unwrap();
        assert_eq!(ExperimentConfig::from_toml(&text).unwrap(), c);
        assert_eq!(ExperimentConfig::from_toml("").unwrap(), c);
        assert!(ExperimentConfig::from_toml("bogus = 1").is_err());
    }

    #[test]
    fn default_grid_size() {
        let c = ExperimentConfig::default();
        assert_eq!(grid(&c).len(), 5 * 10 * 2 * 2 * 20);
    }

    #[test]
    fn partial_toml_keeps_defaults() {
        let c = ExperimentConfig::from_toml("trials = 2\nlevels = [1, 3]\n[problem]\na0 = 2.0\neta = 2.0\nm = 3\nsource = 1.0\n").unwrap();
        assert_eq!(c.trials, 2);
        assert_eq!(c.problem.m, 3);
        assert_eq!(c.k.len(), 10);
    }

    #[test]
    fn seeds_depend_on_cell_only() {
        assert_eq!(cell_seed(1, 2, 3, 4), cell_seed(1, 2, 3, 4));
        assert_ne!(cell_seed(1, 2, 3, 4), cell_seed(1, 2, 4, 3));
    }
}
