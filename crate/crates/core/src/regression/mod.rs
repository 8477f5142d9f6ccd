//! Weighted least-squares fitting in sparse tensor-train model classes.

mod als;
mod design;
mod lasso;
mod surrogate;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use als::{fit, sals_fit, ssals_fit};
pub use design::{build_design, design_matrix, BasisValues};
pub use lasso::{lambda_cv, weighted_lasso, weighted_lasso_with, CvOptions, CvResult, LambdaGrid, LassoOptions};
pub use surrogate::{surrogate_eval, Algorithm, FitDiagnostics, MicrostepRecord, Surrogate};

/// Training data `(y_i, g(y_i))` with weights `w(y_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    points: Vec<Vec<f64>>,
    values: Vec<f64>,
    weights: Vec<f64>,
    seed: Option<u64>,
}

impl SampleSet {
    /// Unit weights.
    pub fn new(points: Vec<Vec<f64>>, values: Vec<f64>) -> Result<Self> {
        let n = points.len();
        Self::with_weights(points, values, vec![1.0; n])
    }

    pub fn with_weights(points: Vec<Vec<f64>>, values: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if points.len() != values.len() || points.len() != weights.len() {
            return Err(Error::Input(format!(
                "{} points, {} values and {} weights",
                points.len(),
                values.len(),
                weights.len()
            )));
        }
        if let Some(first) = points.first() {
            if points.iter().any(|p| p.len() != first.len()) {
                return Err(Error::Input("points of different dimension".into()));
            }
        }
        if values.iter().any(|v| !v.is_finite()) || weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::Input("values must be finite and weights positive".into()));
        }
        Ok(SampleSet { points, values, weights, seed: None })
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// `n` i.i.d. uniform points in `[-1, 1]^m`.
pub fn draw_points<R: Rng + ?Sized>(rng: &mut R, n: usize, m: usize) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..m).map(|_| rng.gen_range(-1.0..=1.0)).collect()).collect()
}

/// Sweep and penalty settings shared by both alternating schemes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    pub lambda_grid: LambdaGrid,
    pub cv: CvOptions,
    pub max_sweeps: usize,
    /// Stop when the validation error improves by less than this fraction
    /// over two sweeps.
    pub tol: f64,
    /// Stop once the relative validation error falls below this value.
    pub floor: f64,
    /// Rank cap for the semi-sparse scheme's rank increases.
    pub max_rank: usize,
    /// The semi-sparse scheme raises ranks after a sweep improving the
    /// validation error by less than this fraction.
    pub kick_tol: f64,
    /// The semi-sparse scheme drops singular values below this multiple of
    /// the current relative validation error when moving the core.
    pub truncation: f64,
    /// Amplitude of the random slice added on a rank increase.
    pub kick_scale: f64,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            lambda_grid: LambdaGrid::default(),
            cv: CvOptions::default(),
            max_sweeps: 20,
            tol: 1e-3,
            floor: 1e-12,
            max_rank: 8,
            kick_tol: 0.5,
            truncation: 2.0,
            kick_scale: 1e-2,
            seed: 0,
        }
    }
}
