//! Model-class budgets and the constants behind the level planner.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sparsity budget `r`, accuracy `gamma` and degree bound of a model class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelClassConfig {
    pub budget: f64,
    pub gamma: f64,
    /// `s = 1/p - 1`.
    pub sparsity_exponent: f64,
    pub degree: usize,
}

impl ModelClassConfig {
    /// `r(gamma) = gamma^{-1/s}` with the smallest degree bound
    /// `N >= (r - 1)/2`, capped at `max_degree`.
    pub fn for_accuracy(gamma: f64, p: f64, max_degree: usize) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::Input(format!("accuracy must be positive, got {gamma}")));
        }
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::Input(format!("summability exponent p must lie in (0, 1), got {p}")));
        }
        let s = 1.0 / p - 1.0;
        let budget = sparsity_budget(gamma, s);
        let degree = (((budget - 1.0) / 2.0).max(0.0).ceil() as usize).min(max_degree);
        Ok(ModelClassConfig { budget, gamma, sparsity_exponent: s, degree })
    }
}

/// `r(gamma) = gamma^{-1/s}`.
pub fn sparsity_budget(gamma: f64, s: f64) -> f64 {
    gamma.powf(-1.0 / s)
}

/// Constants of the decay, sample-complexity and work assumptions.
/// `a`, `b`, `c` are usually unknown.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TheoryConstants {
    /// Level decay rate.
    pub alpha: f64,
    /// Sample-complexity exponent.
    pub beta: f64,
    /// Work exponent (the physical dimension for linear solvers).
    pub delta_work: f64,
    pub n0: f64,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub c: Option<f64>,
}

impl Default for TheoryConstants {
    fn default() -> Self {
        // alpha*beta = 1/2 gives the 2^{(L-l)/2} growth of the experiment schedule.
        TheoryConstants { alpha: 2.0, beta: 0.25, delta_work: 1.0, n0: 1.0, a: None, b: None, c: None }
    }
}

impl TheoryConstants {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta), ("n0", self.n0)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Input(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.delta_work > 0.0 && self.delta_work.is_finite()) {
            return Err(Error::Input(format!("delta_work must be positive, got {}", self.delta_work)));
        }
        Ok(())
    }

    /// Multilevel premise `delta_work > alpha * beta`.
    pub fn multilevel_premise(&self) -> bool {
        self.delta_work > self.alpha * self.beta
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn budget_at_unit_accuracy() {
        let c = ModelClassConfig::for_accuracy(1.0, 0.5, 10).unwrap();
        assert_eq!(c.budget, 1.0);
        assert_eq!(c.degree, 0);
    }

    #[test]
    fn degree_follows_budget() {
        // p = 1/2 -> s = 1 -> r = 1/gamma.
        let c = ModelClassConfig::for_accuracy(0.1, 0.5, 100).unwrap();
        assert!((c.budget - 10.0).abs() < 1e-12);
        assert_eq!(c.degree, 5);
        assert_eq!(ModelClassConfig::for_accuracy(0.1, 0.5, 3).unwrap().degree, 3);
    }

    #[test]
    fn premise() {
        let mut t = TheoryConstants::default();
        assert!(t.multilevel_premise());
        t.beta = 1.0;
        assert!(!t.multilevel_premise());
        assert!(ModelClassConfig::for_accuracy(0.0, 0.5, 1).is_err());
    }
}
