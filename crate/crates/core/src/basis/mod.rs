//! Polynomial basis and weight sequences.

mod budget;
mod legendre;
mod weights;

pub use budget::{sparsity_budget, ModelClassConfig, TheoryConstants};
pub use legendre::{alpha, gauss_legendre, legendre_eval, legendre_into, power_to_legendre};
pub use weights::{
    check_admissibility, weighted_best_sterm, weighted_norm, weighted_norm_seq, zeta, AdmissibilityReport,
    Condition, MultiIndex, NormKind, WeightSequence, BEST_STERM_EXHAUSTIVE,
};
