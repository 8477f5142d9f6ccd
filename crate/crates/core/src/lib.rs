//! Sparse tensor-train surrogates for affine-parametric diffusion problems,
//! with single-level and multilevel weighted least-squares estimators.

pub mod analysis;
pub mod basis;
pub mod error;
pub mod fem;
pub mod harness;
pub mod multilevel;
pub mod regression;
pub mod seed;
pub mod tt;

pub use error::{Error, Result};
