use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sparse three-way tensor of shape `(r_left, d, r_right)`.
///
/// Entries are kept sorted by `(i, j, k)`, unique, and nonzero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentTensor {
    shape: (usize, usize, usize),
    entries: Vec<(usize, usize, usize, f64)>,
}

impl ComponentTensor {
    /// Builds a component from coordinates; duplicates are summed, zeros dropped.
    pub fn from_entries<I>(shape: (usize, usize, usize), entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, usize, f64)>,
    {
        let (rl, d, rr) = shape;
        if rl == 0 || d == 0 || rr == 0 {
            return Err(Error::Input(format!("component shape {shape:?} has an empty mode")));
        }
        let mut list: Vec<_> = entries.into_iter().collect();
        for &(i, j, k, v) in &list {
            if i >= rl || j >= d || k >= rr {
                return Err(Error::Input(format!(
                    "entry ({i}, {j}, {k}) outside component shape {shape:?}"
                )));
            }
            if !v.is_finite() {
                return Err(Error::Input(format!("non-finite entry at ({i}, {j}, {k})")));
            }
        }
        list.sort_by_key(|&(i, j, k, _)| (i, j, k));
        let mut merged: Vec<(usize, usize, usize, f64)> = Vec::with_capacity(list.len());
        for (i, j, k, v) in list {
            match merged.last_mut() {
                Some(last) if (last.0, last.1, last.2) == (i, j, k) => last.3 += v,
                _ => merged.push((i, j, k, v)),
            }
        }
        merged.retain(|e| e.3 != 0.0);
        Ok(ComponentTensor { shape, entries: merged })
    }

    /// Builds a component from dense values in `i + rl * (j + d * k)` order.
    pub fn from_dense(shape: (usize, usize, usize), values: &[f64]) -> Result<Self> {
        let (rl, d, rr) = shape;
        if values.len() != rl * d * rr {
            return Err(Error::Input(format!(
                "expected {} values for shape {shape:?}, got {}",
                rl * d * rr,
                values.len()
            )));
        }
        let entries = (0..rr).flat_map(move |k| {
            (0..d).flat_map(move |j| (0..rl).map(move |i| (i, j, k, values[i + rl * (j + d * k)])))
        });
        Self::from_entries(shape, entries)
    }

    pub fn zeros(shape: (usize, usize, usize)) -> Result<Self> {
        Self::from_entries(shape, std::iter::empty())
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        self.shape
    }

    pub fn left_rank(&self) -> usize {
        self.shape.0
    }

    pub fn mode_size(&self) -> usize {
        self.shape.1
    }

    pub fn right_rank(&self) -> usize {
        self.shape.2
    }

    pub fn entries(&self) -> &[(usize, usize, usize, f64)] {
        &self.entries
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.entries
            .binary_search_by_key(&(i, j, k), |&(a, b, c, _)| (a, b, c))
            .map(|p| self.entries[p].3)
            .unwrap_or(0.0)
    }

    /// Dense values in `i + rl * (j + d * k)` order.
    pub fn to_dense(&self) -> Vec<f64> {
        let (rl, d, rr) = self.shape;
        let mut out = vec![0.0; rl * d * rr];
        for &(i, j, k, v) in &self.entries {
            out[i + rl * (j + d * k)] = v;
        }
        out
    }

    /// Left unfolding: `(rl * d) x rr` with row `i + rl * j`.
    pub fn unfold_left(&self) -> DMatrix<f64> {
        let (rl, d, rr) = self.shape;
        let mut m = DMatrix::zeros(rl * d, rr);
        for &(i, j, k, v) in &self.entries {
            m[(i + rl * j, k)] = v;
        }
        m
    }

    /// Right unfolding: `rl x (d * rr)` with column `j + d * k`.
    pub fn unfold_right(&self) -> DMatrix<f64> {
        let (rl, d, rr) = self.shape;
        let mut m = DMatrix::zeros(rl, d * rr);
        for &(i, j, k, v) in &self.entries {
            m[(i, j + d * k)] = v;
        }
        m
    }

    /// Inverse of [`ComponentTensor::unfold_left`].
    pub fn fold_left(m: &DMatrix<f64>, rl: usize, d: usize) -> Result<Self> {
        if m.nrows() != rl * d {
            return Err(Error::Internal(format!("cannot fold {} rows into {rl} x {d}", m.nrows())));
        }
        let rr = m.ncols();
        let entries = (0..rr).flat_map(|k| {
            (0..rl * d).map(move |row| (row % rl, row / rl, k, m[(row, k)]))
        });
        Self::from_entries((rl, d, rr), entries.collect::<Vec<_>>())
    }

    /// Inverse of [`ComponentTensor::unfold_right`].
    pub fn fold_right(m: &DMatrix<f64>, d: usize, rr: usize) -> Result<Self> {
        if m.ncols() != d * rr {
            return Err(Error::Internal(format!("cannot fold {} columns into {d} x {rr}", m.ncols())));
        }
        let rl = m.nrows();
        let entries = (0..rl).flat_map(|i| (0..d * rr).map(move |col| (i, col % d, col / d, m[(i, col)])));
        Self::from_entries((rl, d, rr), entries.collect::<Vec<_>>())
    }

    /// True when every stored value is exactly one.
    pub fn is_binary(&self) -> bool {
        self.entries.iter().all(|e| e.3 == 1.0)
    }
}
