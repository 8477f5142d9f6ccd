//! Tensor-train representation with sparse component tensors.
//!
//! All indices are zero-based. Multi-indices are vectorised with the
//! lexicographic map in which the *first* mode varies fastest, so for
//! `dims = (d1, d2)` the entry `(i1, i2)` lives at `i1 + d1 * i2`.

mod canonical;
mod component;
mod dense;
mod sparse;

pub use canonical::{
    interface_grams, interface_weights, omega_orthogonal_canonicalize, omega_orthogonal_qc, omega_orthogonalize,
    sparse_canonicalize, InterfaceWeights, OmegaQc, ProductWeights,
};
pub use component::ComponentTensor;
pub use dense::DenseTensor;
pub use sparse::{sparse_qc, SparseMatrix, SparseQc};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default cap on the number of entries `tt_to_full` will materialise.
pub const DEFAULT_FULL_CAP: usize = 1 << 24;

/// Per-mode sizes of a tensor.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shape {
    dims: Vec<usize>,
}

impl Shape {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::Input("a shape needs at least one mode".into()));
        }
        if dims.contains(&0) {
            return Err(Error::Input(format!("mode sizes must be positive, got {dims:?}")));
        }
        Ok(Shape { dims })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn order(&self) -> usize {
        self.dims.len()
    }

    /// Total number of entries, `None` on overflow.
    pub fn size(&self) -> Option<usize> {
        self.dims.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d))
    }
}

/// Row and column index of `index` in the `split`-unfolding.
///
/// Returns `(phi_{<=split}, phi_{>split})`. With `split == order` the column
/// index is always zero and the row index is the full vectorisation index.
pub fn index_map(index: &[usize], shape: &Shape, split: usize) -> Result<(usize, usize)> {
    let dims = shape.dims();
    if index.len() != dims.len() {
        return Err(Error::Input(format!(
            "multi-index has {} entries, shape has {} modes",
            index.len(),
            dims.len()
        )));
    }
    if split > dims.len() {
        return Err(Error::Input(format!("split {split} exceeds order {}", dims.len())));
    }
    for (m, (&i, &d)) in index.iter().zip(dims).enumerate() {
        if i >= d {
            return Err(Error::Input(format!("index {i} out of range {d} in mode {m}")));
        }
    }
    Ok((
        linear_index(&index[..split], &dims[..split]),
        linear_index(&index[split..], &dims[split..]),
    ))
}

/// Lexicographic (first-fastest) linear index. Bounds are not checked.
pub fn linear_index(index: &[usize], dims: &[usize]) -> usize {
    let mut stride = 1;
    let mut out = 0;
    for (&i, &d) in index.iter().zip(dims) {
        out += i * stride;
        stride *= d;
    }
    out
}

/// Inverse of [`linear_index`].
pub fn multi_index(mut linear: usize, dims: &[usize]) -> Vec<usize> {
    dims.iter()
        .map(|&d| {
            let i = linear % d;
            linear /= d;
            i
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Orthogonality {
    Left,
    Right,
    None,
}

/// A chain of three-way components `A(1) o ... o A(M)` with boundary ranks one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorTrain {
    components: Vec<ComponentTensor>,
    core: Option<usize>,
    orthogonality: Vec<Orthogonality>,
}

impl TensorTrain {
    pub fn new(components: Vec<ComponentTensor>) -> Result<Self> {
        let n = components.len();
        Self::with_core(components, None, vec![Orthogonality::None; n])
    }

    /// Builds a train and validates rank compatibility and the core flags.
    pub fn with_core(
        components: Vec<ComponentTensor>,
        core: Option<usize>,
        orthogonality: Vec<Orthogonality>,
    ) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::Input("a tensor train needs at least one component".into()));
        }
        if orthogonality.len() != components.len() {
            return Err(Error::Input("one orthogonality flag per component expected".into()));
        }
        if components[0].left_rank() != 1 || components[components.len() - 1].right_rank() != 1 {
            return Err(Error::Input("boundary ranks must equal one".into()));
        }
        for (k, pair) in components.windows(2).enumerate() {
            if pair[0].right_rank() != pair[1].left_rank() {
                return Err(Error::Input(format!(
                    "rank mismatch between components {k} and {}: {} vs {}",
                    k + 1,
                    pair[0].right_rank(),
                    pair[1].left_rank()
                )));
            }
        }
        if let Some(k) = core {
            if k >= components.len() {
                return Err(Error::Input(format!("core position {k} out of range")));
            }
            for (j, flag) in orthogonality.iter().enumerate() {
                let expected = match j.cmp(&k) {
                    std::cmp::Ordering::Less => Orthogonality::Left,
                    std::cmp::Ordering::Greater => Orthogonality::Right,
                    std::cmp::Ordering::Equal => Orthogonality::None,
                };
                if *flag != expected {
                    return Err(Error::Input(format!(
                        "component {j} flagged {flag:?} but core is at {k}"
                    )));
                }
            }
        }
        Ok(TensorTrain { components, core, orthogonality })
    }

    /// A rank-one train holding `value` at the all-zero multi-index.
    pub fn constant(dims: &[usize], value: f64) -> Result<Self> {
        Shape::new(dims.to_vec())?;
        let components = dims
            .iter()
            .enumerate()
            .map(|(m, &d)| {
                let v = if m == 0 { value } else { 1.0 };
                ComponentTensor::from_entries((1, d, 1), [(0, 0, 0, v)])
            })
            .collect::<Result<Vec<_>>>()?;
        TensorTrain::new(components)
    }

    pub fn components(&self) -> &[ComponentTensor] {
        &self.components
    }

    pub fn component(&self, k: usize) -> &ComponentTensor {
        &self.components[k]
    }

    pub fn into_components(self) -> Vec<ComponentTensor> {
        self.components
    }

    pub fn core_position(&self) -> Option<usize> {
        self.core
    }

    pub fn orthogonality(&self) -> &[Orthogonality] {
        &self.orthogonality
    }

    pub fn order(&self) -> usize {
        self.components.len()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.components.iter().map(|c| c.mode_size()).collect()
    }

    /// Inner ranks `(r_1, ..., r_{M-1})`.
    pub fn ranks(&self) -> Vec<usize> {
        self.components[..self.order() - 1].iter().map(|c| c.right_rank()).collect()
    }

    pub fn shape(&self) -> Shape {
        Shape { dims: self.dims() }
    }

    /// Contracts the train against one vector per mode.
    ///
    /// `vectors[m]` must have length at least `dims[m]`.
    pub fn contract_vectors(&self, vectors: &[&[f64]]) -> f64 {
        let mut acc = vec![1.0];
        for (comp, v) in self.components.iter().zip(vectors) {
            let mut next = vec![0.0; comp.right_rank()];
            for &(a, t, b, x) in comp.entries() {
                next[b] += acc[a] * x * v[t];
            }
            acc = next;
        }
        acc[0]
    }

    /// Dense expansion `A(1) o ... o A(M)`, refused above `cap` entries.
    pub fn to_full(&self, cap: usize) -> Result<DenseTensor> {
        let dims = self.dims();
        let size = Shape { dims: dims.clone() }
            .size()
            .filter(|&s| s <= cap)
            .ok_or_else(|| Error::Resource(format!("dense expansion of {dims:?} exceeds cap {cap}")))?;
        // acc holds the partial contraction as a (prefix, rank) matrix, prefix fastest.
        let mut prefix = 1usize;
        let mut acc = vec![1.0];
        for comp in &self.components {
            let (_, d, rr) = comp.shape();
            let next_prefix = prefix * d;
            let mut next = vec![0.0; next_prefix * rr];
            for &(a, t, b, x) in comp.entries() {
                for p in 0..prefix {
                    let v = acc[p + prefix * a];
                    if v != 0.0 {
                        next[p + prefix * t + next_prefix * b] += v * x;
                    }
                }
            }
            prefix = next_prefix;
            acc = next;
        }
        debug_assert_eq!(acc.len(), size);
        DenseTensor::from_vec(dims, acc)
    }

    /// Number of stored nonzeros across all components.
    pub fn nnz(&self) -> usize {
        self.components.iter().map(|c| c.nnz()).sum()
    }
}

/// Free-function form of [`TensorTrain::to_full`].
pub fn tt_to_full(tt: &TensorTrain, cap: usize) -> Result<DenseTensor> {
    tt.to_full(cap)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_map_two_by_two() {
        let shape = Shape::new(vec![2, 2]).unwrap();
        // (2,1) and (1,2) in one-based notation map to 2 and 3.
        assert_eq!(index_map(&[1, 0], &shape, 2).unwrap(), (1, 0));
        assert_eq!(index_map(&[0, 1], &shape, 2).unwrap(), (2, 0));
    }

    #[test]
    fn index_map_origin_any_split() {
        let shape = Shape::new(vec![3, 4, 5]).unwrap();
        for split in 0..=3 {
            assert_eq!(index_map(&[0, 0, 0], &shape, split).unwrap(), (0, 0));
        }
    }

    #[test]
    fn index_map_splits_consistently() {
        let shape = Shape::new(vec![3, 4, 5]).unwrap();
        let (r, c) = index_map(&[2, 3, 1], &shape, 1).unwrap();
        assert_eq!((r, c), (2, 3 + 4));
        let (full, _) = index_map(&[2, 3, 1], &shape, 3).unwrap();
        assert_eq!(full, r + 3 * c);
    }

    #[test]
    fn index_map_rejects_out_of_range() {
        let shape = Shape::new(vec![2, 2]).unwrap();
        assert!(matches!(index_map(&[2, 0], &shape, 1), Err(Error::Input(_))));
        assert!(index_map(&[0, 0], &shape, 3).is_err());
        assert!(index_map(&[0], &shape, 1).is_err());
    }

    #[test]
    fn shape_rejects_zero_modes() {
        assert!(Shape::new(vec![]).is_err());
        assert!(Shape::new(vec![2, 0]).is_err());
    }

    #[test]
    fn rank_one_outer_product() {
        let a = ComponentTensor::from_dense((1, 2, 1), &[1.0, 2.0]).unwrap();
        let b = ComponentTensor::from_dense((1, 2, 1), &[3.0, 4.0]).unwrap();
        let tt = TensorTrain::new(vec![a, b]).unwrap();
        let full = tt.to_full(DEFAULT_FULL_CAP).unwrap();
        assert_eq!(full.get(&[0, 0]), 3.0);
        assert_eq!(full.get(&[0, 1]), 4.0);
        assert_eq!(full.get(&[1, 0]), 6.0);
        assert_eq!(full.get(&[1, 1]), 8.0);
    }

    #[test]
    fn single_component_is_itself() {
        let a = ComponentTensor::from_dense((1, 3, 1), &[1.0, -2.0, 0.5]).unwrap();
        let tt = TensorTrain::new(vec![a]).unwrap();
        assert_eq!(tt.to_full(10).unwrap().data(), &[1.0, -2.0, 0.5]);
    }

    #[test]
    fn rank_two_matches_explicit_sum() {
        // A1[0, i, r], A2[r, j, 0]
        let a1 = ComponentTensor::from_dense((1, 2, 2), &[1.0, 2.0, -1.0, 0.5]).unwrap();
        let a2 = ComponentTensor::from_dense((2, 3, 1), &[1.0, 3.0, 0.0, -2.0, 4.0, 1.0]).unwrap();
        let tt = TensorTrain::new(vec![a1.clone(), a2.clone()]).unwrap();
        let full = tt.to_full(100).unwrap();
        for i in 0..2 {
            for j in 0..3 {
                let expected: f64 = (0..2).map(|r| a1.get(0, i, r) * a2.get(r, j, 0)).sum();
                assert_eq!(full.get(&[i, j]), expected);
            }
        }
    }

    #[test]
    fn full_expansion_respects_cap() {
        let tt = TensorTrain::constant(&[10, 10, 10], 1.0).unwrap();
        assert!(matches!(tt.to_full(999), Err(Error::Resource(_))));
        assert!(tt.to_full(1000).is_ok());
    }

    #[test]
    fn rank_mismatch_rejected() {
        let a = ComponentTensor::from_dense((1, 2, 2), &[1.0; 4]).unwrap();
        let b = ComponentTensor::from_dense((1, 2, 1), &[1.0; 2]).unwrap();
        assert!(TensorTrain::new(vec![a, b]).is_err());
    }

    #[test]
    fn contraction_matches_dense() {
        let a1 = ComponentTensor::from_dense((1, 2, 2), &[1.0, 2.0, -1.0, 0.5]).unwrap();
        let a2 = ComponentTensor::from_dense((2, 3, 1), &[1.0, 3.0, 0.0, -2.0, 4.0, 1.0]).unwrap();
        let tt = TensorTrain::new(vec![a1, a2]).unwrap();
        let full = tt.to_full(100).unwrap();
        let u = [0.3, -1.2];
        let v = [2.0, 0.1, -0.7];
        let mut expected = 0.0;
        for i in 0..2 {
            for j in 0..3 {
                expected += full.get(&[i, j]) * u[i] * v[j];
            }
        }
        let got = tt.contract_vectors(&[&u, &v]);
        assert!((got - expected).abs() < 1e-14);
    }
}
