//! Design operator of the ALS microstep.

use nalgebra::DMatrix;

use super::SampleSet;
use crate::basis::legendre_into;
use crate::error::{Error, Result};
use crate::tt::TensorTrain;

/// Legendre values `L_t(y_{i,m})` for every sample and mode.
#[derive(Debug, Clone)]
pub struct BasisValues {
    dims: Vec<usize>,
    offsets: Vec<usize>,
    stride: usize,
    data: Vec<f64>,
}

impl BasisValues {
    pub fn new(points: &[Vec<f64>], dims: &[usize]) -> Result<Self> {
        let mut offsets = Vec::with_capacity(dims.len());
        let mut stride = 0;
        for &d in dims {
            offsets.push(stride);
            stride += d;
        }
        let mut data = vec![0.0; stride * points.len()];
        for (i, y) in points.iter().enumerate() {
            if y.len() != dims.len() {
                return Err(Error::Input(format!("point has {} coordinates, expected {}", y.len(), dims.len())));
            }
            for (m, &ym) in y.iter().enumerate() {
                if !(-1.0..=1.0).contains(&ym) {
                    return Err(Error::Input(format!("coordinate {ym} outside [-1, 1]")));
                }
                let start = i * stride + offsets[m];
                legendre_into(ym, &mut data[start..start + dims[m]]);
            }
        }
        Ok(BasisValues { dims: dims.to_vec(), offsets, stride, data })
    }

    pub fn len(&self) -> usize {
        if self.stride == 0 {
            0
        } else {
            self.data.len() / self.stride
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn values(&self, sample: usize, mode: usize) -> &[f64] {
        let start = sample * self.stride + self.offsets[mode];
        &self.data[start..start + self.dims[mode]]
    }
}

/// Contracted interface stacks `(left, right)` at sample `i` for core `k`.
pub(crate) fn stacks(basis: &BasisValues, tt: &TensorTrain, k: usize, i: usize) -> (Vec<f64>, Vec<f64>) {
    let mut left = vec![1.0];
    for j in 0..k {
        let comp = tt.component(j);
        let v = basis.values(i, j);
        let mut next = vec![0.0; comp.right_rank()];
        for &(a, t, b, x) in comp.entries() {
            next[b] += left[a] * x * v[t];
        }
        left = next;
    }
    let mut right = vec![1.0];
    for j in (k + 1..tt.order()).rev() {
        let comp = tt.component(j);
        let v = basis.values(i, j);
        let mut next = vec![0.0; comp.left_rank()];
        for &(a, t, b, x) in comp.entries() {
            next[a] += x * v[t] * right[b];
        }
        right = next;
    }
    (left, right)
}

/// Design matrix for the core at `k`: column `a + rl (t + d b)` holds
/// `left_a(y_i) L_t(y_{i,k}) right_b(y_i)`.
pub fn design_matrix(basis: &BasisValues, tt: &TensorTrain, k: usize) -> Result<DMatrix<f64>> {
    if tt.dims() != basis.dims() {
        return Err(Error::Internal(format!("train dims {:?} differ from basis dims {:?}", tt.dims(), basis.dims())));
    }
    let (rl, d, rr) = tt.component(k).shape();
    let n = basis.len();
    let p = rl * d * rr;
    if n.saturating_mul(p) > 1 << 28 {
        return Err(Error::Resource(format!("design matrix {n}x{p} too large")));
    }
    let mut a = DMatrix::zeros(n, p);
    for i in 0..n {
        let (left, right) = stacks(basis, tt, k, i);
        let v = basis.values(i, k);
        for (b, &rb) in right.iter().enumerate() {
            if rb == 0.0 {
                continue;
            }
            for (t, &vt) in v.iter().enumerate() {
                let s = vt * rb;
                for (ai, &la) in left.iter().enumerate() {
                    a[(i, ai + rl * (t + d * b))] = la * s;
                }
            }
        }
    }
    Ok(a)
}

/// Design matrix and right-hand side `F_i = sqrt(w_i) g(y_i)` (rows scaled
/// by `sqrt(w_i)`) for a train whose core sits at `k`.
pub fn build_design(samples: &SampleSet, tt: &TensorTrain, k: usize) -> Result<(DMatrix<f64>, Vec<f64>)> {
    if tt.core_position() != Some(k) {
        return Err(Error::Internal(format!("core expected at {k}, found {:?}", tt.core_position())));
    }
    let basis = BasisValues::new(samples.points(), &tt.dims())?;
    let mut a = design_matrix(&basis, tt, k)?;
    let mut f = samples.values().to_vec();
    for (i, &w) in samples.weights().iter().enumerate() {
        if w != 1.0 {
            let s = w.sqrt();
            a.row_mut(i).scale_mut(s);
            f[i] *= s;
        }
    }
    Ok((a, f))
}
