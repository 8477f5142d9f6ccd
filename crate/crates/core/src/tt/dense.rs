use nalgebra::DMatrix;

use super::{linear_index, Shape};
use crate::error::{Error, Result};

/// Dense tensor stored in lexicographic (first-mode-fastest) order.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor {
    dims: Vec<usize>,
    data: Vec<f64>,
}

impl DenseTensor {
    pub fn from_vec(dims: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let size = Shape::new(dims.clone())?
            .size()
            .ok_or_else(|| Error::Resource("tensor size overflows usize".into()))?;
        if size != data.len() {
            return Err(Error::Input(format!("{} values for {} entries", data.len(), size)));
        }
        Ok(DenseTensor { dims, data })
    }

    pub fn zeros(dims: Vec<usize>) -> Result<Self> {
        let size = Shape::new(dims.clone())?
            .size()
            .ok_or_else(|| Error::Resource("tensor size overflows usize".into()))?;
        Ok(DenseTensor { dims, data: vec![0.0; size] })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn get(&self, index: &[usize]) -> f64 {
        self.data[linear_index(index, &self.dims)]
    }

    pub fn set(&mut self, index: &[usize], value: f64) {
        let p = linear_index(index, &self.dims);
        self.data[p] = value;
    }

    /// The `k`-unfolding: rows over modes `0..k`, columns over `k..M`.
    pub fn unfold(&self, k: usize) -> Result<DMatrix<f64>> {
        if k > self.dims.len() {
            return Err(Error::Input(format!("unfolding {k} of an order-{} tensor", self.dims.len())));
        }
        let rows: usize = self.dims[..k].iter().product();
        let cols: usize = self.dims[k..].iter().product();
        // The first-fastest layout coincides with column-major storage.
        Ok(DMatrix::from_column_slice(rows, cols, &self.data))
    }

    /// Inverse of [`DenseTensor::unfold`].
    pub fn fold(matrix: &DMatrix<f64>, dims: Vec<usize>) -> Result<Self> {
        Self::from_vec(dims, matrix.as_slice().to_vec())
    }

    pub fn max_abs_diff(&self, other: &DenseTensor) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}
