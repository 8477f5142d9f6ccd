use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Coordinate-list matrix with sorted (row-major), unique, nonzero entries.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl SparseMatrix {
    pub fn from_entries<I>(nrows: usize, ncols: usize, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let mut list: Vec<_> = entries.into_iter().collect();
        if let Some(&(i, j, _)) = list.iter().find(|&&(i, j, _)| i >= nrows || j >= ncols) {
            return Err(Error::Input(format!("entry ({i}, {j}) outside {nrows} x {ncols}")));
        }
        list.sort_by_key(|&(i, j, _)| (i, j));
        let mut merged: Vec<(usize, usize, f64)> = Vec::with_capacity(list.len());
        for (i, j, v) in list {
            match merged.last_mut() {
                Some(last) if (last.0, last.1) == (i, j) => last.2 += v,
                _ => merged.push((i, j, v)),
            }
        }
        merged.retain(|e| e.2 != 0.0);
        Ok(SparseMatrix { nrows, ncols, entries: merged })
    }

    pub fn identity(n: usize) -> Self {
        SparseMatrix { nrows: n, ncols: n, entries: (0..n).map(|i| (i, i, 1.0)).collect() }
    }

    pub fn from_dense(m: &DMatrix<f64>) -> Self {
        let entries = (0..m.nrows())
            .flat_map(|i| (0..m.ncols()).map(move |j| (i, j, m[(i, j)])))
            .filter(|e| e.2 != 0.0)
            .collect();
        SparseMatrix { nrows: m.nrows(), ncols: m.ncols(), entries }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn transpose(&self) -> Self {
        let mut entries: Vec<_> = self.entries.iter().map(|&(i, j, v)| (j, i, v)).collect();
        entries.sort_by_key(|&(i, j, _)| (i, j));
        SparseMatrix { nrows: self.ncols, ncols: self.nrows, entries }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.nrows, self.ncols);
        for &(i, j, v) in &self.entries {
            m[(i, j)] = v;
        }
        m
    }
}

/// `X = Q C` where the columns of `Q` are the unit vectors `e_s` for the
/// distinct nonzero rows `s` of `X`.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseQc {
    nrows: usize,
    rows: Vec<usize>,
    coeffs: SparseMatrix,
}

impl SparseQc {
    /// Selected rows, strictly increasing.
    pub fn rows(&self) -> &[usize] {
        &self.rows
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    /// The `r x m` coefficient matrix `C = Q^T X`.
    pub fn coeffs(&self) -> &SparseMatrix {
        &self.coeffs
    }

    /// The binary selection matrix `Q` (`n x r`).
    pub fn q(&self) -> SparseMatrix {
        SparseMatrix {
            nrows: self.nrows,
            ncols: self.rows.len(),
            entries: self.rows.iter().enumerate().map(|(c, &r)| (r, c, 1.0)).collect(),
        }
    }

    pub fn reconstruct(&self) -> SparseMatrix {
        let entries = self.coeffs.entries.iter().map(|&(c, j, v)| (self.rows[c], j, v));
        SparseMatrix::from_entries(self.nrows, self.coeffs.ncols, entries.collect::<Vec<_>>())
            .expect("selected rows lie inside the decomposed matrix")
    }
}

/// Sparse QC decomposition. An all-zero input yields rank zero.
pub fn sparse_qc(x: &SparseMatrix) -> SparseQc {
    let mut rows: Vec<usize> = x.entries.iter().map(|e| e.0).collect();
    rows.dedup(); // entries are row-major sorted
    let coeffs = SparseMatrix {
        nrows: rows.len(),
        ncols: x.ncols,
        entries: x
            .entries
            .iter()
            .map(|&(i, j, v)| (rows.binary_search(&i).expect("row collected above"), j, v))
            .collect(),
    };
    SparseQc { nrows: x.nrows, rows, coeffs }
}
