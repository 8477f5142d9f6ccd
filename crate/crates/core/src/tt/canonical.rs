//! Canonical forms: sparse canonicalisation with binary interfaces and the
//! omega-orthogonal variant with dense orthonormal interfaces.

use nalgebra::DMatrix;

use super::{sparse_qc, ComponentTensor, Orthogonality, SparseMatrix, TensorTrain};
use crate::error::{Error, Result};

/// Relative singular-value cutoff used to detect rank deficiency.
const RANK_TOL: f64 = 1e-12;

/// Product-structured weights: `omega_nu = prod_m mode_weight(m, nu_m)`.
pub trait ProductWeights {
    fn mode_weight(&self, mode: usize, index: usize) -> f64;
}

impl ProductWeights for [Vec<f64>] {
    fn mode_weight(&self, mode: usize, index: usize) -> f64 {
        self[mode][index]
    }
}

impl ProductWeights for Vec<Vec<f64>> {
    fn mode_weight(&self, mode: usize, index: usize) -> f64 {
        self[mode][index]
    }
}

impl<W: ProductWeights + ?Sized> ProductWeights for &W {
    fn mode_weight(&self, mode: usize, index: usize) -> f64 {
        (**self).mode_weight(mode, index)
    }
}

/// Weights of the core entries induced by the interface map `Q`.
///
/// The weight of core entry `(a, t, b)` is `left[a] * mode[t] * right[b]`
/// where `left`/`right` are the square roots of the diagonals of
/// `Q_left^T diag(omega^2) Q_left` (resp. right).
#[derive(Debug, Clone, PartialEq)]
pub struct InterfaceWeights {
    left: Vec<f64>,
    mode: Vec<f64>,
    right: Vec<f64>,
}

impl InterfaceWeights {
    pub fn new(left: Vec<f64>, mode: Vec<f64>, right: Vec<f64>) -> Self {
        InterfaceWeights { left, mode, right }
    }

    pub fn left(&self) -> &[f64] {
        &self.left
    }

    pub fn mode(&self) -> &[f64] {
        &self.mode
    }

    pub fn right(&self) -> &[f64] {
        &self.right
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.left.len(), self.mode.len(), self.right.len())
    }

    pub fn get(&self, a: usize, t: usize, b: usize) -> f64 {
        self.left[a] * self.mode[t] * self.right[b]
    }

    /// Flattened in core vectorisation order `a + rl * (t + d * b)`.
    pub fn values(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.left.len() * self.mode.len() * self.right.len());
        for &wb in &self.right {
            for &wt in &self.mode {
                for &wa in &self.left {
                    out.push(wa * wt * wb);
                }
            }
        }
        out
    }
}

/// Groups sorted component entries by their left index.
fn left_groups(comp: &ComponentTensor) -> Vec<std::ops::Range<usize>> {
    let entries = comp.entries();
    let mut ranges = vec![0..0; comp.left_rank()];
    let mut start = 0;
    while start < entries.len() {
        let a = entries[start].0;
        let mut end = start;
        while end < entries.len() && entries[end].0 == a {
            end += 1;
        }
        ranges[a] = start..end;
        start = end;
    }
    ranges
}

/// `unfold_left(C o A)` for a sparse `C` of shape `r' x r_left(A)`.
fn contract_left(c: &SparseMatrix, comp: &ComponentTensor) -> SparseMatrix {
    let (_, d, rr) = comp.shape();
    let rp = c.nrows();
    let groups = left_groups(comp);
    let entries = comp.entries();
    let mut out = Vec::new();
    for &(p, a, cv) in c.entries() {
        for &(_, t, b, v) in &entries[groups[a].clone()] {
            out.push((p + rp * t, b, cv * v));
        }
    }
    SparseMatrix::from_entries(rp * d, rr, out).expect("indices bounded by construction")
}

/// `unfold_right(A o C)` for a sparse `C` of shape `r_right(A) x r''`.
fn contract_right(comp: &ComponentTensor, c: &SparseMatrix) -> SparseMatrix {
    let (rl, d, _) = comp.shape();
    let rpp = c.ncols();
    let mut row_ranges = vec![0..0; c.nrows()];
    let ce = c.entries();
    let mut start = 0;
    while start < ce.len() {
        let b = ce[start].0;
        let mut end = start;
        while end < ce.len() && ce[end].0 == b {
            end += 1;
        }
        row_ranges[b] = start..end;
        start = end;
    }
    let mut out = Vec::new();
    for &(a, t, b, v) in comp.entries() {
        for &(_, q, cv) in &ce[row_ranges[b].clone()] {
            out.push((a, t + d * q, v * cv));
        }
    }
    SparseMatrix::from_entries(rl, d * rpp, out).expect("indices bounded by construction")
}

/// Sparse canonicalisation with the core at `k` (zero-based).
///
/// Non-core components become binary and orthogonal; the represented tensor
/// is reproduced exactly because only entries of the input are copied and
/// summed. A slice that is entirely zero keeps a single (zero) rank index.
pub fn sparse_canonicalize(tt: &TensorTrain, k: usize) -> Result<TensorTrain> {
    let m = tt.order();
    if k >= m {
        return Err(Error::Input(format!("core position {k} out of range for order {m}")));
    }
    let mut comps: Vec<Option<ComponentTensor>> = vec![None; m];

    let mut carry = SparseMatrix::identity(1);
    for j in 0..k {
        let a = tt.component(j);
        let rp = carry.nrows();
        let x = contract_left(&carry, a);
        let qc = sparse_qc(&x);
        let (rows, coeffs) = if qc.rank() == 0 {
            (vec![0], SparseMatrix::from_entries(1, x.ncols(), std::iter::empty())?)
        } else {
            (qc.rows().to_vec(), qc.coeffs().clone())
        };
        let r_new = rows.len();
        let u = ComponentTensor::from_entries(
            (rp, a.mode_size(), r_new),
            rows.iter().enumerate().map(|(col, &row)| (row % rp, row / rp, col, 1.0)).collect::<Vec<_>>(),
        )?;
        comps[j] = Some(u);
        carry = coeffs;
    }
    let left_carry = carry;

    let mut carry = SparseMatrix::identity(1);
    for j in (k + 1..m).rev() {
        let a = tt.component(j);
        let d = a.mode_size();
        let rpp = carry.ncols();
        let x = contract_right(a, &carry);
        let qc = sparse_qc(&x.transpose());
        let (cols, coeffs_t) = if qc.rank() == 0 {
            (vec![0], SparseMatrix::from_entries(1, x.nrows(), std::iter::empty())?)
        } else {
            (qc.rows().to_vec(), qc.coeffs().clone())
        };
        let r_new = cols.len();
        let v = ComponentTensor::from_entries(
            (r_new, d, rpp),
            cols.iter().enumerate().map(|(row, &col)| (row, col % d, col / d, 1.0)).collect::<Vec<_>>(),
        )?;
        comps[j] = Some(v);
        carry = coeffs_t.transpose();
    }
    let right_carry = carry;

    let a = tt.component(k);
    let d = a.mode_size();
    let x = contract_left(&left_carry, a); // (r' * d) x r_right
    let rp = left_carry.nrows();
    let as_comp = ComponentTensor::from_entries(
        (rp, d, x.ncols()),
        x.entries().iter().map(|&(row, b, v)| (row % rp, row / rp, b, v)).collect::<Vec<_>>(),
    )?;
    let y = contract_right(&as_comp, &right_carry); // r' x (d * r'')
    let rpp = right_carry.ncols();
    let core = ComponentTensor::from_entries(
        (rp, d, rpp),
        y.entries().iter().map(|&(a, col, v)| (a, col % d, col / d, v)).collect::<Vec<_>>(),
    )?;
    comps[k] = Some(core);

    let flags = (0..m)
        .map(|j| match j.cmp(&k) {
            std::cmp::Ordering::Less => Orthogonality::Left,
            std::cmp::Ordering::Greater => Orthogonality::Right,
            std::cmp::Ordering::Equal => Orthogonality::None,
        })
        .collect();
    TensorTrain::with_core(comps.into_iter().map(|c| c.expect("all filled")).collect(), Some(k), flags)
}

/// Result of an omega-orthogonal QC step: `X = Q C`, `Q^T Q = I`,
/// `Q^T diag(w) Q = diag(g)`.
#[derive(Debug, Clone)]
pub struct OmegaQc {
    pub q: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub g: Vec<f64>,
}

/// Rotates orthonormal columns `q` so that `q^T diag(w) q` is diagonal.
///
/// `w` holds squared weights. Returns the rotated basis and the diagonal,
/// sorted in decreasing order.
pub fn omega_orthogonalize(q: &DMatrix<f64>, w: &[f64]) -> Result<(DMatrix<f64>, Vec<f64>)> {
    if q.nrows() != w.len() {
        return Err(Error::Input(format!("{} weights for {} rows", w.len(), q.nrows())));
    }
    if w.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::Input("omega-orthogonalisation needs finite nonnegative weights".into()));
    }
    let mut wq = q.clone();
    for (mut row, &wi) in wq.row_iter_mut().zip(w) {
        row *= wi;
    }
    let mut gram = q.transpose() * wq;
    gram = (&gram + gram.transpose()) * 0.5;
    let eig = gram.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let v = DMatrix::from_fn(eig.eigenvectors.nrows(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    let rotated = q * v;
    let g = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
    Ok((rotated, g))
}

/// Orthonormal and `w`-orthogonal factorisation of `x` with rank detection.
pub fn omega_orthogonal_qc(x: &DMatrix<f64>, w: &[f64]) -> Result<OmegaQc> {
    let (n, m) = x.shape();
    let smax = if n == 0 || m == 0 { 0.0 } else { x.amax() };
    let basis = if smax == 0.0 {
        None
    } else {
        let svd = x.clone().svd(true, false);
        let u = svd.u.ok_or_else(|| Error::Internal("svd did not return U".into()))?;
        let s0 = svd.singular_values.max();
        let keep: Vec<usize> =
            (0..svd.singular_values.len()).filter(|&i| svd.singular_values[i] > RANK_TOL * s0).collect();
        if keep.is_empty() {
            None
        } else {
            Some(DMatrix::from_fn(n, keep.len(), |r, c| u[(r, keep[c])]))
        }
    };
    match basis {
        None => {
            let mut q = DMatrix::zeros(n, 1);
            q[(0, 0)] = 1.0;
            Ok(OmegaQc { q, c: DMatrix::zeros(1, m), g: vec![w[0]] })
        }
        Some(p) => {
            let (q, g) = omega_orthogonalize(&p, w)?;
            let c = q.transpose() * x;
            Ok(OmegaQc { q, c, g })
        }
    }
}

fn dense_left(carry: &DMatrix<f64>, comp: &ComponentTensor) -> DMatrix<f64> {
    let rp = carry.nrows();
    let (_, d, rr) = comp.shape();
    let mut x = DMatrix::zeros(rp * d, rr);
    for &(a, t, b, v) in comp.entries() {
        for p in 0..rp {
            x[(p + rp * t, b)] += carry[(p, a)] * v;
        }
    }
    x
}

fn dense_right(comp: &ComponentTensor, carry: &DMatrix<f64>) -> DMatrix<f64> {
    let (rl, d, _) = comp.shape();
    let rpp = carry.ncols();
    let mut x = DMatrix::zeros(rl, d * rpp);
    for &(a, t, b, v) in comp.entries() {
        for q in 0..rpp {
            x[(a, t + d * q)] += v * carry[(b, q)];
        }
    }
    x
}

/// Canonicalisation whose interfaces are orthonormal and omega^2-orthogonal.
///
/// The represented tensor is preserved up to round-off; ranks drop where an
/// interface is numerically rank deficient.
pub fn omega_orthogonal_canonicalize<W: ProductWeights + ?Sized>(
    tt: &TensorTrain,
    k: usize,
    omega: &W,
) -> Result<(TensorTrain, InterfaceWeights)> {
    let m = tt.order();
    if k >= m {
        return Err(Error::Input(format!("core position {k} out of range for order {m}")));
    }
    let dims = tt.dims();
    let sq = |mode: usize| -> Result<Vec<f64>> {
        (0..dims[mode])
            .map(|t| {
                let w = omega.mode_weight(mode, t);
                if w.is_finite() {
                    Ok(w * w)
                } else {
                    Err(Error::Input("omega-orthogonal canonicalisation needs finite weights".into()))
                }
            })
            .collect()
    };
    let mut comps: Vec<Option<ComponentTensor>> = vec![None; m];

    let mut carry = DMatrix::from_element(1, 1, 1.0);
    let mut g_left = vec![1.0];
    for j in 0..k {
        let a = tt.component(j);
        let d = a.mode_size();
        let rp = carry.nrows();
        let x = dense_left(&carry, a);
        let wj = sq(j)?;
        let w: Vec<f64> = (0..rp * d).map(|row| g_left[row % rp] * wj[row / rp]).collect();
        let qc = omega_orthogonal_qc(&x, &w)?;
        comps[j] = Some(ComponentTensor::fold_left(&qc.q, rp, d)?);
        carry = qc.c;
        g_left = qc.g;
    }

    let mut right_carry = DMatrix::from_element(1, 1, 1.0);
    let mut g_right = vec![1.0];
    for j in (k + 1..m).rev() {
        let a = tt.component(j);
        let d = a.mode_size();
        let rpp = right_carry.ncols();
        let x = dense_right(a, &right_carry);
        let wj = sq(j)?;
        let w: Vec<f64> = (0..d * rpp).map(|col| wj[col % d] * g_right[col / d]).collect();
        let qc = omega_orthogonal_qc(&x.transpose(), &w)?;
        comps[j] = Some(ComponentTensor::fold_right(&qc.q.transpose(), d, rpp)?);
        right_carry = qc.c.transpose();
        g_right = qc.g;
    }

    let a = tt.component(k);
    let d = a.mode_size();
    let rp = carry.nrows();
    let x = dense_left(&carry, a);
    let tmp = ComponentTensor::fold_left(&x, rp, d)?;
    let y = dense_right(&tmp, &right_carry);
    comps[k] = Some(ComponentTensor::fold_right(&y, d, right_carry.ncols())?);

    let flags = (0..m)
        .map(|j| match j.cmp(&k) {
            std::cmp::Ordering::Less => Orthogonality::Left,
            std::cmp::Ordering::Greater => Orthogonality::Right,
            std::cmp::Ordering::Equal => Orthogonality::None,
        })
        .collect();
    let out = TensorTrain::with_core(comps.into_iter().map(|c| c.expect("all filled")).collect(), Some(k), flags)?;
    let mode: Vec<f64> = (0..d).map(|t| omega.mode_weight(k, t)).collect();
    let weights = InterfaceWeights::new(
        g_left.iter().map(|g| g.sqrt()).collect(),
        mode,
        g_right.iter().map(|g| g.sqrt()).collect(),
    );
    Ok((out, weights))
}

/// Gram matrices `Q_left^T diag(omega^2) Q_left` and the right analogue for
/// a train with its core at `k`.
pub fn interface_grams<W: ProductWeights + ?Sized>(
    tt: &TensorTrain,
    k: usize,
    omega: &W,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let mut left = DMatrix::from_element(1, 1, 1.0);
    for j in 0..k {
        let comp = tt.component(j);
        let rr = comp.right_rank();
        let mut next = DMatrix::zeros(rr, rr);
        let e = comp.entries();
        for &(a, t, b, u) in e {
            let wt = omega.mode_weight(j, t);
            for &(a2, t2, b2, u2) in e {
                if t2 != t {
                    continue;
                }
                let g = left[(a, a2)];
                if g != 0.0 {
                    next[(b, b2)] += u * u2 * g * wt * wt;
                }
            }
        }
        left = next;
    }
    let m = tt.order();
    let mut right = DMatrix::from_element(1, 1, 1.0);
    for j in (k + 1..m).rev() {
        let comp = tt.component(j);
        let rl = comp.left_rank();
        let mut next = DMatrix::zeros(rl, rl);
        let e = comp.entries();
        for &(a, t, b, u) in e {
            let wt = omega.mode_weight(j, t);
            for &(a2, t2, b2, u2) in e {
                if t2 != t {
                    continue;
                }
                let g = right[(b, b2)];
                if g != 0.0 {
                    next[(a, a2)] += u * u2 * g * wt * wt;
                }
            }
        }
        right = next;
    }
    (left, right)
}

/// Core-entry weights for a train whose interfaces are omega^2-orthogonal
/// (which includes every sparse canonical form).
pub fn interface_weights<W: ProductWeights + ?Sized>(tt: &TensorTrain, k: usize, omega: &W) -> InterfaceWeights {
    let (left, right) = interface_grams(tt, k, omega);
    let d = tt.component(k).mode_size();
    InterfaceWeights::new(
        left.diagonal().iter().map(|g| g.sqrt()).collect(),
        (0..d).map(|t| omega.mode_weight(k, t)).collect(),
        right.diagonal().iter().map(|g| g.sqrt()).collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tt::DEFAULT_FULL_CAP;

    fn rank_one(values: &[&[f64]]) -> TensorTrain {
        TensorTrain::new(
            values
                .iter()
                .map(|v| ComponentTensor::from_dense((1, v.len(), 1), v).unwrap())
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn hand_example_core_at_two() {
        let tt = rank_one(&[&[1.0, 0.0], &[2.0, 3.0]]);
        let c = sparse_canonicalize(&tt, 1).unwrap();
        assert_eq!(c.component(0).entries(), &[(0, 0, 0, 1.0)]);
        assert_eq!(c.component(1).shape(), (1, 2, 1));
        assert_eq!(c.component(1).to_dense(), vec![2.0, 3.0]);
        assert_eq!(c.to_full(10).unwrap(), tt.to_full(10).unwrap());
    }

    #[test]
    fn canonical_train_is_stable() {
        let tt = rank_one(&[&[0.0, 1.0, 2.0], &[1.0, 0.0], &[0.5, 0.0, -1.0]]);
        for k in 0..3 {
            let once = sparse_canonicalize(&tt, k).unwrap();
            let twice = sparse_canonicalize(&once, k).unwrap();
            assert_eq!(once, twice);
            assert_eq!(once.core_position(), Some(k));
        }
    }

    #[test]
    fn zero_train_keeps_valid_ranks() {
        let tt = rank_one(&[&[0.0, 0.0], &[1.0, 2.0], &[3.0, 0.0]]);
        for k in 0..3 {
            let c = sparse_canonicalize(&tt, k).unwrap();
            assert!(c.ranks().iter().all(|&r| r >= 1));
            assert!(c.to_full(100).unwrap().data().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn binary_interfaces_give_direct_weights() {
        let tt = rank_one(&[&[1.0, 2.0], &[0.0, 3.0, 1.0]]);
        let omega = vec![vec![1.0, 2.0], vec![1.0, 3.0, 5.0]];
        let c = sparse_canonicalize(&tt, 1).unwrap();
        let w = interface_weights(&c, 1, &omega);
        assert_eq!(w.shape(), (2, 3, 1));
        assert_eq!(w.get(1, 2, 0), 2.0 * 5.0);
    }

    #[test]
    fn rotated_interface_is_corrected() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let q = DMatrix::from_row_slice(2, 2, &[s, -s, s, s]);
        let (q2, g) = omega_orthogonalize(&q, &[1.0, 4.0]).unwrap();
        assert!((g[0] - 4.0).abs() < 1e-12 && (g[1] - 1.0).abs() < 1e-12);
        // Columns are determined up to sign.
        assert!(q2[(0, 0)].abs() < 1e-12 && (q2[(1, 0)].abs() - 1.0).abs() < 1e-12);
        assert!((q2[(0, 1)].abs() - 1.0).abs() < 1e-12 && q2[(1, 1)].abs() < 1e-12);
    }

    #[test]
    fn identity_interface_unchanged() {
        let q = DMatrix::identity(3, 3);
        let (q2, g) = omega_orthogonalize(&q, &[9.0, 4.0, 1.0]).unwrap();
        assert_eq!(g, vec![9.0, 4.0, 1.0]);
        for i in 0..3 {
            assert!((q2[(i, i)].abs() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn unit_weights_keep_gram_diagonal() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let q = DMatrix::from_row_slice(3, 2, &[s, 0.0, s, 0.0, 0.0, 1.0]);
        let (q2, g) = omega_orthogonalize(&q, &[1.0, 1.0, 1.0]).unwrap();
        assert!(g.iter().all(|v| (v - 1.0).abs() < 1e-12));
        let gram = q2.transpose() * &q2;
        assert!((gram - DMatrix::identity(2, 2)).amax() < 1e-12);
    }

    #[test]
    fn omega_canonical_form_preserves_tensor() {
        let a1 = ComponentTensor::from_dense((1, 3, 2), &[1.0, 0.5, -1.0, 0.2, 2.0, 0.0]).unwrap();
        let a2 = ComponentTensor::from_dense((2, 2, 2), &[1.0, -1.0, 0.3, 0.7, 2.0, 1.0, 0.0, 0.4]).unwrap();
        let a3 = ComponentTensor::from_dense((2, 3, 1), &[0.1, 1.0, -0.5, 0.0, 0.25, 2.0]).unwrap();
        let tt = TensorTrain::new(vec![a1, a2, a3]).unwrap();
        let omega = vec![vec![1.0, 2.0, 3.0], vec![1.0, 1.5], vec![1.0, 4.0, 2.0]];
        let full = tt.to_full(DEFAULT_FULL_CAP).unwrap();
        for k in 0..3 {
            let (c, w) = omega_orthogonal_canonicalize(&tt, k, &omega).unwrap();
            assert!(c.to_full(DEFAULT_FULL_CAP).unwrap().max_abs_diff(&full) < 1e-12);
            let (gl, gr) = interface_grams(&c, k, &omega);
            for g in [&gl, &gr] {
                let off = g - DMatrix::from_diagonal(&g.diagonal());
                assert!(off.amax() <= 1e-10 * g.trace());
            }
            let w2 = interface_weights(&c, k, &omega);
            for (x, y) in w.values().iter().zip(w2.values()) {
                assert!((x - y).abs() < 1e-10 * x.max(1.0));
            }
        }
    }
}
