//! Weighted LASSO `||F - A c||^2 + lambda ||w . c||_1` by coordinate descent
//! with active sets, an exact polish on the support, and lambda selection by
//! cross-validation.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Candidate penalties for cross-validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LambdaGrid {
    /// `count` log-spaced values from `lambda_max` down to `min`.
    Auto { count: usize, min: f64 },
    /// Explicit values, tried from largest to smallest.
    Fixed(Vec<f64>),
}

impl Default for LambdaGrid {
    fn default() -> Self {
        LambdaGrid::Auto { count: 16, min: 1e-8 }
    }
}

impl LambdaGrid {
    /// Values in decreasing order for the given `lambda_max`.
    pub fn values(&self, lambda_max: f64) -> Vec<f64> {
        let mut v = match self {
            LambdaGrid::Fixed(v) => v.clone(),
            LambdaGrid::Auto { count, min } => {
                if lambda_max <= *min || *count <= 1 {
                    vec![lambda_max.max(0.0)]
                } else {
                    let (hi, lo) = (lambda_max.ln(), min.ln());
                    (0..*count).map(|i| (hi + (lo - hi) * i as f64 / (*count - 1) as f64).exp()).collect()
                }
            }
        };
        v.sort_by(|a, b| b.total_cmp(a));
        v.dedup();
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LassoOptions {
    /// Relative coordinate-change tolerance.
    pub tol: f64,
    /// Cap on coordinate sweeps over the working set.
    pub max_sweeps: usize,
}

impl Default for LassoOptions {
    fn default() -> Self {
        LassoOptions { tol: 1e-8, max_sweeps: 2_000 }
    }
}

/// Coordinate sweeps between attempts at the exact support solution.
const POLISH_EVERY: usize = 10;

/// Four-way unrolled inner product.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0; 4];
    let chunks = n / 4;
    for c in 0..chunks {
        let i = 4 * c;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in 4 * chunks..n {
        s += a[i] * b[i];
    }
    s
}

fn soft(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

/// Solver state for one design matrix, optionally restricted to a subset of
/// rows (the training rows of a cross-validation fold). Excluded rows keep
/// a zero residual, so every inner product runs over the full matrix.
pub(crate) struct Lasso<'a> {
    a: &'a DMatrix<f64>,
    /// Target, zeroed on excluded rows.
    f: Vec<f64>,
    w: &'a [f64],
    mask: Option<Vec<f64>>,
    col_sq: Vec<f64>,
    free: Vec<bool>,
    f_sq: f64,
    opts: LassoOptions,
}

pub(crate) struct LassoState {
    pub c: Vec<f64>,
    /// `F - A c` on included rows, zero elsewhere.
    pub r: Vec<f64>,
}

pub(crate) struct LassoOutcome {
    pub converged: bool,
    pub sweeps: usize,
}

impl<'a> Lasso<'a> {
    pub fn new(a: &'a DMatrix<f64>, f: &[f64], w: &'a [f64], opts: LassoOptions) -> Self {
        Self::build(a, f.to_vec(), w, None, opts)
    }

    /// Restricted to the rows with `rows[i] == true`.
    pub fn with_rows(a: &'a DMatrix<f64>, f: &[f64], w: &'a [f64], rows: &[bool], opts: LassoOptions) -> Self {
        let mask: Vec<f64> = rows.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
        let f = f.iter().zip(&mask).map(|(v, m)| v * m).collect();
        Self::build(a, f, w, Some(mask), opts)
    }

    fn build(a: &'a DMatrix<f64>, f: Vec<f64>, w: &'a [f64], mask: Option<Vec<f64>>, opts: LassoOptions) -> Self {
        let col_sq: Vec<f64> = match &mask {
            None => a.column_iter().map(|c| c.norm_squared()).collect(),
            Some(m) => a.column_iter().map(|c| c.iter().zip(m).map(|(x, m)| m * x * x).sum()).collect(),
        };
        let free = (0..a.ncols()).map(|j| w[j].is_finite() && col_sq[j] > 0.0).collect();
        let f_sq = f.iter().map(|v| v * v).sum();
        Lasso { a, f, w, mask, col_sq, free, f_sq, opts }
    }

    pub fn zero_state(&self) -> LassoState {
        LassoState { c: vec![0.0; self.a.ncols()], r: self.f.clone() }
    }

    /// Column `j` as a contiguous slice (storage is column-major).
    fn col(&self, j: usize) -> &[f64] {
        let n = self.a.nrows();
        &self.a.as_slice()[j * n..(j + 1) * n]
    }

    fn grad(&self, j: usize, r: &[f64]) -> f64 {
        dot(self.col(j), r)
    }

    /// `A^T r` for all columns.
    fn grads(&self, r: &[f64]) -> Vec<f64> {
        let g = self.a.tr_mul(&DVector::from_column_slice(r));
        g.iter().zip(&self.free).map(|(&g, &f)| if f { g } else { 0.0 }).collect()
    }

    /// `r -= delta * a_j` on included rows.
    fn update_residual(&self, j: usize, delta: f64, r: &mut [f64]) {
        let col = self.col(j);
        match &self.mask {
            None => {
                for (ri, aij) in r.iter_mut().zip(col) {
                    *ri -= aij * delta;
                }
            }
            Some(m) => {
                for ((ri, aij), mi) in r.iter_mut().zip(col).zip(m) {
                    *ri -= mi * aij * delta;
                }
            }
        }
    }

    /// Smallest penalty whose solution is zero.
    pub fn lambda_max(&self) -> f64 {
        let g = self.grads(&self.f);
        let mut m: f64 = 0.0;
        for j in 0..self.a.ncols() {
            if self.free[j] && self.w[j] > 0.0 {
                m = m.max(2.0 * g[j].abs() / self.w[j]);
            }
        }
        m
    }

    fn threshold(&self, j: usize, lambda: f64) -> f64 {
        0.5 * lambda * self.w[j]
    }

    /// Duality gap of `state` at `lambda`.
    pub fn gap(&self, state: &LassoState, lambda: f64) -> f64 {
        let r_sq: f64 = state.r.iter().map(|v| v * v).sum();
        let penalty: f64 =
            (0..state.c.len()).filter(|&j| state.c[j] != 0.0).map(|j| lambda * self.w[j] * state.c[j].abs()).sum();
        let g = self.grads(&state.r);
        let mut scale: f64 = 1.0;
        for j in 0..state.c.len() {
            if self.free[j] && g[j] != 0.0 {
                scale = scale.min(self.threshold(j, lambda) / g[j].abs());
            }
        }
        let rf: f64 = state.r.iter().zip(&self.f).map(|(a, b)| a * b).sum();
        let primal = r_sq + penalty;
        let dual = 2.0 * scale * rf - scale * scale * r_sq;
        (primal - dual).max(0.0)
    }

    fn cd(&self, lambda: f64, set: &[usize], state: &mut LassoState, budget: &mut usize) -> bool {
        let tol_sq = (self.opts.tol * self.opts.tol * self.f_sq).max(f64::MIN_POSITIVE);
        while *budget > 0 {
            *budget -= 1;
            let mut max_change: f64 = 0.0;
            for &j in set {
                let old = state.c[j];
                let rho = self.grad(j, &state.r) + self.col_sq[j] * old;
                let new = soft(rho, self.threshold(j, lambda)) / self.col_sq[j];
                let delta = new - old;
                if delta != 0.0 {
                    state.c[j] = new;
                    self.update_residual(j, delta, &mut state.r);
                    max_change = max_change.max(delta * delta * self.col_sq[j]);
                }
            }
            if max_change <= tol_sq {
                return true;
            }
        }
        false
    }

    /// Solves at `lambda` starting from `state`; `prev` enables the strong
    /// screening rule.
    pub fn solve(&self, lambda: f64, prev: Option<f64>, state: &mut LassoState) -> LassoOutcome {
        let p = self.a.ncols();
        let mut budget = self.opts.max_sweeps;
        let grads = self.grads(&state.r);
        // Strong rule, but never looser than the current optimality violators:
        // on coarse grids `2 lambda - lambda_prev` is negative and would admit
        // every column.
        let screen = prev.map(|lp| (2.0 * lambda - lp).max(lambda)).unwrap_or(lambda);
        let mut in_set = vec![false; p];
        for j in 0..p {
            if self.free[j] && (state.c[j] != 0.0 || grads[j].abs() >= 0.5 * screen * self.w[j]) {
                in_set[j] = true;
            }
        }
        let mut converged = false;
        loop {
            let set: Vec<usize> = (0..p).filter(|&j| in_set[j]).collect();
            // Coordinate descent mainly has to find the support: every few
            // sweeps the exact solution on the current support is tried,
            // and accepted once it passes all optimality checks.
            let mut ok = false;
            // Sign pattern of the last failed polish; retrying it is pointless.
            let mut failed: Vec<(usize, bool)> = Vec::new();
            while budget > 0 {
                let mut chunk = POLISH_EVERY.min(budget);
                budget -= chunk;
                ok = self.cd(lambda, &set, state, &mut chunk);
                budget += chunk;
                if ok {
                    break;
                }
                let pattern: Vec<(usize, bool)> =
                    set.iter().filter(|&&j| state.c[j] != 0.0).map(|&j| (j, state.c[j] > 0.0)).collect();
                if pattern != failed {
                    if self.polish(lambda, state) {
                        break;
                    }
                    failed = pattern;
                }
            }
            if !ok && budget > 0 {
                return LassoOutcome { converged: true, sweeps: self.opts.max_sweeps - budget };
            }
            let grads = self.grads(&state.r);
            let mut violators = false;
            for j in 0..p {
                if self.free[j] && !in_set[j] && grads[j].abs() > self.threshold(j, lambda) * (1.0 + 1e-12) {
                    in_set[j] = true;
                    violators = true;
                }
            }
            if !violators {
                converged = ok;
                break;
            }
            if budget == 0 {
                break;
            }
        }
        self.polish(lambda, state);
        LassoOutcome { converged, sweeps: self.opts.max_sweeps - budget }
    }

    /// Replaces the iterate by the exact solution of the optimality system
    /// on its support when that solution is sign-consistent and satisfies
    /// the optimality conditions off the support.
    fn polish(&self, lambda: f64, state: &mut LassoState) -> bool {
        let support: Vec<usize> = (0..state.c.len()).filter(|&j| state.c[j] != 0.0).collect();
        let s = support.len();
        if s == 0 || s > self.a.nrows() {
            return false;
        }
        let a_s = DMatrix::from_fn(self.a.nrows(), s, |i, k| {
            let m = self.mask.as_ref().map(|m| m[i]).unwrap_or(1.0);
            m * self.a[(i, support[k])]
        });
        let gram = a_s.transpose() * &a_s;
        let mut rhs = a_s.tr_mul(&DVector::from_column_slice(&self.f));
        for (k, &j) in support.iter().enumerate() {
            rhs[k] -= self.threshold(j, lambda) * state.c[j].signum();
        }
        let Some(chol) = gram.cholesky() else { return false };
        let sol = chol.solve(&rhs);
        if support.iter().enumerate().any(|(k, &j)| sol[k] == 0.0 || sol[k].signum() != state.c[j].signum()) {
            return false;
        }
        let fitted = &a_s * &sol;
        let r: Vec<f64> = self.f.iter().zip(fitted.iter()).map(|(f, v)| f - v).collect();
        let g = self.grads(&r);
        let scale = self.f_sq.sqrt() * 1e-13;
        for j in 0..state.c.len() {
            if self.free[j] && state.c[j] == 0.0 {
                if g[j].abs() > self.threshold(j, lambda) * (1.0 + 1e-9) + scale * self.col_sq[j].sqrt() {
                    return false;
                }
            }
        }
        for (k, &j) in support.iter().enumerate() {
            state.c[j] = sol[k];
        }
        state.r = r;
        true
    }
}

fn check_inputs(a: &DMatrix<f64>, f: &[f64], w: &[f64]) -> Result<()> {
    if a.nrows() != f.len() || a.ncols() != w.len() {
        return Err(Error::Input(format!(
            "design {}x{} does not match {} targets and {} weights",
            a.nrows(),
            a.ncols(),
            f.len(),
            w.len()
        )));
    }
    if w.iter().any(|v| v.is_nan() || *v < 0.0) {
        return Err(Error::Input("weights must be nonnegative (infinity excludes a column)".into()));
    }
    if f.iter().chain(a.iter()).any(|v| !v.is_finite()) {
        return Err(Error::Input("non-finite design or target".into()));
    }
    Ok(())
}

/// Minimiser of `||F - A c||_2^2 + lambda sum_j w_j |c_j|`.
///
/// Columns with infinite weight are held at zero.
pub fn weighted_lasso(a: &DMatrix<f64>, f: &[f64], w: &[f64], lambda: f64) -> Result<Vec<f64>> {
    weighted_lasso_with(a, f, w, lambda, LassoOptions::default())
}

pub fn weighted_lasso_with(a: &DMatrix<f64>, f: &[f64], w: &[f64], lambda: f64, opts: LassoOptions) -> Result<Vec<f64>> {
    check_inputs(a, f, w)?;
    if !(lambda >= 0.0) {
        return Err(Error::Input(format!("penalty {lambda} must be nonnegative")));
    }
    let solver = Lasso::new(a, f, w, opts);
    let mut state = solver.zero_state();
    let out = solver.solve(lambda, None, &mut state);
    if !out.converged {
        return Err(Error::Convergence { iterations: out.sweeps, gap: solver.gap(&state, lambda) });
    }
    Ok(state.c)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CvOptions {
    pub folds: usize,
    pub lasso: LassoOptions,
    /// The path is abandoned once the pooled validation error exceeds its
    /// running minimum by this factor.
    pub early_stop: f64,
}

impl Default for CvOptions {
    fn default() -> Self {
        CvOptions { folds: 5, lasso: LassoOptions::default(), early_stop: 2.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvResult {
    pub lambda: f64,
    pub coeffs: Vec<f64>,
    /// `sqrt(sum of held-out squared residuals / sum F^2)` at the chosen
    /// penalty, pooled over folds.
    pub validation_error: f64,
    /// Relative training residual of the refit.
    pub train_error: f64,
}

/// Chooses `lambda` by `folds`-fold cross-validation (sample `i` belongs to
/// fold `i mod folds`), ties going to the larger value, then refits on all
/// samples. The grid is descended while every fold's fit converges with
/// fewer nonzeros than training rows and the pooled validation error stays
/// within `early_stop` times its running minimum.
pub fn lambda_cv(a: &DMatrix<f64>, f: &[f64], w: &[f64], grid: &LambdaGrid, opts: &CvOptions) -> Result<CvResult> {
    check_inputs(a, f, w)?;
    let n = f.len();
    if opts.folds < 2 || n < opts.folds {
        return Err(Error::Input(format!("{n} samples cannot be split into {} folds", opts.folds)));
    }
    let full = Lasso::new(a, f, w, opts.lasso);
    let lambdas = grid.values(full.lambda_max());
    if lambdas.is_empty() || lambdas.iter().any(|l| !(*l >= 0.0)) {
        return Err(Error::Input("lambda grid must contain nonnegative values".into()));
    }
    let f_sq: f64 = f.iter().map(|v| v * v).sum();
    let mut ssr: Vec<f64> = Vec::with_capacity(lambdas.len());
    if lambdas.len() > 1 {
        let rows: Vec<Vec<bool>> = (0..opts.folds).map(|fold| (0..n).map(|i| i % opts.folds != fold).collect()).collect();
        let solvers: Vec<Lasso> = rows.iter().map(|r| Lasso::with_rows(a, f, w, r, opts.lasso)).collect();
        let mut states: Vec<LassoState> = solvers.iter().map(|s| s.zero_state()).collect();
        let mut prev = None;
        let mut min_ssr = f64::INFINITY;
        'path: for &lambda in &lambdas {
            let mut total = 0.0;
            for (fold, (solver, state)) in solvers.iter().zip(states.iter_mut()).enumerate() {
                let out = solver.solve(lambda, prev, state);
                let nnz = state.c.iter().filter(|c| **c != 0.0).count();
                let train = n - (n + opts.folds - 1 - fold) / opts.folds;
                if prev.is_some() && (!out.converged || nnz >= train) {
                    break 'path;
                }
                for i in (fold..n).step_by(opts.folds) {
                    let mut res = f[i];
                    for (j, &cj) in state.c.iter().enumerate() {
                        if cj != 0.0 {
                            res -= a[(i, j)] * cj;
                        }
                    }
                    total += res * res;
                }
            }
            prev = Some(lambda);
            ssr.push(total);
            min_ssr = min_ssr.min(total);
            if total > opts.early_stop * min_ssr {
                break;
            }
        }
    }
    let mut best = 0;
    for li in 1..ssr.len() {
        if ssr[li] < ssr[best] {
            best = li;
        }
    }
    let mut state = full.zero_state();
    let mut prev = None;
    for &lambda in &lambdas[..=best] {
        full.solve(lambda, prev, &mut state);
        prev = Some(lambda);
    }
    let denom = if f_sq > 0.0 { f_sq } else { 1.0 };
    let train_sq: f64 = state.r.iter().map(|v| v * v).sum();
    let validation_error = if ssr.is_empty() { (train_sq / denom).sqrt() } else { (ssr[best] / denom).sqrt() };
    Ok(CvResult {
        lambda: lambdas[best],
        coeffs: state.c,
        validation_error,
        train_error: (train_sq / denom).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_soft_threshold() {
        let a = DMatrix::identity(2, 2);
        let c = weighted_lasso(&a, &[3.0, 0.5], &[1.0, 1.0], 1.0).unwrap();
        assert!((c[0] - 2.5).abs() < 1e-14 && c[1] == 0.0);
        let c = weighted_lasso(&a, &[3.0, 0.5], &[1.0, 10.0], 1.0).unwrap();
        assert!((c[0] - 2.5).abs() < 1e-14 && c[1] == 0.0);
    }

    #[test]
    fn zero_penalty_is_least_squares() {
        let a = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 1.0, 1.0, 1.0, 2.0, 1.0, 3.0]);
        let f = [1.0, 2.0, 2.0, 4.0];
        let c = weighted_lasso(&a, &f, &[1.0, 1.0], 0.0).unwrap();
        let ls = (a.transpose() * &a).cholesky().unwrap().solve(&(a.transpose() * DVector::from_column_slice(&f)));
        assert!((c[0] - ls[0]).abs() < 1e-12 && (c[1] - ls[1]).abs() < 1e-12);
    }

    #[test]
    fn infinite_weight_columns_stay_zero() {
        let a = DMatrix::identity(2, 2);
        let c = weighted_lasso(&a, &[3.0, 5.0], &[1.0, f64::INFINITY], 0.0).unwrap();
        assert_eq!(c, vec![3.0, 0.0]);
    }

    #[test]
    fn single_lambda_grid_is_kept() {
        let a = DMatrix::from_fn(10, 3, |i, j| ((i * 7 + j * 3) % 5) as f64 - 2.0);
        let f: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let res = lambda_cv(&a, &f, &[1.0; 3], &LambdaGrid::Fixed(vec![0.7]), &CvOptions::default()).unwrap();
        assert_eq!(res.lambda, 0.7);
    }

    #[test]
    fn too_few_samples_for_folds() {
        let a = DMatrix::identity(3, 3);
        assert!(lambda_cv(&a, &[1.0, 2.0, 3.0], &[1.0; 3], &LambdaGrid::default(), &CvOptions::default()).is_err());
    }

    #[test]
    fn grid_is_log_spaced_and_decreasing() {
        let v = LambdaGrid::default().values(1.0);
        assert_eq!(v.len(), 16);
        assert_eq!(v[0], 1.0);
        assert!((v[15] - 1e-8).abs() < 1e-20);
        assert!(v.windows(2).all(|p| p[0] > p[1]));
    }
}
