//! Error metrics, empirical restricted isometry constants, sample-complexity
//! calculators and level-decay fitting.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::basis::{legendre_eval, MultiIndex};
use crate::error::{Error, Result};
use crate::regression::draw_points;
use crate::seed::rng_for;
use crate::tt::multi_index;

/// Test points with reference QoIs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestSet {
    pub points: Vec<Vec<f64>>,
    pub values: Vec<f64>,
}

impl TestSet {
    pub fn new(points: Vec<Vec<f64>>, values: Vec<f64>) -> Result<Self> {
        if points.is_empty() || points.len() != values.len() {
            return Err(Error::Input(format!("test set with {} points and {} values", points.len(), values.len())));
        }
        Ok(TestSet { points, values })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// `sqrt(sum |h - G|^2 / sum |G|^2)` over paired predictions and references.
pub fn relative_rmse(predictions: &[f64], references: &[f64]) -> Result<f64> {
    if predictions.len() != references.len() || references.is_empty() {
        return Err(Error::Input(format!("{} predictions for {} references", predictions.len(), references.len())));
    }
    let den: f64 = references.iter().map(|g| g * g).sum();
    if den == 0.0 {
        return Err(Error::Input("all reference values are zero".into()));
    }
    let num: f64 = predictions.iter().zip(references).map(|(h, g)| (h - g) * (h - g)).sum();
    Ok((num / den).sqrt())
}

/// Relative RMSE of `h` on a test set.
pub fn rmse<F>(h: F, test: &TestSet) -> Result<f64>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    let pred = test.points.iter().map(|y| h(y)).collect::<Result<Vec<_>>>()?;
    relative_rmse(&pred, &test.values)
}

/// Lower median (the smaller middle element for even counts); NaNs are
/// ignored.
pub fn median(values: &[f64]) -> Option<f64> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| !x.is_nan()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(|a, b| a.total_cmp(b));
    Some(v[(v.len() - 1) / 2])
}

/// Model class whose restricted isometry constant is estimated.
#[derive(Debug, Clone, PartialEq)]
pub enum RipClass {
    /// Explicit Legendre expansions.
    Members(Vec<Vec<(MultiIndex, f64)>>),
    /// All expansions supported on `sparsity` indices of `{0..=degree}^order`.
    /// Supports are enumerated when there are at most `max_supports` of
    /// them and sampled otherwise; each support contributes the extreme
    /// eigenvalues of its empirical Gram matrix.
    Sparse { order: usize, degree: usize, sparsity: usize, max_supports: usize },
}

impl RipClass {
    pub fn describe(&self) -> String {
        match self {
            RipClass::Members(m) => format!("{} explicit members", m.len()),
            RipClass::Sparse { order, degree, sparsity, .. } => {
                format!("{sparsity}-sparse, order {order}, degree {degree}")
            }
        }
    }

    fn order(&self) -> usize {
        match self {
            RipClass::Members(m) => m.iter().flatten().map(|(nu, _)| nu.len()).max().unwrap_or(0),
            RipClass::Sparse { order, .. } => *order,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RipEstimate {
    pub class: String,
    pub n: usize,
    pub trials: usize,
    /// One constant per trial.
    pub deltas: Vec<f64>,
    /// Members skipped for a vanishing norm.
    pub skipped: usize,
}

impl RipEstimate {
    pub fn median(&self) -> f64 {
        median(&self.deltas).unwrap_or(f64::NAN)
    }

    pub fn max(&self) -> f64 {
        self.deltas.iter().copied().fold(0.0, f64::max)
    }

    pub fn count_at_most(&self, bound: f64) -> usize {
        self.deltas.iter().filter(|&&d| d <= bound).count()
    }
}

fn basis_tables(points: &[Vec<f64>], degree: usize) -> Result<Vec<Vec<Vec<f64>>>> {
    points.iter().map(|y| y.iter().map(|&t| legendre_eval(degree, t)).collect()).collect()
}

fn basis_value(table: &[Vec<f64>], nu: &[usize]) -> f64 {
    nu.iter().enumerate().map(|(m, &k)| table[m][k]).product()
}

/// `max_u |‖u‖_n^2 / ‖u‖^2 - 1|` over the class for fixed points, with the
/// unweighted empirical seminorm `‖u‖_n^2 = n^{-1} sum u(y_i)^2`. Returns
/// the constant and the number of skipped members.
pub fn rip_constant(class: &RipClass, points: &[Vec<f64>], seed: u64) -> Result<(f64, usize)> {
    if points.is_empty() {
        return Err(Error::Input("no sample points".into()));
    }
    let n = points.len() as f64;
    match class {
        RipClass::Members(members) => {
            let degree = members.iter().flatten().flat_map(|(nu, _)| nu.iter().copied()).max().unwrap_or(0);
            let tables = basis_tables(points, degree)?;
            let mut delta: f64 = 0.0;
            let mut skipped = 0;
            for u in members {
                let norm: f64 = u.iter().map(|(_, c)| c * c).sum();
                if norm == 0.0 {
                    skipped += 1;
                    continue;
                }
                let emp: f64 = tables
                    .iter()
                    .map(|t| {
                        let v: f64 = u.iter().map(|(nu, c)| c * basis_value(t, nu)).sum();
                        v * v
                    })
                    .sum::<f64>()
                    / n;
                delta = delta.max((emp / norm - 1.0).abs());
            }
            Ok((delta, skipped))
        }
        RipClass::Sparse { order, degree, sparsity, max_supports } => {
            let dims = vec![degree + 1; *order];
            let size = dims.iter().product::<usize>();
            if *sparsity == 0 || *sparsity > size {
                return Err(Error::Input(format!("sparsity {sparsity} outside 1..={size}")));
            }
            let tables = basis_tables(points, *degree)?;
            // Row i, column j: L_{nu_j}(y_i).
            let phi = DMatrix::from_fn(points.len(), size, |i, j| basis_value(&tables[i], &multi_index(j, &dims)));
            let gram = phi.transpose() * &phi / n;
            let supports = supports(size, *sparsity, *max_supports, seed);
            let mut delta: f64 = 0.0;
            for s in supports {
                let g = DMatrix::from_fn(s.len(), s.len(), |a, b| gram[(s[a], s[b])]);
                let eig = SymmetricEigen::new(g).eigenvalues;
                for &e in eig.iter() {
                    delta = delta.max((e - 1.0).abs());
                }
            }
            Ok((delta, 0))
        }
    }
}

fn binomial(n: usize, k: usize) -> Option<usize> {
    let mut acc: usize = 1;
    for i in 0..k.min(n - k) {
        acc = acc.checked_mul(n - i)? / (i + 1);
    }
    Some(acc)
}

fn supports(size: usize, s: usize, max: usize, seed: u64) -> Vec<Vec<usize>> {
    match binomial(size, s) {
        Some(total) if total <= max.max(1) => {
            let mut out = Vec::with_capacity(total);
            let mut idx: Vec<usize> = (0..s).collect();
            loop {
                out.push(idx.clone());
                let mut i = s;
                while i > 0 && idx[i - 1] == size - s + i - 1 {
                    i -= 1;
                }
                if i == 0 {
                    return out;
                }
                idx[i - 1] += 1;
                for j in i..s {
                    idx[j] = idx[j - 1] + 1;
                }
            }
        }
        _ => {
            let mut rng = rng_for(seed, &[u64::MAX]);
            (0..max.max(1))
                .map(|_| {
                    let mut v = sample(&mut rng, size, s).into_vec();
                    v.sort_unstable();
                    v
                })
                .collect()
        }
    }
}

/// Constants over `trials` independent draws of `n` uniform points.
pub fn empirical_rip(class: &RipClass, n: usize, trials: usize, seed: u64) -> Result<RipEstimate> {
    if n == 0 || trials == 0 {
        return Err(Error::Input("need at least one point and one trial".into()));
    }
    let order = class.order();
    let mut deltas = Vec::with_capacity(trials);
    let mut skipped = 0;
    for t in 0..trials {
        let mut rng = rng_for(seed, &[t as u64]);
        let points = draw_points(&mut rng, n, order);
        let (d, s) = rip_constant(class, &points, seed)?;
        deltas.push(d);
        skipped = s;
    }
    Ok(RipEstimate { class: class.describe(), n, trials, deltas, skipped })
}

/// Which model class a sample bound refers to. Both bounds share the same
/// simplified form and differ only in their unknown universal constant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComplexityMode {
    Sparse,
    SemiSparse,
}

/// `ceil(c delta^{-2} r max{M ln^3(r) ln(N), ln(1/p)})` for budget `r`.
pub fn sample_complexity(
    rip_delta: f64,
    p: f64,
    budget: f64,
    order: usize,
    degree: usize,
    _mode: ComplexityMode,
    c: f64,
) -> Result<u64> {
    if !(rip_delta > 0.0 && rip_delta < 1.0) || !(p > 0.0 && p < 1.0) {
        return Err(Error::Input(format!("delta = {rip_delta} and p = {p} must lie in (0, 1)")));
    }
    if !(budget >= 1.0) || degree == 0 {
        return Err(Error::Input(format!("budget {budget} must be >= 1 and degree {degree} positive")));
    }
    let lr = budget.ln();
    let inner = (order as f64 * lr.powi(3) * (degree as f64).ln()).max((1.0 / p).ln());
    Ok((c * budget * inner / (rip_delta * rip_delta)).ceil() as u64)
}

/// Negated least-squares slope of `log2(error)` against the level index.
pub fn fit_decay_rate(errors: &[f64]) -> Result<f64> {
    if errors.len() < 2 {
        return Err(Error::Input("need at least two levels".into()));
    }
    if errors.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
        return Err(Error::Input("errors must be positive and finite".into()));
    }
    let n = errors.len() as f64;
    let xm = (n - 1.0) / 2.0;
    let ys: Vec<f64> = errors.iter().map(|e| e.log2()).collect();
    let ym = ys.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (i, y) in ys.iter().enumerate() {
        let dx = i as f64 - xm;
        sxy += dx * (y - ym);
        sxx += dx * dx;
    }
    Ok(-sxy / sxx)
}
