//! Orthonormal Legendre polynomials on [-1, 1] with respect to the uniform
//! probability measure, Gauss–Legendre quadrature, and the monomial to
//! Legendre change of basis.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// `L_0(y), ..., L_{n_max}(y)` with `L_n = sqrt(2n+1) P_n`.
pub fn legendre_eval(n_max: usize, y: f64) -> Result<Vec<f64>> {
    if !(-1.0..=1.0).contains(&y) {
        return Err(Error::Input(format!("legendre argument {y} outside [-1, 1]")));
    }
    let mut out = vec![0.0; n_max + 1];
    legendre_into(y, &mut out);
    Ok(out)
}

/// Fills `out[n] = L_n(y)` for `n < out.len()`. No range check on `y`.
pub fn legendre_into(y: f64, out: &mut [f64]) {
    let mut p_prev = 1.0;
    let mut p = y;
    for (n, slot) in out.iter_mut().enumerate() {
        let value = match n {
            0 => 1.0,
            1 => y,
            _ => {
                let nf = n as f64;
                let next = ((2.0 * nf - 1.0) * y * p - (nf - 1.0) * p_prev) / nf;
                p_prev = p;
                p = next;
                next
            }
        };
        *slot = value * ((2 * n + 1) as f64).sqrt();
    }
}

/// Classical `P_n(y)` and its derivative via the three-term recurrence.
fn classical_with_derivative(n: usize, y: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = y;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * y * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    let dp = nf * (y * p1 - p0) / (y * y - 1.0);
    (p1, dp)
}

/// Gauss–Legendre rule with `n` points on [-1, 1]; weights sum to 2.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = classical_with_derivative(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = classical_with_derivative(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn ln_factorial(k: usize) -> f64 {
    (2..=k).map(|i| (i as f64).ln()).sum()
}

/// Coefficient of `L_m` in the expansion of the monomial `y^k`.
///
/// Nonzero only for `k = m + 2n`, where it equals
/// `sqrt(2m+1) k! / (2^k n! (3/2)_{m+n})`.
pub fn alpha(m: usize, k: usize) -> f64 {
    if k < m || (k - m) % 2 == 1 {
        return 0.0;
    }
    let n = (k - m) / 2;
    let root = ((2 * m + 1) as f64).sqrt();
    if k <= 30 {
        let mut num = 1.0;
        for i in 2..=k {
            num *= i as f64;
        }
        let mut den = 2f64.powi(k as i32);
        for i in 2..=n {
            den *= i as f64;
        }
        for i in 0..m + n {
            den *= 1.5 + i as f64;
        }
        root * num / den
    } else {
        let ln_poch: f64 = (0..m + n).map(|i| (1.5 + i as f64).ln()).sum();
        let ln = ln_factorial(k) - k as f64 * std::f64::consts::LN_2 - ln_factorial(n) - ln_poch;
        root * ln.exp()
    }
}

/// Converts a multivariate polynomial given by monomial coefficients
/// (exponent vector -> coefficient) to normalised Legendre coefficients.
pub fn power_to_legendre(power: &[(Vec<usize>, f64)]) -> Result<Vec<(Vec<usize>, f64)>> {
    let order = power.first().map(|(e, _)| e.len()).unwrap_or(0);
    let mut out: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
    for (exps, coeff) in power {
        if exps.len() != order {
            return Err(Error::Input("monomials of different orders".into()));
        }
        // Per-mode expansions y_m^{k_m} = sum_j alpha(j, k_m) L_j.
        let factors: Vec<Vec<(usize, f64)>> = exps
            .iter()
            .map(|&k| (0..=k).filter(|j| (k - j) % 2 == 0).map(|j| (j, alpha(j, k))).collect())
            .collect();
        let mut stack: Vec<(Vec<usize>, f64)> = vec![(Vec::with_capacity(order), *coeff)];
        for f in &factors {
            let mut next = Vec::with_capacity(stack.len() * f.len());
            for (idx, v) in &stack {
                for &(j, a) in f {
                    let mut idx2 = idx.clone();
                    idx2.push(j);
                    next.push((idx2, v * a));
                }
            }
            stack = next;
        }
        for (idx, v) in stack {
            *out.entry(idx).or_insert(0.0) += v;
        }
    }
    Ok(out.into_iter().filter(|(_, v)| *v != 0.0).collect())
}
