//! Weight sequences, weighted norms, best s-term oracle, the Riemann zeta
//! function and the parameter-admissibility report.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tt::ProductWeights;

/// Per-mode nonnegative integers.
pub type MultiIndex = Vec<usize>;

/// Product-structured weight sequence `omega_nu = prod_m w_m(nu_m)`.
///
/// Modes are numbered from 1 inside the formulas (`m` in `m^theta`); the
/// API takes zero-based mode positions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum WeightSequence {
    /// `sqrt(2n+1)`.
    Lower,
    /// `(2n+1)^{-1/2} rho_m^n` with `rho_m = c m^theta`.
    Upper { c: f64, theta: f64 },
    /// Same values as `Lower`; the experiment's weakly growing sequence.
    ExpWeak,
    /// `sqrt(2n+1) m^{3n/4}`.
    ExpStrong,
    /// `((2n+1)^{-1/2} rho_m^{(1-kappa) n})^{p/(2-p)}`, `rho_m = c m^theta`.
    XiComposite { c: f64, theta: f64, kappa: f64, p: f64 },
}

impl WeightSequence {
    /// Weight of degree `n` in mode position `mode` (zero-based).
    pub fn mode_value(&self, mode: usize, n: usize) -> f64 {
        let m = (mode + 1) as f64;
        let nf = n as f64;
        let odd = 2.0 * nf + 1.0;
        match *self {
            WeightSequence::Lower | WeightSequence::ExpWeak => odd.sqrt(),
            WeightSequence::Upper { c, theta } => odd.powf(-0.5) * (c * m.powf(theta)).powf(nf),
            WeightSequence::ExpStrong => odd.sqrt() * m.powf(0.75 * nf),
            WeightSequence::XiComposite { c, theta, kappa, p } => {
                let rho = c * m.powf(theta);
                (odd.powf(-0.5) * rho.powf((1.0 - kappa) * nf)).powf(p / (2.0 - p))
            }
        }
    }

    pub fn eval(&self, nu: &[usize]) -> f64 {
        nu.iter().enumerate().map(|(m, &n)| self.mode_value(m, n)).product()
    }

    /// Per-mode tables for degrees `0..=degree`.
    pub fn tables(&self, order: usize, degree: usize) -> Vec<Vec<f64>> {
        (0..order).map(|m| (0..=degree).map(|n| self.mode_value(m, n)).collect()).collect()
    }

    pub fn id(&self) -> String {
        self.to_string()
    }
}

impl ProductWeights for WeightSequence {
    fn mode_weight(&self, mode: usize, index: usize) -> f64 {
        self.mode_value(mode, index)
    }
}

impl fmt::Display for WeightSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WeightSequence::Lower => write!(f, "lower"),
            WeightSequence::ExpWeak => write!(f, "exp-weak"),
            WeightSequence::ExpStrong => write!(f, "exp-strong"),
            WeightSequence::Upper { c, theta } => write!(f, "upper:c={c},theta={theta}"),
            WeightSequence::XiComposite { c, theta, kappa, p } => {
                write!(f, "xi-composite:c={c},theta={theta},kappa={kappa},p={p}")
            }
        }
    }
}

fn parse_params(body: &str, names: &[&str]) -> Result<Vec<f64>> {
    let mut values = vec![None; names.len()];
    for part in body.split(',').filter(|s| !s.is_empty()) {
        let (key, value) = part
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("weight parameter `{part}` is not key=value")))?;
        let pos = names
            .iter()
            .position(|n| *n == key.trim())
            .ok_or_else(|| Error::Parse(format!("unknown weight parameter `{key}`")))?;
        let v: f64 = value.trim().parse().map_err(|_| Error::Parse(format!("bad number `{value}`")))?;
        if !v.is_finite() {
            return Err(Error::Parse(format!("non-finite weight parameter `{part}`")));
        }
        values[pos] = Some(v);
    }
    values
        .into_iter()
        .zip(names)
        .map(|(v, n)| v.ok_or_else(|| Error::Parse(format!("missing weight parameter `{n}`"))))
        .collect()
}

impl FromStr for WeightSequence {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (head, body) = s.split_once(':').unwrap_or((s, ""));
        let seq = match head.trim() {
            "lower" if body.is_empty() => WeightSequence::Lower,
            "exp-weak" if body.is_empty() => WeightSequence::ExpWeak,
            "exp-strong" if body.is_empty() => WeightSequence::ExpStrong,
            "upper" => {
                let v = parse_params(body, &["c", "theta"])?;
                WeightSequence::Upper { c: v[0], theta: v[1] }
            }
            "xi-composite" => {
                let v = parse_params(body, &["c", "theta", "kappa", "p"])?;
                if !(v[3] > 0.0 && v[3] < 1.0) {
                    return Err(Error::Parse("xi-composite needs p in (0, 1)".into()));
                }
                WeightSequence::XiComposite { c: v[0], theta: v[1], kappa: v[2], p: v[3] }
            }
            _ => return Err(Error::Parse(format!("unknown weight sequence `{s}`"))),
        };
        if let WeightSequence::Upper { c, .. } | WeightSequence::XiComposite { c, .. } = seq {
            if c <= 0.0 {
                return Err(Error::Parse("radius constant c must be positive".into()));
            }
        }
        Ok(seq)
    }
}

impl TryFrom<String> for WeightSequence {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<WeightSequence> for String {
    fn from(w: WeightSequence) -> String {
        w.to_string()
    }
}

/// Exponent of a weighted sequence norm.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormKind {
    /// Sum of squared weights over the support.
    Zero,
    One,
    Two,
    Inf,
}

/// `||x||_{l^p_w}`; entries equal to zero never contribute (even where the
/// weight is infinite).
pub fn weighted_norm(x: &[f64], w: &[f64], p: NormKind) -> Result<f64> {
    if x.len() != w.len() {
        return Err(Error::Input(format!("{} entries but {} weights", x.len(), w.len())));
    }
    let support = x.iter().zip(w).filter(|(v, _)| **v != 0.0);
    Ok(match p {
        NormKind::Zero => support.map(|(_, w)| w * w).sum(),
        NormKind::One => support.map(|(v, w)| (v * w).abs()).sum(),
        NormKind::Two => support.map(|(v, w)| (v * w).powi(2)).sum::<f64>().sqrt(),
        NormKind::Inf => support.map(|(v, w)| (v * w).abs()).fold(0.0, f64::max),
    })
}

/// Weighted norm of a sparse coefficient list under a weight sequence.
pub fn weighted_norm_seq(entries: &[(MultiIndex, f64)], omega: &WeightSequence, p: NormKind) -> Result<f64> {
    let x: Vec<f64> = entries.iter().map(|(_, v)| *v).collect();
    let w: Vec<f64> = entries.iter().map(|(nu, _)| omega.eval(nu)).collect();
    weighted_norm(&x, &w, p)
}

/// Support limit for exhaustive search in [`weighted_best_sterm`].
pub const BEST_STERM_EXHAUSTIVE: usize = 20;

/// Support `S` minimising `||x - x|_S||_{l^1_w}` subject to
/// `sum_S w^2 <= budget`, with the residual.
///
/// Exhaustive over the nonzero entries when there are at most
/// [`BEST_STERM_EXHAUSTIVE`]; otherwise greedy by `|x| w / w^2` (not
/// guaranteed optimal).
pub fn weighted_best_sterm(x: &[f64], w: &[f64], budget: f64) -> Result<(Vec<usize>, f64)> {
    if budget < 0.0 || budget.is_nan() {
        return Err(Error::Input(format!("budget {budget} must be nonnegative")));
    }
    if x.len() != w.len() {
        return Err(Error::Input(format!("{} entries but {} weights", x.len(), w.len())));
    }
    let nz: Vec<usize> = (0..x.len()).filter(|&i| x[i] != 0.0).collect();
    let value = |i: usize| (x[i] * w[i]).abs();
    let cost = |i: usize| w[i] * w[i];
    let total: f64 = nz.iter().map(|&i| value(i)).sum();
    let tol = 1e-12 * budget.max(1.0);
    if nz.len() <= BEST_STERM_EXHAUSTIVE {
        let mut best_mask = 0u32;
        let mut best_kept = 0.0;
        for mask in 0u32..(1u32 << nz.len()) {
            let mut c = 0.0;
            let mut kept = 0.0;
            for (b, &i) in nz.iter().enumerate() {
                if mask >> b & 1 == 1 {
                    c += cost(i);
                    kept += value(i);
                }
            }
            if c <= budget + tol && kept > best_kept {
                best_kept = kept;
                best_mask = mask;
            }
        }
        let support: Vec<usize> =
            nz.iter().enumerate().filter(|(b, _)| best_mask >> b & 1 == 1).map(|(_, &i)| i).collect();
        let residual = total - support.iter().map(|&i| value(i)).sum::<f64>();
        Ok((support, residual.max(0.0)))
    } else {
        let mut order = nz.clone();
        order.sort_by(|&a, &b| (value(b) / cost(b)).total_cmp(&(value(a) / cost(a))));
        let mut used = 0.0;
        let mut support = Vec::new();
        for i in order {
            if used + cost(i) <= budget + tol {
                used += cost(i);
                support.push(i);
            }
        }
        support.sort_unstable();
        let residual = total - support.iter().map(|&i| value(i)).sum::<f64>();
        Ok((support, residual.max(0.0)))
    }
}

/// Riemann zeta for real `s > 1` (direct sum with Euler–Maclaurin tail).
pub fn zeta(s: f64) -> Result<f64> {
    if s.is_nan() || s <= 1.0 {
        return Err(Error::Input(format!("zeta({s}) diverges")));
    }
    const N: usize = 32;
    // B_{2k} / (2k)!
    const B: [f64; 6] = [
        1.0 / 12.0,
        -1.0 / 720.0,
        1.0 / 30240.0,
        -1.0 / 1209600.0,
        1.0 / 47900160.0,
        -691.0 / 1307674368000.0,
    ];
    let mut sum: f64 = (1..N).map(|n| (n as f64).powf(-s)).sum();
    let nf = N as f64;
    sum += nf.powf(1.0 - s) / (s - 1.0) + 0.5 * nf.powf(-s);
    // Rising factorial s (s+1) ... (s+2k-2) times N^{-s-2k+1}.
    let mut rising = s;
    let mut power = nf.powf(-s - 1.0);
    for (k, b) in B.iter().enumerate() {
        sum += b * rising * power;
        let j = 2 * k as i32 + 1;
        rising *= (s + j as f64) * (s + j as f64 + 1.0);
        power /= nf * nf;
    }
    Ok(sum)
}

/// One line of the admissibility report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Condition {
    pub name: String,
    pub pass: bool,
    /// Positive when satisfied; distance to the boundary.
    pub margin: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdmissibilityReport {
    pub conditions: Vec<Condition>,
    /// `a0 / zeta(eta - theta)`, the upper end of the admissible `c`.
    pub c_bound: Option<f64>,
    /// Admissible `kappa` interval `(1/theta, 1 - (2-p)/(p theta))`.
    pub kappa_interval: (f64, f64),
    /// Admissible `theta` interval `(max(1/2, 2/p), eta - 1)`.
    pub theta_interval: (f64, f64),
    pub admissible: bool,
}

/// Checks the analytic assumptions for the coefficient
/// `a(x,y) = a0 + sum_m y_m m^{-eta} cos(pi m x)` under the radius sequence
/// `rho_m = c m^theta` and the composite weights.
pub fn check_admissibility(eta: f64, c: f64, theta: f64, kappa: f64, p: f64, a0: f64) -> Result<AdmissibilityReport> {
    let finite = [eta, c, theta, kappa, p, a0].iter().all(|v| v.is_finite());
    if !finite || eta <= 1.0 || !(p > 0.0 && p < 1.0) || a0 <= 0.0 || c <= 0.0 || theta < 0.0 || kappa < 0.0 {
        return Err(Error::Input(format!(
            "parameters out of domain: eta={eta} (>1), c={c} (>0), theta={theta} (>=0), kappa={kappa} (>=0), p={p} in (0,1), a0={a0} (>0)"
        )));
    }
    let r = p / (2.0 - p);
    let mut conditions = Vec::new();
    let c_bound = if eta - theta > 1.0 { Some(a0 / zeta(eta - theta)?) } else { None };
    match c_bound {
        Some(bound) => {
            let z = a0 / bound;
            let margin = a0 - c * z;
            conditions.push(Condition {
                name: "(i) c*zeta(eta-theta) < a0".into(),
                pass: margin > 0.0,
                margin,
                detail: format!("zeta({})={z}, c*zeta={}, c bound={bound}", eta - theta, c * z),
            });
        }
        None => conditions.push(Condition {
            name: "(i) c*zeta(eta-theta) < a0".into(),
            pass: false,
            margin: f64::NEG_INFINITY,
            detail: format!("eta-theta={} <= 1: the series diverges", eta - theta),
        }),
    }
    conditions.push(Condition {
        name: "(ii) theta > 1/2".into(),
        pass: theta > 0.5,
        margin: theta - 0.5,
        detail: format!("theta={theta}"),
    });
    conditions.push(Condition {
        name: "(ii) c > 1".into(),
        pass: c > 1.0,
        margin: c - 1.0,
        detail: format!("c={c}"),
    });
    conditions.push(Condition {
        name: "(iii) kappa*theta > 1".into(),
        pass: kappa * theta > 1.0,
        margin: kappa * theta - 1.0,
        detail: format!("kappa*theta={}", kappa * theta),
    });
    let e4 = (1.0 - kappa) * r * theta;
    conditions.push(Condition {
        name: "(iv) (1-kappa)*p/(2-p)*theta > 1".into(),
        pass: e4 > 1.0,
        margin: e4 - 1.0,
        detail: format!("exponent={e4}"),
    });
    let theta_interval = (0.5f64.max(2.0 / p), eta - 1.0);
    let kappa_interval = if theta > 0.0 { (1.0 / theta, 1.0 - (2.0 - p) / (p * theta)) } else { (f64::INFINITY, f64::NEG_INFINITY) };
    conditions.push(Condition {
        name: "theta in (max(1/2, 2/p), eta-1)".into(),
        pass: theta > theta_interval.0 && theta < theta_interval.1,
        margin: (theta - theta_interval.0).min(theta_interval.1 - theta),
        detail: format!(
            "interval ({}, {}); empty unless eta > 1 + 2/p = {}",
            theta_interval.0,
            theta_interval.1,
            1.0 + 2.0 / p
        ),
    });
    conditions.push(Condition {
        name: "kappa in (1/theta, 1-(2-p)/(p*theta))".into(),
        pass: kappa > kappa_interval.0 && kappa < kappa_interval.1,
        margin: (kappa - kappa_interval.0).min(kappa_interval.1 - kappa),
        detail: format!("interval ({}, {})", kappa_interval.0, kappa_interval.1),
    });
    let admissible = conditions.iter().all(|c| c.pass);
    Ok(AdmissibilityReport { conditions, c_bound, kappa_interval, theta_interval, admissible })
}
