//! One-dimensional finite elements for `-(a u')' = f` on [0, 1] with zero
//! boundary values and the affine coefficient
//! `a(x, y) = a0 + sum_m y_m m^{-eta} cos(pi m x)`.

use serde::{Deserialize, Serialize};

use crate::basis::zeta;
use crate::error::{Error, Result};

/// Three-point Gauss rule on [0, 1].
const GAUSS3_X: [f64; 3] = [0.112_701_665_379_258_31, 0.5, 0.887_298_334_620_741_7];
const GAUSS3_W: [f64; 3] = [5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0];

/// Element count of the reference solves (`h = 2^-14`).
pub const REFERENCE_ELEMENTS: usize = 1 << 14;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffusionProblem {
    pub a0: f64,
    pub eta: f64,
    /// Number of parameters `M`.
    pub m: usize,
    /// Constant source `f`.
    pub source: f64,
    /// Physical dimension; enters the work model only.
    #[serde(default = "one")]
    pub dim: usize,
}

fn one() -> usize {
    1
}

impl DiffusionProblem {
    /// `eta = 2`, `M = 6`, `f = 100`, `a0 = zeta(2)`.
    pub fn experiment() -> Self {
        DiffusionProblem { a0: zeta(2.0).expect("zeta(2) converges"), eta: 2.0, m: 6, source: 100.0, dim: 1 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a0 > 0.0 && self.a0.is_finite()) {
            return Err(Error::Input(format!("a0 = {} must be positive", self.a0)));
        }
        if !self.eta.is_finite() || !self.source.is_finite() {
            return Err(Error::Input("eta and source must be finite".into()));
        }
        if self.dim != 1 {
            return Err(Error::Input(format!("the solver supports dimension 1, got {}", self.dim)));
        }
        Ok(())
    }

    /// Amplitudes `m^{-eta}` for `m = 1..=M`.
    pub fn amplitudes(&self) -> Vec<f64> {
        (1..=self.m).map(|m| (m as f64).powf(-self.eta)).collect()
    }

    fn check_point(&self, y: &[f64]) -> Result<()> {
        if y.len() != self.m {
            return Err(Error::Input(format!("parameter point has {} entries, expected {}", y.len(), self.m)));
        }
        if let Some(v) = y.iter().find(|v| !(-1.0..=1.0).contains(*v)) {
            return Err(Error::Input(format!("parameter {v} outside [-1, 1]")));
        }
        Ok(())
    }

    /// `a(x, y)`; `y` must have `M` entries.
    pub fn coefficient(&self, x: f64, y: &[f64]) -> f64 {
        coefficient_with(self.a0, &self.amplitudes(), x, y)
    }
}

fn coefficient_with(a0: f64, amp: &[f64], x: f64, y: &[f64]) -> f64 {
    // cos(m t) by the Chebyshev recurrence.
    let c1 = (std::f64::consts::PI * x).cos();
    let mut prev = 1.0;
    let mut cur = c1;
    let mut a = a0;
    for (i, (&ym, &am)) in y.iter().zip(amp).enumerate() {
        if i > 0 {
            let next = 2.0 * c1 * cur - prev;
            prev = cur;
            cur = next;
        }
        a += ym * am * cur;
    }
    a
}

/// Uniform mesh of [0, 1] at level `l` with width `h_l = 2^-l h_0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MeshLevel {
    pub level: u32,
    pub elements: usize,
}

impl MeshLevel {
    /// Level `l` of the hierarchy whose level-0 mesh has `base_elements`
    /// elements (`h_0 = 1 / base_elements`).
    pub fn new(base_elements: usize, level: u32) -> Result<Self> {
        if base_elements == 0 {
            return Err(Error::Input("base mesh needs at least one element".into()));
        }
        let elements = base_elements
            .checked_mul(1usize.checked_shl(level).ok_or_else(|| Error::Input("level too large".into()))?)
            .filter(|&e| e <= 1 << 28)
            .ok_or_else(|| Error::Resource(format!("mesh level {level} too fine")))?;
        Ok(MeshLevel { level, elements })
    }

    pub fn width(&self) -> f64 {
        1.0 / self.elements as f64
    }

    /// Node coordinates including both boundary nodes.
    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.elements).map(|i| i as f64 * self.width()).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FemSolution {
    pub mesh: MeshLevel,
    pub degree: u8,
    /// Interior coefficients: vertices `1..n` for degree 1; for degree 2,
    /// vertices and midpoints interleaved in coordinate order.
    pub values: Vec<f64>,
}

impl FemSolution {
    /// Nodal values including the zero boundary values.
    pub fn nodal_values(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.values.len() + 2);
        out.push(0.0);
        out.extend_from_slice(&self.values);
        out.push(0.0);
        out
    }

    pub fn interior_dofs(&self) -> usize {
        self.values.len()
    }
}

/// Solves the vertex system of a chain of elements with conductances
/// `kappa[e]` and loads `rhs[i]` (`i = 0..=n`, boundary entries unused) with
/// zero end values, by integrating fluxes `q_e = kappa_e (u_e - u_{e+1})`.
///
/// Equivalent to the tridiagonal stiffness solve but avoids the `h^-2`
/// condition number of the assembled matrix.
fn solve_chain(kappa: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = kappa.len();
    // q_e = q_0 + S_e with S_e = sum_{1 <= j <= e} rhs_j.
    let mut partial = vec![0.0; n];
    for e in 1..n {
        partial[e] = partial[e - 1] + rhs[e];
    }
    let resistance: f64 = kappa.iter().map(|k| 1.0 / k).sum();
    let drop: f64 = partial.iter().zip(kappa).map(|(s, k)| s / k).sum();
    let q0 = -drop / resistance;
    let mut u = Vec::with_capacity(n.saturating_sub(1));
    let mut current = 0.0;
    for e in 0..n - 1 {
        current -= (q0 + partial[e]) / kappa[e];
        u.push(current);
    }
    u
}

/// Galerkin solution with Lagrange elements of degree 1 or 2.
pub fn solve_fem(problem: &DiffusionProblem, mesh: &MeshLevel, y: &[f64], degree: u8) -> Result<FemSolution> {
    problem.validate()?;
    problem.check_point(y)?;
    if degree != 1 && degree != 2 {
        return Err(Error::Input(format!("element degree {degree} not supported")));
    }
    let amp = problem.amplitudes();
    let n = mesh.elements;
    let h = mesh.width();
    let f = problem.source;

    // Vertex system after (for degree 2) condensing out the midpoints.
    let mut kappa = vec![0.0; n];
    let mut rhs = vec![0.0; n + 1];
    // Per-element midpoint data kept for back substitution.
    let mut mid = if degree == 2 { Vec::with_capacity(n) } else { Vec::new() };

    for e in 0..n {
        let x0 = e as f64 * h;
        let mut aq = [0.0; 3];
        for (q, &xi) in GAUSS3_X.iter().enumerate() {
            let x = x0 + xi * h;
            let a = coefficient_with(problem.a0, &amp, x, y);
            if !(a > 0.0) {
                return Err(Error::Model { x, y: y.to_vec(), value: a });
            }
            aq[q] = a;
        }
        if degree == 1 {
            let mean: f64 = aq.iter().zip(GAUSS3_W).map(|(a, w)| a * w).sum();
            kappa[e] = mean / h;
            rhs[e] += 0.5 * f * h;
            rhs[e + 1] += 0.5 * f * h;
        } else {
            // Reference derivatives of (left, mid, right) shape functions.
            let mut k = [[0.0; 3]; 3];
            for (q, &xi) in GAUSS3_X.iter().enumerate() {
                let d = [4.0 * xi - 3.0, 4.0 - 8.0 * xi, 4.0 * xi - 1.0];
                for i in 0..3 {
                    for j in 0..3 {
                        k[i][j] += GAUSS3_W[q] * aq[q] * d[i] * d[j] / h;
                    }
                }
            }
            let b = [f * h / 6.0, 2.0 * f * h / 3.0, f * h / 6.0];
            // Static condensation of the midpoint (index 1).
            let kmm = k[1][1];
            let ends = [0usize, 2];
            let mut bc = [0.0; 2];
            for (ii, &i) in ends.iter().enumerate() {
                bc[ii] = b[i] - k[i][1] * b[1] / kmm;
            }
            let coupling = k[0][2] - k[0][1] * k[1][2] / kmm;
            // The condensed matrix annihilates constants, so it is
            // kappa [[1, -1], [-1, 1]].
            kappa[e] = -coupling;
            rhs[e] += bc[0];
            rhs[e + 1] += bc[1];
            mid.push((kmm, k[1][0], k[1][2], b[1]));
        }
    }

    let u = solve_chain(&kappa, &rhs);

    let values = if degree == 1 {
        u
    } else {
        let vertex = |i: usize| if i == 0 || i == n { 0.0 } else { u[i - 1] };
        let mut v = Vec::with_capacity(2 * n - 1);
        for (e, &(kmm, kml, kmr, bm)) in mid.iter().enumerate() {
            if e > 0 {
                v.push(vertex(e));
            }
            v.push((bm - kml * vertex(e) - kmr * vertex(e + 1)) / kmm);
        }
        v
    };
    Ok(FemSolution { mesh: *mesh, degree, values })
}

/// `int_0^1 u dx`, exact for the finite element function.
pub fn qoi(solution: &FemSolution) -> f64 {
    let h = solution.mesh.width();
    match solution.degree {
        1 => h * solution.values.iter().sum::<f64>(),
        _ => {
            let nodal = solution.nodal_values();
            // nodal = [v0, m0, v1, m1, ..., v_n]; Simpson per element.
            let mut s = 0.0;
            for e in 0..solution.mesh.elements {
                s += nodal[2 * e] + 4.0 * nodal[2 * e + 1] + nodal[2 * e + 2];
            }
            s * h / 6.0
        }
    }
}

/// Nested mesh family with `h_l = 2^-l / base_elements`; level `l >= 1`
/// is the `l`-th estimator level.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Hierarchy {
    pub base_elements: usize,
}

impl Hierarchy {
    pub fn new(base_elements: usize) -> Result<Self> {
        if base_elements == 0 {
            return Err(Error::Input("base mesh needs at least one element".into()));
        }
        Ok(Hierarchy { base_elements })
    }

    /// Hierarchy with `L` levels whose finest width is `1 / finest_elements`.
    pub fn with_finest(finest_elements: usize, levels: u32) -> Result<Self> {
        let factor = 1usize << levels;
        if finest_elements % factor != 0 || finest_elements < factor {
            return Err(Error::Input(format!(
                "finest mesh with {finest_elements} elements cannot be coarsened {levels} times"
            )));
        }
        Hierarchy::new(finest_elements / factor)
    }

    pub fn h0(&self) -> f64 {
        1.0 / self.base_elements as f64
    }

    pub fn mesh(&self, level: u32) -> Result<MeshLevel> {
        MeshLevel::new(self.base_elements, level)
    }

    /// Work units of one solve at `level`: the element count `h_l^{-1}`.
    pub fn solve_work(&self, level: u32) -> u64 {
        (self.base_elements as u64) << level
    }

    /// Work units of one level update: both solves for `l >= 2`.
    pub fn delta_work(&self, level: u32) -> u64 {
        match level {
            0 => 0,
            1 => self.solve_work(1),
            l => self.solve_work(l) + self.solve_work(l - 1),
        }
    }
}

/// `g_l(y)` with degree-1 elements, and its work units.
pub fn eval_g(problem: &DiffusionProblem, hierarchy: &Hierarchy, level: u32, y: &[f64]) -> Result<(f64, u64)> {
    let mesh = hierarchy.mesh(level)?;
    let sol = solve_fem(problem, &mesh, y, 1)?;
    Ok((qoi(&sol), hierarchy.solve_work(level)))
}

/// `g_l(y) - g_{l-1}(y)` with `g_0 := 0`, and its work units.
pub fn eval_delta_g(problem: &DiffusionProblem, hierarchy: &Hierarchy, level: u32, y: &[f64]) -> Result<(f64, u64)> {
    match level {
        0 => Err(Error::Input("level updates start at l = 1".into())),
        1 => eval_g(problem, hierarchy, 1, y),
        l => {
            let (fine, wf) = eval_g(problem, hierarchy, l, y)?;
            let (coarse, wc) = eval_g(problem, hierarchy, l - 1, y)?;
            Ok((fine - coarse, wf + wc))
        }
    }
}

/// `tau = h0^{-1} (2 N_1 + sum_{l>=2} N_l (2^l + 2^{l-1}))`; `counts[0]`
/// is level 1.
pub fn work_estimate(counts: &[usize], h0: f64) -> f64 {
    let mut tau = 0.0;
    for (i, &n) in counts.iter().enumerate() {
        let l = i as i32 + 1;
        let per = if l == 1 { 2.0 } else { 2f64.powi(l) + 2f64.powi(l - 1) };
        tau += n as f64 * per;
    }
    tau / h0
}

/// Degree-2 solve on a uniform mesh with `elements` elements.
pub fn reference_qoi_with(problem: &DiffusionProblem, y: &[f64], elements: usize) -> Result<f64> {
    let mesh = MeshLevel::new(elements, 0)?;
    Ok(qoi(&solve_fem(problem, &mesh, y, 2)?))
}

/// Reference QoI at `h = 2^-14` with quadratic elements.
pub fn reference_qoi(problem: &DiffusionProblem, y: &[f64]) -> Result<f64> {
    reference_qoi_with(problem, y, REFERENCE_ELEMENTS)
}
