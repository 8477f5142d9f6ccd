//! Fitted surrogates: evaluation and the JSON file format.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::basis::{legendre_into, WeightSequence};
use crate::error::{Error, Result};
use crate::tt::{ComponentTensor, Orthogonality, TensorTrain};

/// Which alternating scheme produced a surrogate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Sals,
    Ssals,
}

impl Algorithm {
    pub fn as_str(&self) -> &'static str {
        match self {
            Algorithm::Sals => "sals",
            Algorithm::Ssals => "ssals",
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sals" => Ok(Algorithm::Sals),
            "ssals" => Ok(Algorithm::Ssals),
            _ => Err(Error::Parse(format!("unknown algorithm `{s}`"))),
        }
    }
}

/// One record per microstep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MicrostepRecord {
    pub sweep: usize,
    pub core: usize,
    pub lambda: f64,
    pub train_error: f64,
    pub validation_error: f64,
    pub core_nnz: usize,
    pub ranks: Vec<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub sweeps: usize,
    pub lambda: f64,
    pub validation_error: f64,
    /// Weighted l0 norm (sum of squared interface weights) of the core.
    pub core_l0_weight: f64,
    #[serde(default)]
    pub log: Vec<MicrostepRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Surrogate {
    pub tt: TensorTrain,
    pub degrees: Vec<usize>,
    pub weights: WeightSequence,
    pub algorithm: Algorithm,
    pub diagnostics: FitDiagnostics,
}

impl Surrogate {
    pub fn order(&self) -> usize {
        self.tt.order()
    }

    /// Value at `y`; `y` must lie in `[-1, 1]^M`.
    pub fn eval(&self, y: &[f64]) -> Result<f64> {
        if y.len() != self.order() {
            return Err(Error::Input(format!("point has {} coordinates, expected {}", y.len(), self.order())));
        }
        if let Some(v) = y.iter().find(|v| !(-1.0..=1.0).contains(*v)) {
            return Err(Error::Input(format!("coordinate {v} outside [-1, 1]")));
        }
        Ok(self.eval_unchecked(y))
    }

    pub(crate) fn eval_unchecked(&self, y: &[f64]) -> f64 {
        let vals: Vec<Vec<f64>> = y
            .iter()
            .zip(&self.degrees)
            .map(|(&ym, &n)| {
                let mut v = vec![0.0; n + 1];
                legendre_into(ym, &mut v);
                v
            })
            .collect();
        let refs: Vec<&[f64]> = vals.iter().map(|v| v.as_slice()).collect();
        self.tt.contract_vectors(&refs)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&SurrogateFile::from(self))?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let file: SurrogateFile = serde_json::from_str(s)?;
        file.try_into()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Free-function form of [`Surrogate::eval`].
pub fn surrogate_eval(surrogate: &Surrogate, y: &[f64]) -> Result<f64> {
    surrogate.eval(y)
}

pub(crate) const FORMAT: &str = "mltt-surrogate";

#[derive(Serialize, Deserialize)]
struct ComponentFile {
    shape: [usize; 3],
    entries: Vec<(usize, usize, usize, f64)>,
}

#[derive(Serialize, Deserialize)]
struct SurrogateFile {
    format: String,
    version: u32,
    dims: Vec<usize>,
    ranks: Vec<usize>,
    core_position: Option<usize>,
    degrees: Vec<usize>,
    weights: WeightSequence,
    algorithm: Algorithm,
    components: Vec<ComponentFile>,
    diagnostics: FitDiagnostics,
}

impl From<&Surrogate> for SurrogateFile {
    fn from(s: &Surrogate) -> Self {
        SurrogateFile {
            format: FORMAT.into(),
            version: 1,
            dims: s.tt.dims(),
            ranks: s.tt.ranks(),
            core_position: s.tt.core_position(),
            degrees: s.degrees.clone(),
            weights: s.weights.clone(),
            algorithm: s.algorithm,
            components: s
                .tt
                .components()
                .iter()
                .map(|c| {
                    let (a, b, d) = c.shape();
                    ComponentFile { shape: [a, b, d], entries: c.entries().to_vec() }
                })
                .collect(),
            diagnostics: s.diagnostics.clone(),
        }
    }
}

impl TryFrom<SurrogateFile> for Surrogate {
    type Error = Error;
    fn try_from(f: SurrogateFile) -> Result<Self> {
        if f.format != FORMAT || f.version != 1 {
            return Err(Error::Parse(format!("unsupported surrogate format {} v{}", f.format, f.version)));
        }
        let components = f
            .components
            .into_iter()
            .map(|c| ComponentTensor::from_entries((c.shape[0], c.shape[1], c.shape[2]), c.entries))
            .collect::<Result<Vec<_>>>()?;
        let m = components.len();
        let tt = match f.core_position {
            Some(k) => {
                let flags = (0..m)
                    .map(|j| match j.cmp(&k) {
                        std::cmp::Ordering::Less => Orthogonality::Left,
                        std::cmp::Ordering::Greater => Orthogonality::Right,
                        std::cmp::Ordering::Equal => Orthogonality::None,
                    })
                    .collect();
                TensorTrain::with_core(components, Some(k), flags)?
            }
            None => TensorTrain::new(components)?,
        };
        if tt.dims() != f.dims || tt.ranks() != f.ranks {
            return Err(Error::Parse("dims or ranks disagree with the components".into()));
        }
        if f.degrees.len() != m || f.degrees.iter().zip(&f.dims).any(|(n, d)| n + 1 != *d) {
            return Err(Error::Parse("degree bounds disagree with the mode sizes".into()));
        }
        Ok(Surrogate { tt, degrees: f.degrees, weights: f.weights, algorithm: f.algorithm, diagnostics: f.diagnostics })
    }
}
