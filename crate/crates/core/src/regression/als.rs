//! Alternating sweeps over the core position (sparse and semi-sparse).

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::design::{design_matrix, BasisValues};
use super::lasso::lambda_cv;
use super::surrogate::{Algorithm, FitDiagnostics, MicrostepRecord, Surrogate};
use super::{FitConfig, SampleSet};
use crate::basis::WeightSequence;
use crate::error::{Error, Result};
use crate::tt::{
    interface_weights, omega_orthogonal_canonicalize, sparse_canonicalize, ComponentTensor, TensorTrain,
};

/// Sparse alternating least squares.
pub fn sals_fit(samples: &SampleSet, degrees: &[usize], weights: &WeightSequence, config: &FitConfig) -> Result<Surrogate> {
    fit(samples, degrees, weights, config, Algorithm::Sals)
}

/// Semi-sparse alternating least squares with rank increases on stagnation.
pub fn ssals_fit(samples: &SampleSet, degrees: &[usize], weights: &WeightSequence, config: &FitConfig) -> Result<Surrogate> {
    fit(samples, degrees, weights, config, Algorithm::Ssals)
}

fn replace_core(tt: &TensorTrain, k: usize, core: ComponentTensor) -> Result<TensorTrain> {
    let flags = tt.orthogonality().to_vec();
    let mut comps = tt.components().to_vec();
    comps[k] = core;
    TensorTrain::with_core(comps, tt.core_position(), flags)
}

/// Adds one rank between components `k` and `k+1`: a zero slice in `k` and
/// a small random slice in `k+1`, leaving the represented tensor unchanged.
fn rank_kick(tt: &TensorTrain, k: usize, scale: f64, rng: &mut ChaCha8Rng) -> Result<TensorTrain> {
    let mut comps = tt.components().to_vec();
    let (rl, d, rr) = comps[k].shape();
    comps[k] = ComponentTensor::from_entries((rl, d, rr + 1), comps[k].entries().to_vec())?;
    let (_, d2, rr2) = comps[k + 1].shape();
    let mut entries: Vec<(usize, usize, usize, f64)> =
        comps[k + 1].entries().iter().map(|&(a, t, b, v)| (a, t, b, v)).collect();
    for b in 0..rr2 {
        for t in 0..d2 {
            entries.push((rr, t, b, scale * rng.gen_range(-1.0..1.0)));
        }
    }
    comps[k + 1] = ComponentTensor::from_entries((rr + 1, d2, rr2), entries)?;
    TensorTrain::new(comps)
}

/// Truncates the interface between the core at `k` and component `k+1`,
/// dropping singular values of the core's left unfolding at or below
/// `rel_tol * sigma_max`.
fn truncate_interface(tt: &TensorTrain, k: usize, rel_tol: f64) -> Result<TensorTrain> {
    let core = tt.component(k);
    let (rl, d, rr) = core.shape();
    if rr <= 1 {
        return Ok(tt.clone());
    }
    let svd = core.unfold_left().svd(true, true);
    let smax = svd.singular_values.max();
    let keep: Vec<usize> = (0..svd.singular_values.len()).filter(|&i| svd.singular_values[i] > rel_tol * smax).collect();
    if keep.len() >= rr || keep.is_empty() {
        return Ok(tt.clone());
    }
    let u = svd.u.ok_or_else(|| Error::Internal("svd without U".into()))?;
    let vt = svd.v_t.ok_or_else(|| Error::Internal("svd without V".into()))?;
    let r = keep.len();
    let us = DMatrix::from_fn(rl * d, r, |i, c| u[(i, keep[c])] * svd.singular_values[keep[c]]);
    let vt_r = DMatrix::from_fn(r, rr, |c, j| vt[(keep[c], j)]);
    let next = tt.component(k + 1);
    let (_, d2, rr2) = next.shape();
    let next_r = vt_r * next.unfold_right();
    let mut comps = tt.components().to_vec();
    comps[k] = ComponentTensor::fold_left(&us, rl, d)?;
    comps[k + 1] = ComponentTensor::fold_right(&next_r, d2, rr2)?;
    TensorTrain::new(comps)
}

struct Snapshot {
    tt: TensorTrain,
    validation: f64,
    lambda: f64,
    l0: f64,
}

/// Shared sweep driver.
pub fn fit(
    samples: &SampleSet,
    degrees: &[usize],
    weights: &WeightSequence,
    config: &FitConfig,
    algorithm: Algorithm,
) -> Result<Surrogate> {
    if samples.is_empty() {
        return Err(Error::Input("empty sample set".into()));
    }
    let m = degrees.len();
    if m == 0 {
        return Err(Error::Input("at least one mode is required".into()));
    }
    let dims: Vec<usize> = degrees.iter().map(|n| n + 1).collect();
    let basis = BasisValues::new(samples.points(), &dims)?;
    let mut f = samples.values().to_vec();
    let row_scale: Vec<f64> = samples.weights().iter().map(|w| w.sqrt()).collect();
    for (fi, s) in f.iter_mut().zip(&row_scale) {
        *fi *= s;
    }
    let tables = weights.tables(m, *degrees.iter().max().unwrap_or(&0));
    let tables: Vec<Vec<f64>> = tables.into_iter().zip(&dims).map(|(t, &d)| t[..d].to_vec()).collect();
    let mean = samples.values().iter().sum::<f64>() / samples.len() as f64;
    let mut tt = TensorTrain::constant(&dims, mean)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let mut log = Vec::new();
    let mut history: Vec<f64> = Vec::new();
    let mut best: Option<Snapshot> = None;
    // The semi-sparse scheme starts by raising every rank once.
    let mut kick_pending = algorithm == Algorithm::Ssals;
    // Sweep of the latest rank increase per interface; fresh directions are
    // exempt from truncation for two sweeps.
    let mut kicked = vec![0usize; m];
    let mut stagnant = 0usize;

    let mut last = (f64::INFINITY, 0.0, 0.0);
    for sweep in 1..=config.max_sweeps.max(1) {
        for k in 0..m {
            if algorithm == Algorithm::Ssals && k > 0 && last.0.is_finite() && sweep > kicked[k - 1] + 2 {
                tt = truncate_interface(&tt, k - 1, config.truncation * last.0)?;
            }
            if algorithm == Algorithm::Ssals && kick_pending && k + 1 < m && tt.component(k).right_rank() < config.max_rank {
                tt = rank_kick(&tt, k, config.kick_scale, &mut rng)?;
                kicked[k] = sweep;
            }
            let (canon, iw) = match algorithm {
                Algorithm::Sals => {
                    let c = sparse_canonicalize(&tt, k)?;
                    let w = interface_weights(&c, k, &tables);
                    (c, w)
                }
                Algorithm::Ssals => omega_orthogonal_canonicalize(&tt, k, &tables)?,
            };
            let mut a = design_matrix(&basis, &canon, k)?;
            for (i, &s) in row_scale.iter().enumerate() {
                if s != 1.0 {
                    a.row_mut(i).scale_mut(s);
                }
            }
            let w = iw.values();
            let cv = lambda_cv(&a, &f, &w, &config.lambda_grid, &config.cv)?;
            let shape = canon.component(k).shape();
            let core = ComponentTensor::from_dense(shape, &cv.coeffs)?;
            let l0: f64 = core
                .entries()
                .iter()
                .map(|&(a, t, b, _)| {
                    let x = iw.get(a, t, b);
                    x * x
                })
                .sum();
            log.push(MicrostepRecord {
                sweep,
                core: k,
                lambda: cv.lambda,
                train_error: cv.train_error,
                validation_error: cv.validation_error,
                core_nnz: core.nnz(),
                ranks: canon.ranks(),
            });
            tt = replace_core(&canon, k, core)?;
            last = (cv.validation_error, cv.lambda, l0);
        }
        let (val, lambda, l0) = last;
        let improved = best.as_ref().map(|b| val < b.validation).unwrap_or(true);
        let prev_best = best.as_ref().map(|b| b.validation).unwrap_or(f64::INFINITY);
        if improved {
            best = Some(Snapshot { tt: tt.clone(), validation: val, lambda, l0 });
        }
        history.push(val);
        if val <= config.floor {
            break;
        }
        match algorithm {
            Algorithm::Sals => {
                let s = history.len();
                if s >= 3 && history[s - 3] - history[s - 1] < config.tol * history[s - 3] {
                    break;
                }
            }
            Algorithm::Ssals => {
                if prev_best - val < config.tol * prev_best {
                    stagnant += 1;
                } else {
                    stagnant = 0;
                }
                let can_grow = (0..m - 1).any(|k| tt.component(k).right_rank() < config.max_rank);
                if stagnant >= 3 || (stagnant >= 1 && !can_grow) {
                    break;
                }
                kick_pending = prev_best - val < config.kick_tol * prev_best;
            }
        }
    }

    let best = best.ok_or_else(|| Error::Internal("no sweep completed".into()))?;
    let diagnostics = FitDiagnostics {
        sweeps: history.len(),
        lambda: best.lambda,
        validation_error: best.validation,
        core_l0_weight: best.l0,
        log,
    };
    Ok(Surrogate { tt: best.tt, degrees: degrees.to_vec(), weights: weights.clone(), algorithm, diagnostics })
}
