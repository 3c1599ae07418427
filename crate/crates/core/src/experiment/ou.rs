use serde::{Deserialize, Serialize};

use super::config::OuCheckpoint;
use crate::diffusion::{beta_coeff, ou_moments, random_walk_moments, LatentMoments, OuPhase};
use crate::error::{Error, Result};

pub const MIN_OU_SEEDS: usize = 30;

/// Full h-vectors of one seed at the configured checkpoint iterations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedCheckpoints {
    pub seed: u64,
    pub iters: Vec<u64>,
    pub h: Vec<Vec<f64>>,
}

impl SeedCheckpoints {
    fn at(&self, iter: u64) -> Option<&[f64]> {
        self.iters
            .iter()
            .position(|&k| k == iter)
            .map(|i| self.h[i].as_slice())
    }
}

/// What the diffusion limit needs to know about the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OuTheory {
    pub eta: f64,
    /// Eigenvalues of the embedding, in basis order.
    pub lambda: Vec<f64>,
    pub moments: LatentMoments,
    /// 1-based index of the saddle the runs start from.
    pub saddle: usize,
    /// h-coordinate of the iterate at `k = 0`, per seed-independent start.
    pub h0: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointReport {
    pub iter: u64,
    pub coord: usize,
    pub phase: OuPhase,
    /// `"h/sqrt(eta)"` in the escape phase, `"h"` in the converge phase.
    pub scale: String,
    pub seeds: Vec<u64>,
    pub values: Vec<f64>,
    pub sample_mean: f64,
    pub sample_var: f64,
    pub theory_mean: f64,
    pub theory_var: f64,
    pub gap: f64,
    pub beta: f64,
    pub var_ratio: Option<f64>,
    /// `(s² − σ²) / (σ² √(2/(n−1)))`, the normal-theory z-score.
    pub var_z: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OuReport {
    pub n_seeds: usize,
    pub checkpoints: Vec<CheckpointReport>,
}

fn mean_var(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Rate and noise of coordinate `coord` around the equilibrium `anchor`
/// (both 1-based): `|λ_coord − λ_anchor|` and `β_{coord,anchor}`.
fn linearization(theory: &OuTheory, coord: usize, anchor: usize) -> Result<(f64, f64)> {
    let n = theory.lambda.len();
    if coord == 0 || coord > n || anchor == 0 || anchor > n {
        return Err(Error::InvalidArgument(format!(
            "coordinate {coord} or anchor {anchor} outside 1..={n}"
        )));
    }
    let d = theory.moments.d();
    let gap = (theory.lambda[coord - 1] - theory.lambda[anchor - 1]).abs();
    let beta = if 2 * d == n {
        beta_coeff(coord, anchor, &theory.moments, d)?
    } else {
        return Err(Error::InvalidArgument(
            "noise coefficients are only defined for square cross-covariance".into(),
        ));
    };
    Ok((gap, beta))
}

/// Compares per-seed coordinate values at each checkpoint with the O-U law.
///
/// Escape-phase checkpoints use the rescaled coordinate `h/√η` started from
/// the initial value at the saddle, at time `ηk`. Converge-phase checkpoints
/// use the stationary law of `h` around the optimum, with variance
/// `η β²/(2·gap)`.
pub fn ou_distribution_report(
    samples: &[SeedCheckpoints],
    checkpoints: &[OuCheckpoint],
    theory: &OuTheory,
) -> Result<OuReport> {
    if samples.len() < MIN_OU_SEEDS {
        return Err(Error::InvalidArgument(format!(
            "O-U comparison needs at least {MIN_OU_SEEDS} seeds, got {}",
            samples.len()
        )));
    }
    if !(theory.eta > 0.0) {
        return Err(Error::InvalidArgument("O-U comparison needs eta > 0".into()));
    }
    let sq = theory.eta.sqrt();
    let mut out = Vec::with_capacity(checkpoints.len());
    for cp in checkpoints {
        let mut seeds = Vec::with_capacity(samples.len());
        let mut values = Vec::with_capacity(samples.len());
        for s in samples {
            let h = s.at(cp.iter).ok_or_else(|| {
                Error::InvalidArgument(format!("seed {} has no value at iteration {}", s.seed, cp.iter))
            })?;
            let x = *h.get(cp.coord - 1).ok_or_else(|| {
                Error::InvalidArgument(format!("coordinate {} not recorded", cp.coord))
            })?;
            seeds.push(s.seed);
            values.push(match cp.phase {
                OuPhase::Escape => x / sq,
                OuPhase::Converge => x,
            });
        }
        let (theory_mean, theory_var, gap, beta, scale) = match cp.phase {
            OuPhase::Escape => {
                let (gap, beta) = linearization(theory, cp.coord, theory.saddle)?;
                let z0 = theory.h0[cp.coord - 1] / sq;
                let t = theory.eta * cp.iter as f64;
                let (m, v) = if gap == 0.0 {
                    random_walk_moments(z0, beta, t)
                } else {
                    ou_moments(z0, gap, beta, t, OuPhase::Escape)?
                };
                (m, v, gap, beta, "h/sqrt(eta)")
            }
            OuPhase::Converge => {
                let (gap, beta) = linearization(theory, cp.coord, 1)?;
                let (_, v) = ou_moments(0.0, gap, beta, f64::INFINITY, OuPhase::Converge)?;
                (0.0, theory.eta * v, gap, beta, "h")
            }
        };
        let (sample_mean, sample_var) = mean_var(&values);
        let n = values.len() as f64;
        let (var_ratio, var_z) = if theory_var > 0.0 {
            (
                Some(sample_var / theory_var),
                Some((sample_var - theory_var) / (theory_var * (2.0 / (n - 1.0)).sqrt())),
            )
        } else {
            (None, None)
        };
        out.push(CheckpointReport {
            iter: cp.iter,
            coord: cp.coord,
            phase: cp.phase,
            scale: scale.into(),
            seeds,
            values,
            sample_mean,
            sample_var,
            theory_mean,
            theory_var,
            gap,
            beta,
            var_ratio,
            var_z,
        });
    }
    Ok(OuReport {
        n_seeds: samples.len(),
        checkpoints: out,
    })
}
