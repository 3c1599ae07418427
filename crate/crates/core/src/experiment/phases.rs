use serde::{Deserialize, Serialize};

use crate::diffusion::PhasePrediction;
use crate::error::{Error, Result};
use crate::pls_core::Trajectory;

/// First-crossing iterations for one seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SeedPhases {
    pub seed: u64,
    /// First `k` with `h₂² ≤ 1 − δ²`.
    pub escape: Option<u64>,
    /// First `k` at or after escape with `h₁² ≥ 1 − δ²`.
    pub arrival: Option<u64>,
    /// First `k` at or after arrival with `Σ_{i≥2} hᵢ² ≤ ε`.
    pub convergence: Option<u64>,
}

impl SeedPhases {
    pub fn ordered(&self) -> bool {
        match (self.escape, self.arrival, self.convergence) {
            (Some(e), Some(a), Some(c)) => e <= a && a <= c,
            _ => true,
        }
    }
}

/// Streaming detector; each event is searched only after the previous one
/// has fired.
#[derive(Debug, Clone)]
pub struct PhaseDetector {
    threshold: f64,
    epsilon: f64,
    phases: SeedPhases,
}

impl PhaseDetector {
    pub fn new(seed: u64, delta: f64, epsilon: f64) -> Self {
        PhaseDetector {
            threshold: 1.0 - delta * delta,
            epsilon,
            phases: SeedPhases {
                seed,
                ..Default::default()
            },
        }
    }

    /// `tail` is `Σ_{i≥2} hᵢ²`.
    pub fn observe(&mut self, k: u64, h1: f64, h2: f64, tail: f64) {
        let p = &mut self.phases;
        if p.escape.is_none() {
            if h2 * h2 <= self.threshold {
                p.escape = Some(k);
            } else {
                return;
            }
        }
        if p.arrival.is_none() {
            if h1 * h1 >= self.threshold {
                p.arrival = Some(k);
            } else {
                return;
            }
        }
        if p.convergence.is_none() && tail <= self.epsilon {
            p.convergence = Some(k);
        }
    }

    pub fn finish(self) -> SeedPhases {
        self.phases
    }
}

/// Runs the detector over a logged trajectory.
///
/// `dim` is `m + d`. When every coordinate `h1..h{dim}` was logged the tail
/// mass is exact; otherwise it is taken as `1 − h₁²`, which is accurate to the
/// norm drift of the iterate.
pub fn detect_phases(
    traj: &Trajectory,
    dim: usize,
    seed: u64,
    delta: f64,
    epsilon: f64,
) -> Result<SeedPhases> {
    let h1 = traj
        .series("h1")
        .ok_or_else(|| Error::InvalidArgument("phase detection needs the h1 series".into()))?;
    let h2 = traj
        .series("h2")
        .ok_or_else(|| Error::InvalidArgument("phase detection needs the h2 series".into()))?;
    let rest: Option<Vec<Vec<f64>>> = (2..=dim).map(|i| traj.series(&format!("h{i}"))).collect();
    let mut det = PhaseDetector::new(seed, delta, epsilon);
    for (row, &k) in traj.iters.iter().enumerate() {
        let tail = match &rest {
            Some(cols) => cols.iter().map(|c| c[row] * c[row]).sum(),
            None => 1.0 - h1[row] * h1[row],
        };
        det.observe(k, h1[row], h2[row], tail);
    }
    Ok(det.finish())
}

/// Order statistics over the seeds where an event occurred.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quartiles {
    pub count: usize,
    pub q1: Option<f64>,
    pub median: Option<f64>,
    pub q3: Option<f64>,
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    Some(sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo]))
}

impl Quartiles {
    pub fn of(values: impl IntoIterator<Item = f64>) -> Self {
        let mut v: Vec<f64> = values.into_iter().collect();
        v.sort_by(f64::total_cmp);
        Quartiles {
            count: v.len(),
            q1: quantile(&v, 0.25),
            median: quantile(&v, 0.5),
            q3: quantile(&v, 0.75),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseReport {
    pub delta: f64,
    pub epsilon: f64,
    pub n_seeds: usize,
    pub seeds: Vec<SeedPhases>,
    pub escape: Quartiles,
    pub arrival: Quartiles,
    pub convergence: Quartiles,
    pub ordering_violations: usize,
    pub prediction: Option<PhasePrediction>,
    /// Why no prediction is available, when it is not.
    pub prediction_error: Option<String>,
}

impl PhaseReport {
    pub fn new(
        delta: f64,
        epsilon: f64,
        seeds: Vec<SeedPhases>,
        prediction: Result<PhasePrediction>,
    ) -> Self {
        let stat = |f: fn(&SeedPhases) -> Option<u64>| {
            Quartiles::of(seeds.iter().filter_map(f).map(|k| k as f64))
        };
        let (prediction, prediction_error) = match prediction {
            Ok(p) => (Some(p), None),
            Err(e) => (None, Some(e.to_string())),
        };
        PhaseReport {
            delta,
            epsilon,
            n_seeds: seeds.len(),
            escape: stat(|s| s.escape),
            arrival: stat(|s| s.arrival),
            convergence: stat(|s| s.convergence),
            ordering_violations: seeds.iter().filter(|s| !s.ordered()).count(),
            seeds,
            prediction,
            prediction_error,
        }
    }
}
