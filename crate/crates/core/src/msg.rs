//! Matrix stochastic gradient on the convex relaxation
//! `max ⟨M, Σ⟩ s.t. ‖M‖_* ≤ 1, ‖M‖₂ ≤ 1`.
//!
//! Each step adds `η x yᵀ` and projects back onto the feasible set through a
//! full SVD and a capped-simplex projection of the singular values.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::oracle::svd;
use crate::pls_core::TwoViewSample;

const BISECTION_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct MsgIterate {
    pub m: Array2<f64>,
    pub step_count: u64,
}

impl MsgIterate {
    pub fn zeros(m: usize, d: usize) -> Self {
        MsgIterate {
            m: Array2::zeros((m, d)),
            step_count: 0,
        }
    }

    /// Leading singular pair of the iterate, used to compare against the
    /// vector iterate of the Hebbian method.
    pub fn leading_pair(&self) -> Result<(Array1<f64>, Array1<f64>)> {
        let s = svd(self.m.view())?;
        Ok((s.o_x.column(0).to_owned(), s.o_y.column(0).to_owned()))
    }
}

/// Euclidean projection onto `{s : 0 ≤ sᵢ ≤ cap, Σ sᵢ ≤ budget}`.
pub fn capped_simplex_project(sigma: &[f64], cap: f64, budget: f64) -> Vec<f64> {
    let clipped: Vec<f64> = sigma.iter().map(|&s| s.clamp(0.0, cap)).collect();
    if clipped.iter().sum::<f64>() <= budget {
        return clipped;
    }
    let mass = |theta: f64| -> f64 { sigma.iter().map(|&s| (s - theta).clamp(0.0, cap)).sum() };
    // mass is nonincreasing in θ; mass(0) > budget and mass(max σ) = 0
    let mut lo = 0.0;
    let mut hi = sigma.iter().cloned().fold(0.0, f64::max);
    while hi - lo > BISECTION_TOL {
        let mid = 0.5 * (lo + hi);
        if mass(mid) > budget {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let theta = 0.5 * (lo + hi);
    sigma.iter().map(|&s| (s - theta).clamp(0.0, cap)).collect()
}

/// Projection onto the rank-1 feasible set: singular values capped at 1 with
/// total at most 1.
pub fn fantope_project(m: &Array2<f64>) -> Result<Array2<f64>> {
    let s = svd(m.view())?;
    let projected = capped_simplex_project(s.singular.as_slice().unwrap(), 1.0, 1.0);
    let (rows, cols) = m.dim();
    let mut out = Array2::zeros((rows, cols));
    for (k, &sk) in projected.iter().enumerate() {
        if sk == 0.0 {
            continue;
        }
        let u = s.o_x.column(k);
        let v = s.o_y.column(k);
        for i in 0..rows {
            let a = sk * u[i];
            for j in 0..cols {
                out[[i, j]] += a * v[j];
            }
        }
    }
    Ok(out)
}

/// `M' = Π(M + η x yᵀ)`.
pub fn msg_step(iter: &MsgIterate, s: &TwoViewSample, eta: f64) -> Result<MsgIterate> {
    let (rows, cols) = iter.m.dim();
    if s.x.len() != rows {
        return Err(Error::dim("msg_step x", rows, s.x.len()));
    }
    if s.y.len() != cols {
        return Err(Error::dim("msg_step y", cols, s.y.len()));
    }
    if !(eta.is_finite() && eta >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "step size must be nonnegative, got {eta}"
        )));
    }
    let mut next = iter.m.clone();
    for i in 0..rows {
        let a = eta * s.x[i];
        for j in 0..cols {
            next[[i, j]] += a * s.y[j];
        }
    }
    Ok(MsgIterate {
        m: fantope_project(&next)?,
        step_count: iter.step_count + 1,
    })
}

/// `λ₁ − ⟨M, Σ⟩`.
pub fn msg_objective_gap(iter: &MsgIterate, sigma_xy: &Array2<f64>, lambda1: f64) -> Result<f64> {
    if iter.m.dim() != sigma_xy.dim() {
        return Err(Error::dim("msg_objective_gap", sigma_xy.len(), iter.m.len()));
    }
    Ok(lambda1 - (&iter.m * sigma_xy).sum())
}
