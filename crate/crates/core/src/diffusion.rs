//! Diffusion-approximation diagnostics for the Hebbian iteration.
//!
//! With `w = (u; v)/√2` and the symmetric embedding `Q = [[0, Σ], [Σᵀ, 0]] = P Λ Pᵀ`,
//! the coordinates `h = Pᵀ w` decouple the mean-field ODE
//! `dH⁽ⁱ⁾/dt = H⁽ⁱ⁾ Σⱼ (λᵢ − λⱼ)(H⁽ʲ⁾)²`, which has a closed-form solution.
//! Near an equilibrium the rescaled fluctuations `η^{-1/2} h⁽ⁱ⁾` behave like
//! Ornstein-Uhlenbeck processes with rate `λᵢ − λⱼ` and noise level `βᵢⱼ`;
//! the helpers here give their moments, a path simulator, and the resulting
//! phase-time and step-size predictions.

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oracle::{inverse_normal_cdf, svd, SvdResult};
use crate::pls_core::PlsIterate;

/// Eigengap below which the leading singular pair is treated as unidentifiable.
pub const EIGENGAP_TOL: f64 = 1e-8;

/// Orthogonal `P` and diagonal `Λ` with `Q = P Λ Pᵀ`.
///
/// Columns are ordered `(a₁;b₁)/√2 … (a_k;b_k)/√2`, then the null-space
/// directions of the longer side, then `(a₁;−b₁)/√2 … (a_k;−b_k)/√2`, where
/// `k = min(m, d)` and `aᵢ, bᵢ` are the singular vectors of `Σ`.
#[derive(Debug, Clone)]
pub struct SpectralBasis {
    pub p: Array2<f64>,
    pub lambda: Array1<f64>,
    pub m: usize,
    pub d: usize,
    pub rect: bool,
    pub svd: SvdResult,
}

impl SpectralBasis {
    /// Leading singular pair `(û, v̂)`.
    pub fn leading_pair(&self) -> (Array1<f64>, Array1<f64>) {
        self.singular_pair(0)
    }

    /// The `i`-th (0-based) singular pair.
    pub fn singular_pair(&self, i: usize) -> (Array1<f64>, Array1<f64>) {
        (
            self.svd.o_x.column(i).to_owned(),
            self.svd.o_y.column(i).to_owned(),
        )
    }

    pub fn eigengap(&self) -> f64 {
        if self.svd.singular.len() < 2 {
            self.svd.singular[0]
        } else {
            self.svd.singular[0] - self.svd.singular[1]
        }
    }

    /// `P Λ Pᵀ`.
    pub fn reconstruct_q(&self) -> Array2<f64> {
        let pl = &self.p * &self.lambda.view().insert_axis(ndarray::Axis(0));
        pl.dot(&self.p.t())
    }
}

/// The symmetric embedding `[[0, Σ], [Σᵀ, 0]]`.
pub fn embedding(sigma_xy: &Array2<f64>) -> Array2<f64> {
    let (m, d) = sigma_xy.dim();
    let mut q = Array2::zeros((m + d, m + d));
    q.slice_mut(ndarray::s![0..m, m..m + d]).assign(sigma_xy);
    q.slice_mut(ndarray::s![m..m + d, 0..m])
        .assign(&sigma_xy.t());
    q
}

pub fn build_basis(sigma_xy: &Array2<f64>) -> Result<SpectralBasis> {
    let (m, d) = sigma_xy.dim();
    if m == 0 || d == 0 {
        return Err(Error::InvalidArgument("empty covariance matrix".into()));
    }
    let svd = svd(sigma_xy.view())?;
    let k = m.min(d);
    if k >= 2 {
        let gap = svd.singular[0] - svd.singular[1];
        if gap <= EIGENGAP_TOL {
            return Err(Error::Unidentifiable { gap });
        }
    }
    let n = m + d;
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let mut p = Array2::zeros((n, n));
    let mut lambda = Array1::zeros(n);
    for i in 0..k {
        let a = svd.o_x.column(i);
        let b = svd.o_y.column(i);
        let lo = i;
        let hi = n - k + i;
        for row in 0..m {
            p[[row, lo]] = r * a[row];
            p[[row, hi]] = r * a[row];
        }
        for row in 0..d {
            p[[m + row, lo]] = r * b[row];
            p[[m + row, hi]] = -r * b[row];
        }
        lambda[lo] = svd.singular[i];
        lambda[hi] = -svd.singular[i];
    }
    // null directions of the longer side carry eigenvalue 0
    let mut col = k;
    for j in k..m {
        for row in 0..m {
            p[[row, col]] = svd.o_x[[row, j]];
        }
        col += 1;
    }
    for j in k..d {
        for row in 0..d {
            p[[m + row, col]] = svd.o_y[[row, j]];
        }
        col += 1;
    }
    debug_assert_eq!(col, n - k);
    Ok(SpectralBasis {
        p,
        lambda,
        m,
        d,
        rect: m != d,
        svd,
    })
}

/// `h = Pᵀ (u; v)/√2`.
pub fn to_h(iter: &PlsIterate, basis: &SpectralBasis) -> Result<Array1<f64>> {
    if iter.u.len() != basis.m {
        return Err(Error::dim("to_h u", basis.m, iter.u.len()));
    }
    if iter.v.len() != basis.d {
        return Err(Error::dim("to_h v", basis.d, iter.v.len()));
    }
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let n = basis.m + basis.d;
    let mut h = Array1::zeros(n);
    for (j, hj) in h.iter_mut().enumerate() {
        let col = basis.p.column(j);
        let mut acc = 0.0;
        for (i, ui) in iter.u.iter().enumerate() {
            acc += col[i] * ui;
        }
        for (i, vi) in iter.v.iter().enumerate() {
            acc += col[basis.m + i] * vi;
        }
        *hj = r * acc;
    }
    Ok(h)
}

/// Right-hand side of the decoupled ODE: `hᵢ Σⱼ (λᵢ − λⱼ) hⱼ²`.
pub fn ode_rhs(h: &Array1<f64>, lambda: &Array1<f64>) -> Array1<f64> {
    let norm2: f64 = h.iter().map(|x| x * x).sum();
    let weighted: f64 = h.iter().zip(lambda).map(|(x, l)| l * x * x).sum();
    ndarray::Zip::from(h)
        .and(lambda)
        .map_collect(|&hi, &li| hi * (li * norm2 - weighted))
}

/// Closed-form ODE flow `H(t) = C(t)^{-1/2} H(0) ∘ exp(λ t)`.
///
/// Exponents are shifted by their maximum before exponentiating, so any `t`
/// is safe. The result is unit-norm for any nonzero `h0`.
pub fn ode_solution(h0: &Array1<f64>, lambda: &Array1<f64>, t: f64) -> Array1<f64> {
    let logs: Vec<Option<f64>> = h0
        .iter()
        .zip(lambda)
        .map(|(&h, &l)| (h != 0.0).then(|| h.abs().ln() + l * t))
        .collect();
    let top = logs
        .iter()
        .flatten()
        .fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let scaled: Vec<f64> = logs
        .iter()
        .zip(h0)
        .map(|(l, h)| l.map_or(0.0, |l| h.signum() * (l - top).exp()))
        .collect();
    let c: f64 = scaled.iter().map(|x| x * x).sum::<f64>().sqrt();
    Array1::from_iter(scaled.into_iter().map(|x| x / c))
}

/// Latent second and fourth moments: `γᵢ = Var X̄ᵢ`, `ωᵢ = Var Ȳᵢ`,
/// `αᵢⱼ = E[X̄ᵢȲᵢX̄ⱼȲⱼ]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentMoments {
    pub gamma: Array1<f64>,
    pub omega: Array1<f64>,
    pub alpha: Array2<f64>,
}

impl LatentMoments {
    /// Moments of jointly Gaussian latents with cross-covariance
    /// `diag(lambda)`, by Isserlis' theorem:
    /// `αᵢⱼ = λᵢλⱼ + (Σ_X̄X̄)ᵢⱼ(Σ_ȲȲ)ᵢⱼ + [i = j] λᵢ²`.
    pub fn gaussian(
        sigma_xx: &Array2<f64>,
        lambda: &Array1<f64>,
        sigma_yy: &Array2<f64>,
    ) -> Result<Self> {
        let d = lambda.len();
        if sigma_xx.nrows() < d || sigma_xx.ncols() < d {
            return Err(Error::dim("latent sigma_xx", d, sigma_xx.nrows()));
        }
        if sigma_yy.dim() != (d, d) {
            return Err(Error::dim("latent sigma_yy", d, sigma_yy.nrows()));
        }
        let gamma = Array1::from_iter((0..d).map(|i| sigma_xx[[i, i]]));
        let omega = Array1::from_iter((0..d).map(|i| sigma_yy[[i, i]]));
        let alpha = Array2::from_shape_fn((d, d), |(i, j)| {
            let extra = if i == j { lambda[i] * lambda[i] } else { 0.0 };
            lambda[i] * lambda[j] + sigma_xx[[i, j]] * sigma_yy[[i, j]] + extra
        });
        let mom = LatentMoments {
            gamma,
            omega,
            alpha,
        };
        mom.validate()?;
        Ok(mom)
    }

    pub fn d(&self) -> usize {
        self.gamma.len()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.gamma.len();
        if self.omega.len() != d {
            return Err(Error::dim("omega", d, self.omega.len()));
        }
        if self.alpha.dim() != (d, d) {
            return Err(Error::dim("alpha", d, self.alpha.nrows()));
        }
        if self.gamma.iter().chain(self.omega.iter()).any(|&x| x <= 0.0) {
            return Err(Error::InvalidArgument(
                "latent variances must be strictly positive".into(),
            ));
        }
        Ok(())
    }
}

/// `βᵢⱼ` for 1-based indices in `1..=2d`. Indices above `d` wrap to `i − d`;
/// the `2αᵢⱼ` term is added when both indices fall on the same side of `d`
/// and subtracted otherwise.
pub fn beta_coeff(i: usize, j: usize, mom: &LatentMoments, d: usize) -> Result<f64> {
    if d != mom.d() {
        return Err(Error::dim("beta_coeff moments", d, mom.d()));
    }
    if i == 0 || j == 0 || i > 2 * d || j > 2 * d {
        return Err(Error::InvalidArgument(format!(
            "beta indices ({i}, {j}) outside 1..={}",
            2 * d
        )));
    }
    let bi = if i > d { i - d } else { i } - 1;
    let bj = if j > d { j - d } else { j } - 1;
    let same_side = (i <= d) == (j <= d);
    let sign = if same_side { 1.0 } else { -1.0 };
    let rad = mom.gamma[bi] * mom.omega[bj]
        + mom.gamma[bj] * mom.omega[bi]
        + sign * 2.0 * mom.alpha[[bi, bj]];
    if rad < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "negative radicand {rad:e} for beta({i}, {j}); moments are inconsistent"
        )));
    }
    Ok(0.5 * rad.sqrt())
}

/// `φ = Σ_{i=1}^{d} βᵢ₁²`.
pub fn phi(mom: &LatentMoments) -> Result<f64> {
    let d = mom.d();
    (1..=d)
        .map(|i| beta_coeff(i, 1, mom, d).map(|b| b * b))
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OuPhase {
    /// Unstable direction: `dZ = +gap·Z dt + β dB`.
    Escape,
    /// Stable direction: `dZ = −gap·Z dt + β dB`.
    Converge,
}

/// Mean and variance of the O-U coordinate at time `t`, started from `z0`.
pub fn ou_moments(z0: f64, gap: f64, beta: f64, t: f64, phase: OuPhase) -> Result<(f64, f64)> {
    if !(gap > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "O-U gap must be positive (use random_walk_moments for ties), got {gap}"
        )));
    }
    if t < 0.0 {
        return Err(Error::InvalidArgument(format!("negative time {t}")));
    }
    let s = beta * beta / (2.0 * gap);
    Ok(match phase {
        OuPhase::Converge => (z0 * (-gap * t).exp(), s * -(-2.0 * gap * t).exp_m1()),
        OuPhase::Escape => (z0 * (gap * t).exp(), s * (2.0 * gap * t).exp_m1()),
    })
}

/// Equal-eigenvalue case: the coordinate is a driftless random walk,
/// `mean = z0`, `var = β² t`.
pub fn random_walk_moments(z0: f64, beta: f64, t: f64) -> (f64, f64) {
    (z0, beta * beta * t)
}

/// Euler-Maruyama path of the O-U coordinate on `[0, t_end]`, including the
/// starting value. `gap = 0` gives the random walk.
pub fn simulate_ou<R: Rng + ?Sized>(
    z0: f64,
    gap: f64,
    beta: f64,
    t_end: f64,
    dt: f64,
    rng: &mut R,
    phase: OuPhase,
) -> Result<Vec<f64>> {
    if !(dt > 0.0) || t_end < dt {
        return Err(Error::InvalidArgument(format!(
            "need dt > 0 and t_end >= dt, got dt={dt}, t_end={t_end}"
        )));
    }
    let steps = (t_end / dt).round() as usize;
    let drift = match phase {
        OuPhase::Escape => gap,
        OuPhase::Converge => -gap,
    };
    let sq = dt.sqrt();
    let mut path = Vec::with_capacity(steps + 1);
    let mut z = z0;
    path.push(z);
    for _ in 0..steps {
        let xi: f64 = rng.sample(StandardNormal);
        z += drift * z * dt + beta * sq * xi;
        path.push(z);
    }
    Ok(path)
}

/// Predicted phase durations with every input echoed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhasePrediction {
    pub eta: f64,
    pub nu: f64,
    pub epsilon: f64,
    pub mu_exponent: f64,
    pub delta: f64,
    pub phi: f64,
    pub beta12: f64,
    pub lambda: Vec<f64>,
    pub t1: f64,
    pub t2: f64,
    pub t3: f64,
    pub t_total: f64,
    pub n1: u64,
    pub n2: u64,
    pub n3: u64,
    pub n_total: u64,
}

/// Phase I duration (escape from the saddle along the top direction).
pub fn escape_time(gap: f64, beta12: f64, eta: f64, delta: f64, nu: f64) -> Result<f64> {
    check_positive("eigengap", gap)?;
    check_positive("eta", eta)?;
    if !(nu > 0.0 && nu < 1.0) {
        return Err(Error::InvalidArgument(format!("nu must lie in (0,1), got {nu}")));
    }
    let q = inverse_normal_cdf((1.0 + nu / 2.0) / 2.0)?;
    let arg = 2.0 * delta * delta * gap / (eta * q * q * beta12 * beta12);
    Ok((arg + 1.0).ln() / gap)
}

/// Phase II duration (deterministic traverse from `δ` to `1 − δ²`).
pub fn traverse_time(gap: f64, delta: f64) -> Result<f64> {
    check_positive("eigengap", gap)?;
    let d2 = delta * delta;
    if !(d2 > 0.0 && d2 < 0.5) {
        return Err(Error::InvalidArgument(format!(
            "requires 0 < δ² < 1/2, got δ² = {d2}"
        )));
    }
    Ok(((1.0 - d2) / d2).ln() / gap)
}

/// Phase III duration. Clamped at zero when the Phase II endpoint is already
/// inside the `ε` target.
pub fn convergence_time(gap: f64, delta: f64, eta: f64, epsilon: f64, phi: f64) -> Result<f64> {
    check_positive("eigengap", gap)?;
    let denom = gap * epsilon - 8.0 * eta * phi;
    if !(denom > 0.0) {
        return Err(Error::StepSizeTooLarge(format!(
            "(λ₁−λ₂)ε > 8ηφ, but (λ₁−λ₂)ε = {:e} and 8ηφ = {:e}",
            gap * epsilon,
            8.0 * eta * phi
        )));
    }
    Ok(((gap * delta * delta / denom).ln() / gap).max(0.0))
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")))
    }
}

/// Evaluates the three phase durations with all proportionality constants 1
/// and `δ = η^{mu_exponent}`.
pub fn phase_times(
    lambda: &Array1<f64>,
    mom: &LatentMoments,
    eta: f64,
    nu: f64,
    epsilon: f64,
    mu_exponent: f64,
) -> Result<PhasePrediction> {
    if lambda.len() < 2 {
        return Err(Error::InvalidArgument(
            "phase times need at least two eigenvalues".into(),
        ));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "epsilon must lie in (0,1), got {epsilon}"
        )));
    }
    check_positive("eta", eta)?;
    let d = mom.d();
    let gap = lambda[0] - lambda[1];
    let delta = eta.powf(mu_exponent);
    let beta12 = beta_coeff(1, 2, mom, d)?;
    let phi = phi(mom)?;
    let t1 = escape_time(gap, beta12, eta, delta, nu)?;
    let t2 = traverse_time(gap, delta)?;
    let t3 = convergence_time(gap, delta, eta, epsilon, phi)?;
    let count = |t: f64| (t / eta).ceil() as u64;
    let (n1, n2, n3) = (count(t1), count(t2), count(t3));
    Ok(PhasePrediction {
        eta,
        nu,
        epsilon,
        mu_exponent,
        delta,
        phi,
        beta12,
        lambda: lambda.to_vec(),
        t1,
        t2,
        t3,
        t_total: t1 + t2 + t3,
        n1,
        n2,
        n3,
        n_total: n1 + n2 + n3,
    })
}

/// `η = ε (λ₁ − λ₂) / φ`.
pub fn recommended_eta(epsilon: f64, lambda1: f64, lambda2: f64, phi: f64) -> f64 {
    epsilon * (lambda1 - lambda2) / phi
}

/// Predicted total time `(1/(λ₁−λ₂)) log(φ / (ε(λ₁−λ₂)))` at the recommended step.
pub fn total_time(epsilon: f64, lambda1: f64, lambda2: f64, phi: f64) -> f64 {
    let gap = lambda1 - lambda2;
    (phi / (epsilon * gap)).ln() / gap
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn max_abs(a: &Array2<f64>) -> f64 {
        a.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
    }

    fn section6_moments() -> LatentMoments {
        let s = array![[6.0, 2.0, 1.0], [2.0, 6.0, 2.0], [1.0, 2.0, 6.0]];
        LatentMoments::gaussian(&s, &array![4.0, 2.0, 0.5], &s).unwrap()
    }

    #[test]
    fn diagonal_sigma_gives_hadamard_basis() {
        let sigma = array![[3.0, 0.0], [0.0, 1.0]];
        let b = build_basis(&sigma).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let expect = array![
            [r, 0.0, r, 0.0],
            [0.0, r, 0.0, r],
            [r, 0.0, -r, 0.0],
            [0.0, r, 0.0, -r]
        ];
        assert!(max_abs(&(&b.p - &expect)) < 1e-15);
        assert_eq!(b.lambda.to_vec(), vec![3.0, 1.0, -3.0, -1.0]);
        assert!(!b.rect);
    }

    #[test]
    fn rectangular_basis_reconstructs_embedding() {
        use rand_distr::StandardNormal;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for &(m, d) in &[(5, 3), (3, 5)] {
            let sigma = Array2::from_shape_fn((m, d), |_| rng.sample::<f64, _>(StandardNormal));
            let b = build_basis(&sigma).unwrap();
            let n = m + d;
            assert!(max_abs(&(b.p.t().dot(&b.p) - Array2::<f64>::eye(n))) <= 1e-10);
            assert!(max_abs(&(b.reconstruct_q() - embedding(&sigma))) <= 1e-8);
            let k = m.min(d);
            for i in 0..k {
                assert!((b.lambda[i] - b.svd.singular[i]).abs() < 1e-12);
                assert!((b.lambda[n - k + i] + b.svd.singular[i]).abs() < 1e-12);
            }
            for i in k..n - k {
                assert_eq!(b.lambda[i], 0.0);
            }
            assert!(b.rect);
        }
    }

    #[test]
    fn basis_rejects_tied_top_pair() {
        let err = build_basis(&Array2::eye(3)).unwrap_err();
        assert!(matches!(err, Error::Unidentifiable { .. }));
    }

    #[test]
    fn singular_pairs_map_to_basis_vectors() {
        let sigma = array![[1.0, 0.5, 0.0], [0.2, 2.0, 0.1], [0.0, 0.3, 0.4]];
        let b = build_basis(&sigma).unwrap();
        for k in 0..2 {
            let (u, v) = b.singular_pair(k);
            let h = to_h(&PlsIterate { u, v, step_count: 0 }, &b).unwrap();
            for (i, x) in h.iter().enumerate() {
                let want = if i == k { 1.0 } else { 0.0 };
                assert!((x - want).abs() < 1e-12, "h[{i}] = {x}");
            }
        }
    }

    #[test]
    fn to_h_is_an_isometry() {
        let sigma = array![[1.0, 0.5], [0.2, 2.0], [0.0, 0.3]];
        let b = build_basis(&sigma).unwrap();
        let iter = PlsIterate {
            u: array![0.3, -1.1, 2.0],
            v: array![0.7, 0.4],
            step_count: 0,
        };
        let h = to_h(&iter, &b).unwrap();
        let lhs = h.dot(&h);
        let rhs = 0.5 * (iter.u.dot(&iter.u) + iter.v.dot(&iter.v));
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn ode_rhs_examples() {
        let lambda = array![3.0, 1.0, -1.0, -3.0];
        for j in 0..4 {
            let mut h = Array1::zeros(4);
            h[j] = 1.0;
            assert!(ode_rhs(&h, &lambda).iter().all(|&x| x == 0.0));
        }
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let out = ode_rhs(&array![r, r], &array![1.0, -1.0]);
        assert!((out[0] - r).abs() < 1e-15);
        assert!((out[1] + r).abs() < 1e-15);
    }

    #[test]
    fn ode_solution_examples() {
        let lambda = array![2.0, 1.0, -1.0, -2.0];
        let e1 = array![1.0, 0.0, 0.0, 0.0];
        assert_eq!(ode_solution(&e1, &lambda, 7.5), e1);
        let h0 = array![0.5, 0.5, 0.5, 0.5];
        assert!((&ode_solution(&h0, &lambda, 0.0) - &h0).iter().all(|x| x.abs() < 1e-15));

        let r = std::f64::consts::FRAC_1_SQRT_2;
        let h = ode_solution(&array![r, r], &array![1.0, -1.0], 1.0);
        let e = std::f64::consts::E;
        let want = e / (e * e + 1.0 / (e * e)).sqrt();
        assert!((h[0] - want).abs() < 1e-14);
        // RK4 (dt = 1e-4) of the coordinate ODE gives 0.99096609
        assert!((h[0] - 0.990_966_09).abs() < 1e-6);
    }

    #[test]
    fn ode_solution_survives_long_horizons() {
        let lambda = array![4.0, 2.0, 0.5, -4.0, -2.0, -0.5];
        let h0: Array1<f64> = array![1e-3, 0.9, 0.1, 0.3, -0.2, 0.2];
        let h0 = &h0 / h0.dot(&h0).sqrt();
        let h = ode_solution(&h0, &lambda, 1e4);
        assert!(h.iter().all(|x| x.is_finite()));
        assert!((h[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn beta_examples() {
        let d = 3;
        let mom = LatentMoments {
            gamma: Array1::ones(d),
            omega: Array1::ones(d),
            alpha: Array2::zeros((d, d)),
        };
        for i in 1..=2 * d {
            for j in 1..=2 * d {
                if i != j {
                    let b = beta_coeff(i, j, &mom, d).unwrap();
                    assert!((b - 0.5 * 2f64.sqrt()).abs() < 1e-15);
                }
            }
        }
        let mom = section6_moments();
        for i in 1..=2 * d {
            for j in 1..=2 * d {
                let a = beta_coeff(i, j, &mom, d);
                let b = beta_coeff(j, i, &mom, d);
                match (a, b) {
                    (Ok(a), Ok(b)) => assert_eq!(a, b),
                    (Err(_), Err(_)) => {}
                    _ => panic!("asymmetric beta at ({i},{j})"),
                }
            }
        }
        let b12 = beta_coeff(1, 2, &mom, d).unwrap();
        assert!((b12 - 0.5 * 96f64.sqrt()).abs() < 1e-12);
        assert!(beta_coeff(0, 1, &mom, d).is_err());
        assert!(beta_coeff(1, 7, &mom, d).is_err());
        // cross-side partner of the same latent index has a negative radicand
        assert!(beta_coeff(1, 4, &mom, d).is_err());
    }

    #[test]
    fn ou_moment_examples() {
        assert_eq!(ou_moments(1.5, 2.0, 1.0, 0.0, OuPhase::Converge).unwrap(), (1.5, 0.0));
        assert_eq!(ou_moments(1.5, 2.0, 1.0, 0.0, OuPhase::Escape).unwrap(), (1.5, 0.0));
        let (m, v) = ou_moments(1.0, 2.0, 3.0, 1e3, OuPhase::Converge).unwrap();
        assert_eq!(m, 0.0);
        assert!((v - 9.0 / 4.0).abs() < 1e-15);
        let (m, v) = ou_moments(0.0, 2.0, 0.5 * 96f64.sqrt(), 0.5, OuPhase::Escape).unwrap();
        assert_eq!(m, 0.0);
        assert!((v - 6.0 * (2f64.exp() - 1.0)).abs() < 1e-12);
        assert!((v - 38.33).abs() < 0.01);
        assert!(ou_moments(0.0, 0.0, 1.0, 1.0, OuPhase::Escape).is_err());
        assert_eq!(random_walk_moments(0.3, 2.0, 0.5), (0.3, 2.0));
    }

    #[test]
    fn noiseless_ou_path_is_exponential() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let dt = 1e-4;
        let path = simulate_ou(1.0, 2.0, 0.0, 1.0, dt, &mut rng, OuPhase::Converge).unwrap();
        assert_eq!(path.len(), 10_001);
        // Euler with zero noise is exactly (1 − gap·dt)^n
        let expect = (1.0 - 2.0 * dt).powi(10_000);
        assert!((path[10_000] - expect).abs() < 1e-12);
        let (mean, _) = ou_moments(1.0, 2.0, 0.0, 1.0, OuPhase::Converge).unwrap();
        assert!((path[10_000] - mean).abs() < 1e-4);
        assert!(simulate_ou(0.0, 1.0, 1.0, 0.0, 0.1, &mut rng, OuPhase::Escape).is_err());
    }

    #[test]
    fn phase_time_examples() {
        let mom = section6_moments();
        let lambda = array![4.0, 2.0, 0.5, -4.0, -2.0, -0.5];
        let phi = phi(&mom).unwrap();
        assert!((phi - (52.0 + 24.0 + 19.5)).abs() < 1e-12);

        // exact boundary of the phase III precondition
        let eta = 1e-4;
        let eps = 8.0 * eta * phi / 2.0;
        let err = phase_times(&lambda, &mom, eta, 0.1, eps, 0.75).unwrap_err();
        assert!(matches!(err, Error::StepSizeTooLarge(_)));

        // smaller δ lengthens phase II
        let a = phase_times(&lambda, &mom, 5e-5, 0.1, 0.05, 0.7).unwrap();
        let b = phase_times(&lambda, &mom, 5e-5, 0.1, 0.05, 0.9).unwrap();
        assert!(b.t2 > a.t2);
        assert_eq!(a.n1, (a.t1 / a.eta).ceil() as u64);
        assert_eq!(a.n_total, a.n1 + a.n2 + a.n3);
        assert!((a.delta - 5e-5f64.powf(0.7)).abs() < 1e-18);
    }

    #[test]
    fn recommended_eta_scaling() {
        let base = recommended_eta(0.01, 4.0, 2.0, 95.5);
        assert!((recommended_eta(0.02, 4.0, 2.0, 95.5) - 2.0 * base).abs() < 1e-18);
        assert!((recommended_eta(0.01, 4.0, 2.0, 191.0) - 0.5 * base).abs() < 1e-18);
        assert!((base - 0.01 * 2.0 / 95.5).abs() < 1e-18);
    }
}
