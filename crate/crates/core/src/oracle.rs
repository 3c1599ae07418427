//! Reference computations shared by the other modules and their tests.
//!
//! Everything here is written for clarity and accuracy at desk scale
//! (dimensions up to a few hundred), not speed.

use ndarray::{Array1, Array2, ArrayView2};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::datagen::CovarianceModel;
use crate::diffusion::LatentMoments;
use crate::error::{Error, Result};
use crate::pls_core::TwoViewSample;

const MAX_SWEEPS: usize = 60;

/// Full singular value decomposition `A = o_x · diag(singular) · o_yᵀ`.
#[derive(Debug, Clone)]
pub struct SvdResult {
    /// Left singular vectors as columns, `m × m`.
    pub o_x: Array2<f64>,
    /// Nonincreasing, length `min(m, d)`.
    pub singular: Array1<f64>,
    /// Right singular vectors as columns, `d × d`.
    pub o_y: Array2<f64>,
}

impl SvdResult {
    /// `o_x · D · o_yᵀ` with `D` the `m × d` rectangular diagonal.
    pub fn reconstruct(&self) -> Array2<f64> {
        let m = self.o_x.nrows();
        let d = self.o_y.nrows();
        let mut out = Array2::zeros((m, d));
        for (k, &s) in self.singular.iter().enumerate() {
            let u = self.o_x.column(k);
            let v = self.o_y.column(k);
            for i in 0..m {
                for j in 0..d {
                    out[[i, j]] += s * u[i] * v[j];
                }
            }
        }
        out
    }
}

/// Cyclic one-sided Jacobi SVD.
///
/// Columns are rotated pairwise until every pair is orthogonal to working
/// precision. Singular vectors are sign-canonicalized so the largest-magnitude
/// entry of each left vector is positive (the paired right vector flips with
/// it); completion vectors of the null spaces are canonicalized on their own.
pub fn svd(a: ArrayView2<f64>) -> Result<SvdResult> {
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("svd input"));
    }
    let (m, d) = a.dim();
    if m >= d {
        let (o_x, singular, o_y) = jacobi_tall(a)?;
        let mut out = SvdResult { o_x, singular, o_y };
        canonicalize_pairs(&mut out);
        Ok(out)
    } else {
        let (o_y, singular, o_x) = jacobi_tall(a.t())?;
        let mut out = SvdResult { o_x, singular, o_y };
        canonicalize_pairs(&mut out);
        Ok(out)
    }
}

/// One-sided Jacobi on a matrix with at least as many rows as columns.
fn jacobi_tall(a: ArrayView2<f64>) -> Result<(Array2<f64>, Array1<f64>, Array2<f64>)> {
    let (m, n) = a.dim();
    // column-major working copies
    let mut cols: Vec<Vec<f64>> = (0..n).map(|j| a.column(j).to_vec()).collect();
    let mut vcols: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            e
        })
        .collect();
    let fro = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let tol = f64::EPSILON * (m.max(1) as f64);
    let tiny = (1e-300_f64).max((1e-150 * fro).powi(2));

    let mut converged = n < 2;
    for _ in 0..MAX_SWEEPS {
        if converged {
            break;
        }
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let alpha = dot(&cols[p], &cols[p]);
                let beta = dot(&cols[q], &cols[q]);
                let gamma = dot(&cols[p], &cols[q]);
                if alpha <= tiny || beta <= tiny {
                    continue;
                }
                if gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut cols, p, q, c, s);
                rotate(&mut vcols, p, q, c, s);
            }
        }
        if !rotated {
            converged = true;
        }
    }
    if !converged {
        return Err(Error::NoConvergence {
            routine: "jacobi svd",
            sweeps: MAX_SWEEPS,
        });
    }

    let norms: Vec<f64> = cols.iter().map(|c| dot(c, c).sqrt()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]));

    let zero_tol = 1e-14 * fro.max(f64::MIN_POSITIVE);
    let mut left: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut singular = Array1::zeros(n);
    let mut o_y = Array2::zeros((n, n));
    let mut missing = Vec::new();
    for (k, &j) in order.iter().enumerate() {
        singular[k] = norms[j];
        for i in 0..n {
            o_y[[i, k]] = vcols[j][i];
        }
        if norms[j] > zero_tol {
            left.push(cols[j].iter().map(|x| x / norms[j]).collect());
        } else {
            left.push(Vec::new());
            missing.push(k);
        }
    }
    // complete the left basis: null columns first, then the extra m - n columns
    let mut basis: Vec<Vec<f64>> = left.iter().filter(|c| !c.is_empty()).cloned().collect();
    for k in missing {
        let c = complete_one(&basis, m);
        basis.push(c.clone());
        left[k] = c;
    }
    while left.len() < m {
        let c = complete_one(&basis, m);
        basis.push(c.clone());
        left.push(c);
    }
    let mut o_x = Array2::zeros((m, m));
    for (k, c) in left.iter().enumerate() {
        for i in 0..m {
            o_x[[i, k]] = c[i];
        }
    }
    Ok((o_x, singular, o_y))
}

fn rotate(cols: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    let (lo, hi) = cols.split_at_mut(q);
    let cp = &mut lo[p];
    let cq = &mut hi[0];
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let xp = *x;
        let xq = *y;
        *x = c * xp - s * xq;
        *y = s * xp + c * xq;
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// A unit vector orthogonal to every vector in `basis` (assumed orthonormal).
/// Picks the standard basis vector with the largest residual and orthogonalizes
/// it twice.
fn complete_one(basis: &[Vec<f64>], m: usize) -> Vec<f64> {
    let mut best: Option<(f64, Vec<f64>)> = None;
    for k in 0..m {
        let mut e = vec![0.0; m];
        e[k] = 1.0;
        for _ in 0..2 {
            for b in basis {
                let p = dot(&e, b);
                for (ei, bi) in e.iter_mut().zip(b) {
                    *ei -= p * bi;
                }
            }
        }
        let nrm = dot(&e, &e).sqrt();
        if best.as_ref().is_none_or(|(n, _)| nrm > *n) {
            best = Some((nrm, e));
        }
        if nrm > 0.7 {
            break;
        }
    }
    let (nrm, mut e) = best.expect("completion requested with m > 0");
    e.iter_mut().for_each(|x| *x /= nrm);
    e
}

/// Orient `v` so that its largest-magnitude entry (first on ties) is positive.
/// Returns `true` if it was flipped.
pub fn canonicalize_sign(v: &mut [f64]) -> bool {
    let mut idx = 0;
    let mut best = -1.0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > best + 1e-12 {
            best = x.abs();
            idx = i;
        }
    }
    if v.get(idx).is_some_and(|x| *x < 0.0) {
        v.iter_mut().for_each(|x| *x = -*x);
        true
    } else {
        false
    }
}

fn canonicalize_pairs(svd: &mut SvdResult) {
    let m = svd.o_x.ncols();
    let d = svd.o_y.ncols();
    let k = svd.singular.len();
    for j in 0..m.max(d) {
        if j < k {
            let mut u = svd.o_x.column(j).to_vec();
            if canonicalize_sign(&mut u) {
                svd.o_x.column_mut(j).mapv_inplace(|x| -x);
                svd.o_y.column_mut(j).mapv_inplace(|x| -x);
            }
        } else {
            if j < m {
                let mut u = svd.o_x.column(j).to_vec();
                if canonicalize_sign(&mut u) {
                    svd.o_x.column_mut(j).mapv_inplace(|x| -x);
                }
            }
            if j < d {
                let mut v = svd.o_y.column(j).to_vec();
                if canonicalize_sign(&mut v) {
                    svd.o_y.column_mut(j).mapv_inplace(|x| -x);
                }
            }
        }
    }
}

/// Symmetric eigendecomposition by cyclic two-sided Jacobi.
///
/// Returns eigenvalues in nonincreasing order and the matching eigenvectors
/// as columns.
pub fn sym_eig(a: ArrayView2<f64>) -> Result<(Array1<f64>, Array2<f64>)> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::dim("sym_eig (square)", n, a.ncols()));
    }
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("sym_eig input"));
    }
    let mut w = a.to_owned();
    // symmetrize
    for i in 0..n {
        for j in (i + 1)..n {
            let s = 0.5 * (w[[i, j]] + w[[j, i]]);
            w[[i, j]] = s;
            w[[j, i]] = s;
        }
    }
    let mut v = Array2::<f64>::eye(n);
    let fro2: f64 = w.iter().map(|x| x * x).sum();
    // roundoff keeps the off-diagonal mass near n·ε·‖A‖ for large n
    let rel = (n.max(1) as f64) * f64::EPSILON;
    let target = rel * rel * fro2;
    let mut converged = false;
    for _ in 0..(2 * MAX_SWEEPS) {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| w[[i, j]] * w[[i, j]])
            .sum();
        if off <= target {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = w[[p, q]];
                if apq.abs() <= f64::MIN_POSITIVE {
                    continue;
                }
                let theta = (w[[q, q]] - w[[p, p]]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let wkp = w[[k, p]];
                    let wkq = w[[k, q]];
                    w[[k, p]] = c * wkp - s * wkq;
                    w[[k, q]] = s * wkp + c * wkq;
                }
                for k in 0..n {
                    let wpk = w[[p, k]];
                    let wqk = w[[q, k]];
                    w[[p, k]] = c * wpk - s * wqk;
                    w[[q, k]] = s * wpk + c * wqk;
                }
                for k in 0..n {
                    let vkp = v[[k, p]];
                    let vkq = v[[k, q]];
                    v[[k, p]] = c * vkp - s * vkq;
                    v[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
    }
    if !converged {
        return Err(Error::NoConvergence {
            routine: "jacobi eigensolver",
            sweeps: 2 * MAX_SWEEPS,
        });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| w[[j, j]].total_cmp(&w[[i, i]]));
    let vals = Array1::from_iter(order.iter().map(|&i| w[[i, i]]));
    let mut vecs = Array2::zeros((n, n));
    for (k, &i) in order.iter().enumerate() {
        vecs.column_mut(k).assign(&v.column(i));
    }
    Ok((vals, vecs))
}

/// `(1/n) Σ x_k y_kᵀ`, optionally after subtracting the sample means.
pub fn empirical_cov(samples: &[TwoViewSample], center: bool) -> Result<Array2<f64>> {
    let first = samples
        .first()
        .ok_or_else(|| Error::InvalidArgument("empirical_cov needs at least one sample".into()))?;
    let m = first.x.len();
    let d = first.y.len();
    let n = samples.len() as f64;
    let (mx, my) = if center {
        let mut mx = Array1::<f64>::zeros(m);
        let mut my = Array1::<f64>::zeros(d);
        for s in samples {
            mx += &s.x;
            my += &s.y;
        }
        (mx / n, my / n)
    } else {
        (Array1::zeros(m), Array1::zeros(d))
    };
    let mut acc = Array2::<f64>::zeros((m, d));
    for s in samples {
        if s.x.len() != m {
            return Err(Error::dim("empirical_cov x", m, s.x.len()));
        }
        if s.y.len() != d {
            return Err(Error::dim("empirical_cov y", d, s.y.len()));
        }
        for i in 0..m {
            let xi = s.x[i] - mx[i];
            if xi == 0.0 {
                continue;
            }
            for j in 0..d {
                acc[[i, j]] += xi * (s.y[j] - my[j]);
            }
        }
    }
    Ok(acc / n)
}

/// Central finite-difference gradient of `f` at `x0`.
pub fn fd_gradient<F>(f: F, x0: &Array1<f64>, h: f64) -> Array1<f64>
where
    F: Fn(&Array1<f64>) -> f64,
{
    let mut x = x0.clone();
    let mut g = Array1::zeros(x0.len());
    for i in 0..x0.len() {
        let orig = x[i];
        x[i] = orig + h;
        let fp = f(&x);
        x[i] = orig - h;
        let fm = f(&x);
        x[i] = orig;
        g[i] = (fp - fm) / (2.0 * h);
    }
    g
}

/// Monte-Carlo estimate of the latent fourth-moment quantities, with standard errors.
#[derive(Debug, Clone, Serialize)]
pub struct MomentEstimate {
    pub moments: LatentMoments,
    pub se_gamma: Array1<f64>,
    pub se_omega: Array1<f64>,
    pub se_alpha: Array2<f64>,
    pub n: usize,
}

/// Draws `n` latent pairs `(X̄, Ȳ)` (before mixing) from `model` and averages
/// `X̄ᵢ²`, `Ȳᵢ²` and `X̄ᵢȲᵢX̄ⱼȲⱼ`.
pub fn mc_moments<R: Rng + ?Sized>(
    model: &CovarianceModel,
    n: usize,
    rng: &mut R,
) -> Result<MomentEstimate> {
    if n < 2 {
        return Err(Error::InvalidArgument("mc_moments needs n >= 2".into()));
    }
    let d = model.d;
    let chol = model.latent_cholesky()?;
    let k = 2 * d;
    let mut xi = vec![0.0; k];
    let mut z = vec![0.0; k];
    let mut prod = vec![0.0; d];

    let mut sg = vec![0.0; d];
    let mut sg2 = vec![0.0; d];
    let mut so = vec![0.0; d];
    let mut so2 = vec![0.0; d];
    let mut sa = Array2::<f64>::zeros((d, d));
    let mut sa2 = Array2::<f64>::zeros((d, d));
    for _ in 0..n {
        for v in xi.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        for i in 0..k {
            z[i] = (0..=i).map(|j| chol[[i, j]] * xi[j]).sum();
        }
        for i in 0..d {
            let x2 = z[i] * z[i];
            let y2 = z[d + i] * z[d + i];
            sg[i] += x2;
            sg2[i] += x2 * x2;
            so[i] += y2;
            so2[i] += y2 * y2;
            prod[i] = z[i] * z[d + i];
        }
        for i in 0..d {
            for j in 0..d {
                let a = prod[i] * prod[j];
                sa[[i, j]] += a;
                sa2[[i, j]] += a * a;
            }
        }
    }
    let nf = n as f64;
    let se = |s: f64, s2: f64| {
        let mean = s / nf;
        let var = (s2 / nf - mean * mean).max(0.0) * nf / (nf - 1.0);
        (var / nf).sqrt()
    };
    let gamma = Array1::from_iter(sg.iter().map(|s| s / nf));
    let omega = Array1::from_iter(so.iter().map(|s| s / nf));
    let alpha = sa.mapv(|s| s / nf);
    let se_gamma = Array1::from_iter((0..d).map(|i| se(sg[i], sg2[i])));
    let se_omega = Array1::from_iter((0..d).map(|i| se(so[i], so2[i])));
    let se_alpha = Array2::from_shape_fn((d, d), |(i, j)| se(sa[[i, j]], sa2[[i, j]]));
    Ok(MomentEstimate {
        moments: LatentMoments {
            gamma,
            omega,
            alpha,
        },
        se_gamma,
        se_omega,
        se_alpha,
        n,
    })
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-x / std::f64::consts::SQRT_2)
}

/// Φ⁻¹(q) by Acklam's rational approximation followed by one Halley step on Φ.
pub fn inverse_normal_cdf(q: f64) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "inverse_normal_cdf requires q in (0,1), got {q}"
        )));
    }
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383_577_518_672_69e2,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;

    let x = if q < P_LOW {
        let r = (-2.0 * q.ln()).sqrt();
        (((((C[0] * r + C[1]) * r + C[2]) * r + C[3]) * r + C[4]) * r + C[5])
            / ((((D[0] * r + D[1]) * r + D[2]) * r + D[3]) * r + 1.0)
    } else if q <= 1.0 - P_LOW {
        let s = q - 0.5;
        let r = s * s;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * s
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let r = (-2.0 * (1.0 - q).ln()).sqrt();
        -(((((C[0] * r + C[1]) * r + C[2]) * r + C[3]) * r + C[4]) * r + C[5])
            / ((((D[0] * r + D[1]) * r + D[2]) * r + D[3]) * r + 1.0)
    };

    // Halley refinement
    let e = normal_cdf(x) - q;
    let u = e * (2.0 * std::f64::consts::PI).sqrt() * (0.5 * x * x).exp();
    Ok(x - u / (1.0 + 0.5 * x * u))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut ChaCha8Rng, m: usize, d: usize) -> Array2<f64> {
        Array2::from_shape_fn((m, d), |_| rng.sample(StandardNormal))
    }

    fn max_abs(a: &Array2<f64>) -> f64 {
        a.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
    }

    fn orthogonality_error(q: &Array2<f64>) -> f64 {
        let n = q.ncols();
        max_abs(&(q.t().dot(q) - Array2::<f64>::eye(n)))
    }

    #[test]
    fn svd_of_identity_is_all_ones() {
        let s = svd(Array2::<f64>::eye(4).view()).unwrap();
        for x in s.singular.iter() {
            assert!((x - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn svd_reconstructs_random_rectangles() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for &(m, d) in &[(50, 30), (30, 50), (7, 7), (1, 5), (5, 1)] {
            let a = random_matrix(&mut rng, m, d);
            let s = svd(a.view()).unwrap();
            assert!(max_abs(&(s.reconstruct() - &a)) <= 1e-8 * max_abs(&a).max(1.0));
            assert!(orthogonality_error(&s.o_x) <= 1e-10);
            assert!(orthogonality_error(&s.o_y) <= 1e-10);
            for w in s.singular.as_slice().unwrap().windows(2) {
                assert!(w[0] >= w[1]);
            }
        }
    }

    #[test]
    fn svd_handles_rank_deficiency() {
        let a = array![[1.0, 0.0], [0.0, 0.0]];
        let s = svd(a.view()).unwrap();
        assert_eq!(s.singular.to_vec(), vec![1.0, 0.0]);
        assert!(orthogonality_error(&s.o_x) <= 1e-12);
        assert!(max_abs(&(s.reconstruct() - &a)) <= 1e-14);

        let z = Array2::<f64>::zeros((3, 2));
        let s = svd(z.view()).unwrap();
        assert!(s.singular.iter().all(|&x| x == 0.0));
        assert!(orthogonality_error(&s.o_x) <= 1e-12);
    }

    #[test]
    fn svd_signs_are_canonical() {
        let a = array![[-3.0, 0.0], [0.0, 1.0]];
        let s = svd(a.view()).unwrap();
        // largest entry of each left vector is positive
        assert!(s.o_x[[0, 0]] > 0.0);
        assert!((s.singular[0] - 3.0).abs() < 1e-14);
        assert!(max_abs(&(s.reconstruct() - &a)) < 1e-14);
    }

    #[test]
    fn svd_rejects_nan() {
        let a = array![[1.0, f64::NAN]];
        assert!(matches!(svd(a.view()), Err(Error::NonFinite(_))));
    }

    #[test]
    fn sym_eig_matches_known_spectrum() {
        let a = array![[2.0, 1.0], [1.0, 2.0]];
        let (vals, vecs) = sym_eig(a.view()).unwrap();
        assert!((vals[0] - 3.0).abs() < 1e-14);
        assert!((vals[1] - 1.0).abs() < 1e-14);
        let recon = vecs.dot(&Array2::from_diag(&vals)).dot(&vecs.t());
        assert!(max_abs(&(recon - &a)) < 1e-14);
    }

    #[test]
    fn singular_values_match_embedding_eigenvalues() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = random_matrix(&mut rng, 6, 4);
        let s = svd(a.view()).unwrap();
        let mut q = Array2::zeros((10, 10));
        q.slice_mut(ndarray::s![0..6, 6..10]).assign(&a);
        q.slice_mut(ndarray::s![6..10, 0..6]).assign(&a.t());
        let (vals, _) = sym_eig(q.view()).unwrap();
        for k in 0..4 {
            assert!((vals[k] - s.singular[k]).abs() < 1e-8);
        }
    }

    #[test]
    fn empirical_cov_single_and_zero() {
        let s = TwoViewSample::new(array![1.0, 2.0], array![3.0, -1.0, 0.5]).unwrap();
        let c = empirical_cov(std::slice::from_ref(&s), false).unwrap();
        assert_eq!(c, array![[3.0, -1.0, 0.5], [6.0, -2.0, 1.0]]);

        let z = TwoViewSample::new(array![1.0, 2.0], array![0.0, 0.0]).unwrap();
        let c = empirical_cov(&[z.clone(), z], false).unwrap();
        assert!(c.iter().all(|&x| x == 0.0));

        assert!(empirical_cov(&[], false).is_err());
    }

    #[test]
    fn empirical_cov_is_permutation_invariant_and_centers() {
        let a = TwoViewSample::new(array![1.0], array![2.0]).unwrap();
        let b = TwoViewSample::new(array![3.0], array![4.0]).unwrap();
        let ab = empirical_cov(&[a.clone(), b.clone()], false).unwrap();
        let ba = empirical_cov(&[b.clone(), a.clone()], false).unwrap();
        assert_eq!(ab, ba);
        assert_eq!(ab[[0, 0]], 7.0);
        // centered: means (2, 3), deviations (-1,-1) and (1,1)
        let c = empirical_cov(&[a, b], true).unwrap();
        assert_eq!(c[[0, 0]], 1.0);
    }

    #[test]
    fn fd_gradient_examples() {
        let f = |x: &Array1<f64>| x.dot(x);
        let g = fd_gradient(f, &array![1.0, 0.0, 0.0], 1e-6);
        assert!((g[0] - 2.0).abs() < 1e-8);
        assert!(g[1].abs() < 1e-8 && g[2].abs() < 1e-8);

        let g = fd_gradient(|_| 3.5, &array![0.3, -0.2], 1e-6);
        assert!(g.iter().all(|&x| x == 0.0));
    }

    /// Maclaurin series of erf, used only to check the library path.
    fn erf_series(x: f64) -> f64 {
        let mut sum = 0.0;
        let mut term = x;
        let mut n = 0.0;
        loop {
            let add = term / (2.0 * n + 1.0);
            sum += add;
            if add.abs() < 1e-17 {
                break;
            }
            n += 1.0;
            term *= -x * x / n;
        }
        2.0 / std::f64::consts::PI.sqrt() * sum
    }

    #[test]
    fn inverse_normal_cdf_examples() {
        assert!(inverse_normal_cdf(0.5).unwrap().abs() < 1e-15);

        let phi1 = 0.5 * (1.0 + erf_series(1.0 / std::f64::consts::SQRT_2));
        assert!((inverse_normal_cdf(phi1).unwrap() - 1.0).abs() < 1e-9);

        // bisection on Φ
        let (mut lo, mut hi) = (0.0_f64, 5.0_f64);
        while hi - lo > 1e-12 {
            let mid = 0.5 * (lo + hi);
            if normal_cdf(mid) < 0.975 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let x = inverse_normal_cdf(0.975).unwrap();
        assert!((x - lo).abs() < 1e-10);
        assert!((x - 1.959964).abs() < 1e-6);

        assert!(inverse_normal_cdf(0.0).is_err());
        assert!(inverse_normal_cdf(1.0).is_err());
        assert!(inverse_normal_cdf(f64::NAN).is_err());
    }

    #[test]
    fn inverse_normal_cdf_round_trip_grid() {
        for k in 1..=1000 {
            let q = k as f64 / 1001.0;
            let x = inverse_normal_cdf(q).unwrap();
            assert!((normal_cdf(x) - q).abs() <= 1e-10, "q = {q}");
        }
        for &q in &[1e-10, 1e-6, 0.01, 0.99, 1.0 - 1e-6] {
            let x = inverse_normal_cdf(q).unwrap();
            assert!(((normal_cdf(x) - q) / q.min(1.0 - q)).abs() <= 1e-8);
        }
    }
}
