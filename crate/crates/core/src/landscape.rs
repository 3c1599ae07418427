//! Stationary points of the PLS Lagrangian and their stability.
//!
//! With the multipliers at their optimal values `μ = σ = ½ uᵀΣv`, the
//! stationarity conditions read `Σv = (uᵀΣv) u` and `Σᵀu = (uᵀΣv) v`. The
//! solutions on the unit spheres are the singular pairs of `Σ` plus any pair
//! drawn from the two null spaces. Only the leading pair is stable.

use ndarray::{Array1, Array2};
use serde::Serialize;

use crate::diffusion::EIGENGAP_TOL;
use crate::error::{Error, Result};
use crate::oracle::{svd, sym_eig};

/// Residual above which a point is not treated as stationary.
pub const STATIONARITY_TOL: f64 = 1e-8;
/// Eigenvalues at or below this are treated as nonpositive.
pub const STABILITY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PointKind {
    GlobalOptimumStable,
    SaddleUnstable,
    NullSpaceUnstable,
}

#[derive(Debug, Clone, Serialize)]
pub struct StationaryPoint {
    pub u: Array1<f64>,
    pub v: Array1<f64>,
    /// Shared optimal multiplier `μ = σ = ½ uᵀΣv`.
    pub multiplier: f64,
    /// Singular value of the pair, 0 for the null-space representative.
    pub singular_value: f64,
    pub kind: PointKind,
    /// Largest eigenvalue of the Lagrangian Hessian.
    pub max_hessian_eig: f64,
    /// Largest eigenvalue of the Schur-reduced form of the Hessian (see
    /// [`reduced_hessian_max_eig`]); equals `max_hessian_eig` on the null space.
    pub reduced_max_eig: f64,
    pub kkt_residual: f64,
}

fn check_dims(u: &Array1<f64>, v: &Array1<f64>, sigma: &Array2<f64>) -> Result<()> {
    let (m, d) = sigma.dim();
    if u.len() != m {
        return Err(Error::dim("landscape u", m, u.len()));
    }
    if v.len() != d {
        return Err(Error::dim("landscape v", d, v.len()));
    }
    Ok(())
}

/// `(Σv − (uᵀΣv)u, Σᵀu − (uᵀΣv)v)`.
pub fn lagrangian_grad(
    u: &Array1<f64>,
    v: &Array1<f64>,
    sigma_xy: &Array2<f64>,
) -> Result<(Array1<f64>, Array1<f64>)> {
    check_dims(u, v, sigma_xy)?;
    let sv = sigma_xy.dot(v);
    let stu = sigma_xy.t().dot(u);
    let c = u.dot(&sv);
    Ok((&sv - &(u * c), &stu - &(v * c)))
}

/// `L(u, v, μ, σ) = uᵀΣv − μ(uᵀu − 1) − σ(vᵀv − 1)` with the multipliers
/// held fixed.
pub fn lagrangian(
    u: &Array1<f64>,
    v: &Array1<f64>,
    sigma_xy: &Array2<f64>,
    mu: f64,
    sigma: f64,
) -> f64 {
    u.dot(&sigma_xy.dot(v)) - mu * (u.dot(u) - 1.0) - sigma * (v.dot(v) - 1.0)
}

pub fn kkt_residual(u: &Array1<f64>, v: &Array1<f64>, sigma_xy: &Array2<f64>) -> Result<f64> {
    let (gu, gv) = lagrangian_grad(u, v, sigma_xy)?;
    Ok(gu.dot(&gu).sqrt().max(gv.dot(&gv).sqrt()))
}

/// The Hessian `[[−c·I_m, Σ], [Σᵀ, −c·I_d]]`, `c = uᵀΣv`.
pub fn lagrangian_hessian(u: &Array1<f64>, v: &Array1<f64>, sigma_xy: &Array2<f64>) -> Result<Array2<f64>> {
    check_dims(u, v, sigma_xy)?;
    let (m, d) = sigma_xy.dim();
    let c = u.dot(&sigma_xy.dot(v));
    let mut h = Array2::zeros((m + d, m + d));
    for i in 0..m + d {
        h[[i, i]] = -c;
    }
    h.slice_mut(ndarray::s![0..m, m..m + d]).assign(sigma_xy);
    h.slice_mut(ndarray::s![m..m + d, 0..m])
        .assign(&sigma_xy.t());
    Ok(h)
}

fn require_stationary(u: &Array1<f64>, v: &Array1<f64>, sigma_xy: &Array2<f64>) -> Result<()> {
    let residual = kkt_residual(u, v, sigma_xy)?;
    if residual > STATIONARITY_TOL {
        return Err(Error::NotStationary { residual });
    }
    Ok(())
}

/// Largest eigenvalue of the Hessian at a stationary point.
///
/// At the `i`-th singular pair this is `λ₁ − λᵢ`; on the null space it is `λ₁`.
pub fn lagrangian_hessian_max_eig(
    u: &Array1<f64>,
    v: &Array1<f64>,
    sigma_xy: &Array2<f64>,
) -> Result<f64> {
    require_stationary(u, v, sigma_xy)?;
    let h = lagrangian_hessian(u, v, sigma_xy)?;
    let (vals, _) = sym_eig(h.view())?;
    Ok(vals[0])
}

/// Largest eigenvalue of the block-diagonal matrix congruent to the Hessian
/// after eliminating the `u` block:
/// `diag(−c·I_m, (1/c)ΣᵀΣ − c·I_d)`, `c = uᵀΣv`.
///
/// At the `i`-th singular pair this is `(λ₁² − λᵢ²)/λᵢ`. Congruence keeps the
/// inertia (so the stability verdict agrees with the Hessian) but not the
/// magnitudes. When `c = 0` the elimination is undefined and the Hessian
/// eigenvalue is returned instead.
pub fn reduced_hessian_max_eig(
    u: &Array1<f64>,
    v: &Array1<f64>,
    sigma_xy: &Array2<f64>,
) -> Result<f64> {
    require_stationary(u, v, sigma_xy)?;
    let c = u.dot(&sigma_xy.dot(v));
    if c.abs() <= STABILITY_TOL {
        return lagrangian_hessian_max_eig(u, v, sigma_xy);
    }
    let (m, d) = sigma_xy.dim();
    let mut block = sigma_xy.t().dot(sigma_xy) / c;
    for i in 0..d {
        block[[i, i]] -= c;
    }
    let (vals, _) = sym_eig(block.view())?;
    let top = vals[0];
    Ok(if m > 0 { top.max(-c) } else { top })
}

/// All singular-pair stationary points plus one null-space representative
/// when both null spaces are nontrivial.
pub fn enumerate_stationary_points(sigma_xy: &Array2<f64>) -> Result<Vec<StationaryPoint>> {
    let (m, d) = sigma_xy.dim();
    let s = svd(sigma_xy.view())?;
    let k = m.min(d);
    let scale = s.singular[0].max(f64::MIN_POSITIVE);
    let rank = s.singular.iter().filter(|&&x| x > 1e-12 * scale).count();
    if rank == 0 {
        return Err(Error::Unidentifiable { gap: 0.0 });
    }
    if rank >= 2 {
        let gap = s.singular[0] - s.singular[1];
        if gap <= EIGENGAP_TOL {
            return Err(Error::Unidentifiable { gap });
        }
    }

    let mut out = Vec::with_capacity(rank + 1);
    let classify = |u: Array1<f64>, v: Array1<f64>, sv: f64, null: bool| -> Result<StationaryPoint> {
        let max_eig = lagrangian_hessian_max_eig(&u, &v, sigma_xy)?;
        let reduced = reduced_hessian_max_eig(&u, &v, sigma_xy)?;
        let c = u.dot(&sigma_xy.dot(&v));
        let kind = if max_eig <= STABILITY_TOL {
            PointKind::GlobalOptimumStable
        } else if null {
            PointKind::NullSpaceUnstable
        } else {
            PointKind::SaddleUnstable
        };
        Ok(StationaryPoint {
            kkt_residual: kkt_residual(&u, &v, sigma_xy)?,
            u,
            v,
            multiplier: 0.5 * c,
            singular_value: sv,
            kind,
            max_hessian_eig: max_eig,
            reduced_max_eig: reduced,
        })
    };
    for i in 0..rank {
        out.push(classify(
            s.o_x.column(i).to_owned(),
            s.o_y.column(i).to_owned(),
            s.singular[i],
            false,
        )?);
    }
    if rank < k {
        out.push(classify(
            s.o_x.column(rank).to_owned(),
            s.o_y.column(rank).to_owned(),
            0.0,
            true,
        )?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::fd_gradient;
    use ndarray::{array, concatenate, s, Axis};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn sigma6() -> Array2<f64> {
        // rotated diag(4, 2, 0.5)
        let q = array![[0.6, -0.8, 0.0], [0.8, 0.6, 0.0], [0.0, 0.0, 1.0]];
        let r = array![[0.0, 1.0, 0.0], [0.6, 0.0, -0.8], [0.8, 0.0, 0.6]];
        q.dot(&Array2::from_diag(&array![4.0, 2.0, 0.5])).dot(&r.t())
    }

    fn random_unit(rng: &mut ChaCha8Rng, n: usize) -> Array1<f64> {
        let v = Array1::from_shape_fn(n, |_| rng.sample::<f64, _>(StandardNormal));
        let nrm = v.dot(&v).sqrt();
        v / nrm
    }

    #[test]
    fn gradient_vanishes_at_optimum_and_null_space() {
        let sigma = sigma6();
        let pts = enumerate_stationary_points(&sigma).unwrap();
        let (gu, gv) = lagrangian_grad(&pts[0].u, &pts[0].v, &sigma).unwrap();
        assert!(gu.iter().chain(gv.iter()).all(|x| x.abs() < 1e-12));

        let rank1 = array![[1.0, 0.0], [0.0, 0.0]];
        let (gu, gv) = lagrangian_grad(&array![0.0, 1.0], &array![0.0, 1.0], &rank1).unwrap();
        assert!(gu.iter().chain(gv.iter()).all(|&x| x == 0.0));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let sigma = sigma6();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let u = random_unit(&mut rng, 3);
            let v = random_unit(&mut rng, 3);
            let c = u.dot(&sigma.dot(&v));
            let w = concatenate![Axis(0), u, v];
            let f = |w: &Array1<f64>| {
                let uu = w.slice(s![0..3]).to_owned();
                let vv = w.slice(s![3..6]).to_owned();
                lagrangian(&uu, &vv, &sigma, 0.5 * c, 0.5 * c)
            };
            let fd = fd_gradient(f, &w, 1e-6);
            let (gu, gv) = lagrangian_grad(&u, &v, &sigma).unwrap();
            let g = concatenate![Axis(0), gu, gv];
            let rel = (&fd - &g).dot(&(&fd - &g)).sqrt() / g.dot(&g).sqrt().max(1e-12);
            assert!(rel <= 1e-5, "relative error {rel:e}");
        }
    }

    #[test]
    fn hessian_eigenvalues_at_each_pair() {
        let sigma = sigma6();
        let pts = enumerate_stationary_points(&sigma).unwrap();
        assert_eq!(pts.len(), 3);
        assert_eq!(pts[0].kind, PointKind::GlobalOptimumStable);
        assert!(pts[0].max_hessian_eig <= 1e-8);
        // Hessian: λ₁ − λᵢ ; reduced form: (λ₁² − λᵢ²)/λᵢ
        assert!((pts[1].max_hessian_eig - 2.0).abs() < 1e-10);
        assert!((pts[2].max_hessian_eig - 3.5).abs() < 1e-10);
        assert!((pts[1].reduced_max_eig - 6.0).abs() < 1e-10);
        assert!((pts[2].reduced_max_eig - 31.5).abs() < 1e-10);
        for p in &pts[1..] {
            assert_eq!(p.kind, PointKind::SaddleUnstable);
            assert!(p.max_hessian_eig >= 2.0 - 1e-8);
            assert!(p.kkt_residual <= 1e-10);
        }
    }

    #[test]
    fn null_space_point_has_top_singular_value() {
        let rank1 = array![[1.0, 0.0], [0.0, 0.0]];
        let pts = enumerate_stationary_points(&rank1).unwrap();
        assert_eq!(pts.len(), 2);
        assert_eq!(pts[0].kind, PointKind::GlobalOptimumStable);
        assert_eq!(pts[1].kind, PointKind::NullSpaceUnstable);
        assert!((pts[1].max_hessian_eig - 1.0).abs() < 1e-12);

        let padded = concatenate![Axis(0), sigma6(), Array2::zeros((1, 3))];
        let padded = concatenate![Axis(1), padded, Array2::zeros((4, 1))];
        let pts = enumerate_stationary_points(&padded).unwrap();
        let null = pts.last().unwrap();
        assert_eq!(null.kind, PointKind::NullSpaceUnstable);
        assert!((null.max_hessian_eig - 4.0).abs() < 1e-10);
    }

    #[test]
    fn tied_spectrum_is_unidentifiable() {
        let err = enumerate_stationary_points(&Array2::eye(3)).unwrap_err();
        assert!(matches!(err, Error::Unidentifiable { .. }));
    }

    #[test]
    fn non_stationary_point_is_rejected() {
        let sigma = sigma6();
        let err =
            lagrangian_hessian_max_eig(&array![1.0, 0.0, 0.0], &array![1.0, 0.0, 0.0], &sigma)
                .unwrap_err();
        assert!(matches!(err, Error::NotStationary { .. }));
    }

    #[test]
    fn classification_is_sign_invariant() {
        let sigma = sigma6();
        for p in enumerate_stationary_points(&sigma).unwrap() {
            let a = lagrangian_hessian_max_eig(&p.u, &p.v, &sigma).unwrap();
            let b = lagrangian_hessian_max_eig(&-&p.u, &-&p.v, &sigma).unwrap();
            assert!((a - b).abs() < 1e-12);
        }
    }
}
