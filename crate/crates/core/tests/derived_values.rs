//! Values computed independently (scipy for Φ⁻¹, closed forms by hand) and
//! frozen here.

use ndarray::array;

use spls::datagen::{benchmark_latents, build_model};
use spls::diffusion::{
    beta_coeff, ou_moments, phase_times, phi, recommended_eta, LatentMoments, OuPhase,
};
use spls::oracle::inverse_normal_cdf;

fn benchmark_moments() -> LatentMoments {
    let (xx, xy, yy) = benchmark_latents();
    LatentMoments::gaussian(&xx, &xy.diag().to_owned(), &yy).unwrap()
}

#[test]
fn benchmark_noise_coefficients() {
    let mom = benchmark_moments();
    assert_eq!(mom.alpha[[0, 1]], 12.0);
    assert_eq!(mom.alpha[[0, 0]], 68.0);
    assert!((beta_coeff(1, 2, &mom, 3).unwrap() - 0.5 * 96f64.sqrt()).abs() < 1e-14);
    assert_eq!(beta_coeff(1, 2, &mom, 3).unwrap(), beta_coeff(2, 1, &mom, 3).unwrap());
    assert!((phi(&mom).unwrap() - 95.5).abs() < 1e-12);
}

#[test]
fn benchmark_phase_times() {
    let p = phase_times(&array![4.0, 2.0, 0.5, -4.0, -2.0, -0.5], &benchmark_moments(), 5e-5, 0.1, 0.05, 0.75)
        .unwrap();
    assert!((p.t1 - 0.13107152275364578).abs() < 1e-12);
    assert!((p.t2 - 7.42761548762537).abs() < 1e-12);
    assert_eq!((p.n1, p.n2, p.n3), (2622, 148553, 0));
    assert!((p.delta - 5.946035575013606e-4).abs() < 1e-15);
}

#[test]
fn inverse_normal_quantile_for_nu() {
    // scipy.stats.norm.ppf(0.525)
    assert!((inverse_normal_cdf(0.525).unwrap() - 0.06270677794321385).abs() < 1e-12);
}

#[test]
fn ou_variances_at_benchmark_checkpoints() {
    let beta = 0.5 * 96f64.sqrt();
    let (_, v) = ou_moments(0.0, 2.0, beta, 5e-5 * 1000.0, OuPhase::Escape).unwrap();
    assert!((v - 1.3284165489610191).abs() < 1e-12);
    let (_, v) = ou_moments(0.0, 2.0, beta, f64::INFINITY, OuPhase::Converge).unwrap();
    assert!((5e-5 * v - 3.0e-4).abs() < 1e-15);
}

#[test]
fn recommended_steps() {
    for (eps, want) in [
        (0.04, 0.000837696335078534),
        (0.02, 0.000418848167539267),
        (0.01, 0.0002094240837696335),
    ] {
        assert!((recommended_eta(eps, 4.0, 2.0, 95.5) - want).abs() < 1e-18);
    }
}

#[test]
fn mixing_preserves_the_spectrum() {
    let (xx, xy, yy) = benchmark_latents();
    for seed in 0..5 {
        let model = build_model(&xx, &xy, &yy, 3, 3, seed).unwrap();
        let sv = model.latent_singular_values();
        assert_eq!(sv.to_vec(), vec![4.0, 2.0, 0.5]);
        let s = spls::oracle::svd(model.sigma_xy.view()).unwrap();
        for (a, b) in s.singular.iter().zip([4.0, 2.0, 0.5]) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
