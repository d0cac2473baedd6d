mod common;

use bfdca_core::kkt::equivalence_roundtrip;
use bfdca_core::lower::{AdmmConfig, Hyperparams};
use bfdca_core::operators::{fourier_adjoint, fourier_forward};
use bfdca_core::penalized::{penalized_objective, solve_penalized, solve_penalized_ext};
use bfdca_core::{Dataset, Image, SamplingMask, Shape};
use common::*;
use num_complex::Complex64;

fn tight() -> AdmmConfig {
    AdmmConfig {
        max_iter: 20_000,
        primal_tol: 1e-10,
        dual_tol: 1e-10,
        ..AdmmConfig::default()
    }
}

fn full_noisy(shape: Shape, noise: f64, seed: u64) -> (SamplingMask, bfdca_core::KSpaceData, Image) {
    let mut r = rng(seed);
    let x = random_unit_image(shape, &mut r);
    let mask = SamplingMask::full(shape);
    let mut b = fourier_forward(&x, &mask).unwrap();
    for s in &mut b.samples {
        *s += Complex64::new(noise * rand::Rng::random_range(&mut r, -1.0..1.0), noise * rand::Rng::random_range(&mut r, -1.0..1.0));
    }
    (mask, b, x)
}

#[test]
fn zero_weights_on_full_mask_invert_exactly() {
    let (mask, b, x) = full_noisy(Shape::new(8, 8), 0.0, 1);
    let sol = solve_penalized(&mask, &b, &Hyperparams::weights(0.0, 0.0).unwrap(), &tight()).unwrap();
    assert!(dist(sol.x.pixels(), x.pixels()) < 1e-8);
    assert!(sol.objective < 1e-15);
}

#[test]
fn huge_wavelet_weight_gives_zero() {
    let (mask, b, _) = full_noisy(Shape::new(8, 8), 0.05, 2);
    let sol = solve_penalized(&mask, &b, &Hyperparams::weights(1e6, 0.0).unwrap(), &tight()).unwrap();
    assert!(norm(sol.x.pixels()) < 1e-6, "{}", norm(sol.x.pixels()));
}

/// Full mask: the objective is `½‖x − c‖²` plus a constant, with `c = Re(Fᴴb)`.
/// Its dual over `|p| ≤ λ₁`, `|q| ≤ λ₂` is solved by projected gradient on
/// dense matrices.
#[test]
fn matches_dense_dual_oracle() {
    let shape = Shape::new(4, 4);
    let (mask, b, _) = full_noisy(shape, 0.1, 3);
    let lam = [0.05, 0.08];
    let c = fourier_adjoint(&b, &mask).unwrap().into_pixels();
    let w = dense_haar(4);
    let (dx, dy) = dense_diff(4, 4);
    let a: Vec<Vec<f64>> = w.iter().chain(&dx).chain(&dy).cloned().collect();
    let at = transpose(&a);
    let bound: Vec<f64> = (0..a.len()).map(|i| if i < 16 { lam[0] } else { lam[1] }).collect();
    let mut y = vec![0.0; a.len()];
    let step = 1.0 / 9.0;
    for _ in 0..200_000 {
        let x: Vec<f64> = c.iter().zip(matvec(&at, &y)).map(|(ci, v)| ci - v).collect();
        let g = matvec(&a, &x);
        for ((yi, gi), bi) in y.iter_mut().zip(&g).zip(&bound) {
            *yi = (*yi + step * gi).clamp(-bi, *bi);
        }
    }
    let x_oracle: Vec<f64> = c.iter().zip(matvec(&at, &y)).map(|(ci, v)| ci - v).collect();
    let x_oracle = Image::from_pixels(shape, x_oracle).unwrap();
    let want = penalized_objective(&x_oracle, &mask, &b, lam).unwrap();
    let sol = solve_penalized(&mask, &b, &Hyperparams::weights(lam[0], lam[1]).unwrap(), &tight()).unwrap();
    assert!((sol.objective - want).abs() < 1e-6, "{} vs {want}", sol.objective);
    assert!(dist(sol.x.pixels(), x_oracle.pixels()) < 1e-4);
}

#[test]
fn history_and_objective_agree() {
    let (data, _) = noisy_dataset(Shape::new(8, 8), 0.5, 0.02, 4);
    let lam = Hyperparams::weights(0.01, 0.02).unwrap();
    let sol = solve_penalized_ext(&data.mask_tr, &data.b_tr, &lam, &AdmmConfig::default(), None, true).unwrap();
    assert_eq!(sol.history.len(), sol.iterations);
    let last = *sol.history.last().unwrap();
    assert!((last - sol.objective).abs() <= 1e-12 * (1.0 + last));
    let direct = penalized_objective(&sol.x, &data.mask_tr, &data.b_tr, lam.values).unwrap();
    assert!((sol.objective - direct).abs() <= 1e-12 * (1.0 + direct));
    // the late iterates are no worse than the early ones
    assert!(sol.objective <= sol.history[4] + 1e-9);
    if sol.converged {
        assert!(sol.kkt_residual < 1e-3, "{} after {}", sol.kkt_residual, sol.iterations);
    }
}

#[test]
fn rejects_radii() {
    let (data, _) = noisy_dataset(Shape::new(4, 4), 0.5, 0.0, 5);
    assert!(solve_penalized(&data.mask_tr, &data.b_tr, &Hyperparams::radii(1.0, 1.0).unwrap(), &tight()).is_err());
    assert!(equivalence_roundtrip(&data, &Hyperparams::radii(1.0, 1.0).unwrap(), &tight()).is_err());
}

#[test]
fn zero_weight_roundtrip_is_exact() {
    let (mask, b, x) = full_noisy(Shape::new(8, 8), 0.0, 6);
    let data = Dataset::aliased(mask, b, Some(x)).unwrap();
    let rt = equivalence_roundtrip(&data, &Hyperparams::weights(0.0, 0.0).unwrap(), &tight()).unwrap();
    assert!(rt.penalized_to_constrained <= 1e-6 * rt.scale);
    assert!(rt.constrained_to_penalized <= 1e-6 * rt.scale);
    assert!(rt.xi[0] <= 1e-6 && rt.xi[1] <= 1e-6);
}

#[test]
fn roundtrip_recovers_weights() {
    for (seed, lam) in [(7, [0.02, 0.01]), (8, [0.005, 0.03])] {
        let (data, _) = noisy_dataset(Shape::new(8, 8), 0.6, 0.05, seed);
        let rt = equivalence_roundtrip(&data, &Hyperparams::weights(lam[0], lam[1]).unwrap(), &tight()).unwrap();
        assert!(rt.converged);
        assert!(rt.penalized_to_constrained <= 1e-3 * rt.scale, "{rt:?}");
        assert!(rt.constrained_to_penalized <= 1e-3 * rt.scale, "{rt:?}");
    }
}
