mod common;

use bfdca_core::kkt::{kkt_residual, kkt_residual_with, KktOptions};
use bfdca_core::lower::{solve_lower, AdmmConfig, Hyperparams};
use bfdca_core::penalty::OuterPoint;
use bfdca_core::{run_bfdca, BfdcaConfig, Error, NullClock, Shape};
use common::*;

#[test]
fn terminal_iterate_is_nearly_stationary() {
    let data = held_out_dataset(Shape::new(8, 8), 0.7, 0.05, 1);
    let t = run_bfdca(&data, &BfdcaConfig { max_outer: 300, ..BfdcaConfig::default() }, &NullClock).unwrap();
    println!("iters {} converged {} r {:?} xi {:?}", t.iterations(), t.converged, t.z.r, t.lower.xi);
    let res = kkt_residual(&t.z, &t.lower, &data).unwrap();
    println!("{res:?}");
    assert!(res.multipliers.iter().all(|&m| m >= 0.0));
    assert!(res.max_component() <= 1e-2 * (1.0 + t.z.norm()), "{res:?}");
}

#[test]
fn perturbation_raises_stationarity() {
    let (data, _) = noisy_dataset(Shape::new(8, 8), 0.5, 0.02, 2);
    let t = run_bfdca(&data, &BfdcaConfig { max_outer: 80, ..BfdcaConfig::default() }, &NullClock).unwrap();
    let base = kkt_residual(&t.z, &t.lower, &data).unwrap();
    let mut x = t.z.x.clone();
    let noise = random_image(x.shape(), &mut rng(3));
    for (p, n) in x.pixels_mut().iter_mut().zip(noise.pixels()) {
        *p += 0.2 * n;
    }
    let moved = kkt_residual(&OuterPoint::new(x, t.z.r).unwrap(), &t.lower, &data).unwrap();
    assert!(moved.stationarity_x > base.stationarity_x + 1e-3, "{base:?} vs {moved:?}");
}

#[test]
fn least_squares_point_with_slack_radii() {
    // large radii: lower constraints inactive, x̄ is the LS solution and
    // ξ_lower = 0, so the x residual is ‖∇F‖ at x̄ with ξ₀ fitted
    let (data, _) = noisy_dataset(Shape::new(8, 8), 0.5, 0.02, 4);
    let cfg = AdmmConfig { max_iter: 20_000, primal_tol: 1e-10, dual_tol: 1e-10, ..AdmmConfig::default() };
    let lower = solve_lower(&data, &Hyperparams::radii(1e4, 1e4).unwrap(), &cfg).unwrap();
    let z = OuterPoint::new(lower.x_bar.clone(), [1e4, 1e4]).unwrap();
    let res = kkt_residual(&z, &lower, &data).unwrap();
    // validation aliases training, so ∇F(x̄) = ∇f(x̄) = 0
    assert!(res.stationarity_x < 1e-6, "{res:?}");
    assert!(res.feasibility < 1e-6);
    assert_eq!(res.stationarity_r, 0.0);
}

#[test]
fn input_checks() {
    let (data, _) = noisy_dataset(Shape::new(8, 8), 0.5, 0.02, 5);
    let lower = solve_lower(&data, &Hyperparams::radii(1.0, 2.0).unwrap(), &AdmmConfig::default()).unwrap();
    let z = OuterPoint::new(lower.x_bar.clone(), [1.5, 2.0]).unwrap();
    assert!(matches!(kkt_residual(&z, &lower, &data), Err(Error::InvalidParameter { .. })));
    let starved = AdmmConfig { max_iter: 1, ..AdmmConfig::default() };
    let rough = solve_lower(&data, &Hyperparams::radii(0.1, 0.1).unwrap(), &starved).unwrap();
    let z = OuterPoint::new(rough.x_bar.clone(), [0.1, 0.1]).unwrap();
    let strict = KktOptions { lower_tol: 0.0, ..KktOptions::default() };
    if rough.infeasibility() > 0.0 {
        assert!(matches!(kkt_residual_with(&z, &rough, &data, &strict), Err(Error::InfeasibleLower(_))));
    }
}
