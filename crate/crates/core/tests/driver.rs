mod common;

use bfdca_core::driver::{run_bfdca, update_alpha, update_rho};
use bfdca_core::operators::fourier_forward;
use bfdca_core::{metrics, BfdcaConfig, Dataset, NullClock, SamplingMask, Shape};
use common::*;

fn cfg() -> BfdcaConfig {
    BfdcaConfig { max_outer: 60, ..BfdcaConfig::default() }
}

#[test]
fn alpha_update_examples() {
    let c = BfdcaConfig::default();
    // max(0, 1/10) = 0.1 < 1/0.5 = 2
    assert_eq!(update_alpha(0.0, 0.5, 10.0, &c), 0.005);
    // feasible iterate: 1/η = ∞
    assert_eq!(update_alpha(0.0, 0.5, 0.0, &c), 0.0);
    // α already past c_α/Δ
    assert_eq!(update_alpha(3.0, 0.5, 10.0, &c), 3.0);
    // zero step with positive η grows
    assert_eq!(update_alpha(1.0, 0.0, 10.0, &c), 1.005);
    // capped
    assert_eq!(update_alpha(9.999, 0.01, 10.0, &c), 10.0);
}

#[test]
fn rho_update_examples() {
    let c = BfdcaConfig { delta_rho: 0.5, rho_max: 1.0, ..BfdcaConfig::default() };
    assert_eq!(update_rho(0.001, 2.0, &c), 0.501);
    assert_eq!(update_rho(0.001, 1.0, &c), 0.001);
    assert_eq!(update_rho(0.9, 2.0, &c), 1.0);
    // default δ_ρ = 0 keeps ρ fixed
    assert_eq!(update_rho(0.001, 5.0, &BfdcaConfig::default()), 0.001);
}

#[test]
fn loose_tolerance_stops_after_one_record() {
    let (data, _) = noisy_dataset(Shape::new(8, 8), 0.5, 0.01, 1);
    let t = run_bfdca(&data, &BfdcaConfig { tol: 1e12, ..cfg() }, &NullClock).unwrap();
    assert_eq!(t.iterations(), 1);
    assert!(t.converged);
    assert_eq!(t.records[0].k, 0);
    assert_eq!(t.records[0].energy_prev, None);
    assert_eq!(t.z, t.best);
}

#[test]
fn noiseless_full_mask_recovers_image() {
    let shape = Shape::new(8, 8);
    let x = random_unit_image(shape, &mut rng(2));
    let mask = SamplingMask::full(shape);
    let b = fourier_forward(&x, &mask).unwrap();
    let data = Dataset::aliased(mask, b, Some(x.clone())).unwrap();
    let t = run_bfdca(&data, &BfdcaConfig { tol: 1e-6, max_outer: 200, ..cfg() }, &NullClock).unwrap();
    let err = metrics::rlne(&t.z.x, &x).unwrap();
    assert!(err <= 1e-4, "rlne {err}");
}

#[test]
fn penalty_parameters_are_monotone_and_bounded() {
    let (data, _) = noisy_dataset(Shape::new(8, 8), 0.4, 0.05, 3);
    let c = BfdcaConfig { delta_rho: 0.01, rho_max: 0.05, c_rho: 0.01, ..cfg() };
    let t = run_bfdca(&data, &c, &NullClock).unwrap();
    for w in t.records.windows(2) {
        assert!(w[1].alpha >= w[0].alpha);
        assert!(w[1].rho >= w[0].rho);
    }
    for r in &t.records {
        assert!(r.alpha <= c.alpha_max && r.rho <= c.rho_max);
        assert!(r.r[0] >= 0.0 && r.r[1] >= 0.0);
        assert!(r.xi[0] >= 0.0 && r.xi[1] >= 0.0);
        assert!(r.eta >= 0.0 && r.delta >= 0.0);
    }
}

#[test]
fn energy_does_not_increase() {
    let (data, _) = noisy_dataset(Shape::new(8, 8), 0.5, 0.02, 4);
    let t = run_bfdca(&data, &cfg(), &NullClock).unwrap();
    assert!(t.iterations() > 2);
    // E(z^{k+1}, zᵏ) ≤ E(zᵏ, zᵏ⁻¹) up to the inexactness of both solves
    let mut bad = 0;
    for r in &t.records[1..] {
        let prev = r.energy_prev.unwrap();
        if r.energy > prev + 1e-6 * (1.0 + prev.abs()) {
            bad += 1;
        }
    }
    assert!(bad * 10 <= t.iterations(), "{bad} increases in {} records", t.iterations());
}

#[test]
fn deterministic_with_null_clock() {
    let (data, _) = noisy_dataset(Shape::new(8, 8), 0.5, 0.02, 5);
    let a = run_bfdca(&data, &cfg(), &NullClock).unwrap();
    let b = run_bfdca(&data, &cfg(), &NullClock).unwrap();
    assert_eq!(a, b);
    assert!(a.records.iter().all(|r| r.wall_time == 0.0));
}

#[test]
fn rejects_bad_config() {
    let (data, _) = noisy_dataset(Shape::new(4, 4), 0.5, 0.0, 6);
    for c in [
        BfdcaConfig { tol: 0.0, ..cfg() },
        BfdcaConfig { alpha_max: 0.0, ..cfg() },
        BfdcaConfig { r0: [-1.0, 0.0], ..cfg() },
        BfdcaConfig { max_outer: 0, ..cfg() },
        BfdcaConfig { x0: Some(bfdca_core::Image::zeros(Shape::new(8, 8))), ..cfg() },
    ] {
        assert!(run_bfdca(&data, &c, &NullClock).is_err());
    }
}

#[test]
fn small_radii_are_counted() {
    let (data, _) = noisy_dataset(Shape::new(8, 8), 0.5, 0.02, 6);
    let c = BfdcaConfig { r0: [0.0, 0.0], max_outer: 3, ..cfg() };
    let t = run_bfdca(&data, &c, &NullClock).unwrap();
    let expected = t.records.iter().filter(|r| r.r[0].min(r.r[1]) < bfdca_core::driver::SMALL_RADIUS).count();
    assert_eq!(t.small_radius_steps, expected);
    let big = run_bfdca(&data, &BfdcaConfig { max_outer: 3, ..cfg() }, &NullClock).unwrap();
    assert!(big.records.iter().all(|r| r.r[0] > 1e-8 && r.r[1] > 1e-8));
    assert_eq!(big.small_radius_steps, 0);
}
