//! Invariant checks on small random instances, for a quick health check of a
//! build.

use bfdca_core::kkt::equivalence_roundtrip;
use bfdca_core::l1ball::project_l1_ball;
use bfdca_core::operators::{
    diff_adjoint, diff_forward, fourier_adjoint, fourier_forward, haar_adjoint, haar_forward, solve_normal_system,
};
use bfdca_core::{solve_lower, AdmmConfig, Dataset, Hyperparams, Image, KSpaceData, SamplingMask, Shape};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    /// Worst violation seen.
    pub value: f64,
    pub tol: f64,
}

impl Check {
    pub fn passed(&self) -> bool {
        self.value <= self.tol
    }
}

fn image(shape: Shape, rng: &mut ChaCha8Rng) -> Image {
    let px = (0..shape.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
    Image::from_pixels(shape, px).expect("sizes agree")
}

fn mask(shape: Shape, rng: &mut ChaCha8Rng) -> SamplingMask {
    let mut sel: Vec<bool> = (0..shape.len()).map(|_| rng.random_bool(0.5)).collect();
    sel[0] = true;
    SamplingMask::from_selected(shape, sel).expect("sizes agree")
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Threshold `τ` with `Σ max(|vᵢ| − τ, 0) = radius`, by bisection.
fn bisect_threshold(v: &[f64], radius: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, v.iter().fold(0.0f64, |m, a| m.max(a.abs())));
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let s: f64 = v.iter().map(|a| (a.abs() - mid).max(0.0)).sum();
        if s > radius {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// Runs every check with `trials` random cases on `size × size` images.
pub fn selfcheck(size: usize, trials: usize, seed: u64) -> Result<Vec<Check>> {
    let shape = Shape::new(size, size);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checks = vec![
        Check { name: "fourier adjointness", value: 0.0, tol: 1e-10 },
        Check { name: "haar orthonormality", value: 0.0, tol: 1e-10 },
        Check { name: "difference adjointness", value: 0.0, tol: 1e-10 },
        Check { name: "normal system residual", value: 0.0, tol: 1e-8 },
        Check { name: "l1-ball projection", value: 0.0, tol: 1e-10 },
        Check { name: "value-function subgradient", value: 0.0, tol: 1e-6 },
        Check { name: "penalized/constrained round trip", value: 0.0, tol: 1e-3 },
    ];
    for _ in 0..trials {
        let x = image(shape, &mut rng);
        let m = mask(shape, &mut rng);
        let y = KSpaceData::new(
            (0..m.m())
                .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                .collect(),
        );
        let lhs = fourier_forward(&x, &m)?.inner(&y);
        let rhs = dot(x.pixels(), fourier_adjoint(&y, &m)?.pixels());
        checks[0].value = checks[0].value.max((lhs - rhs).abs() / (1.0 + x.norm() * y.norm()));

        let c = haar_forward(&x)?;
        let back = haar_adjoint(&c)?;
        let err = (norm(&c.coeffs) - x.norm()).abs().max(
            x.pixels()
                .iter()
                .zip(back.pixels())
                .fold(0.0f64, |a, (p, q)| a.max((p - q).abs())),
        );
        checks[1].value = checks[1].value.max(err);

        let g = diff_forward(&image(shape, &mut rng));
        let dx = diff_forward(&x);
        let lhs = dx.inner(&g);
        let rhs = dot(x.pixels(), diff_adjoint(&g).pixels());
        checks[2].value = checks[2].value.max((lhs - rhs).abs() / (1.0 + x.norm()));

        // (ΦᴴΦ + aI + cDᵀD) z = x
        let (a, cw) = (rng.random_range(0.1..2.0), rng.random_range(0.0..2.0));
        let z = solve_normal_system(&x, a, cw, &m)?;
        let mut lhs = fourier_adjoint(&fourier_forward(&z, &m)?, &m)?.into_pixels();
        let dtd = diff_adjoint(&diff_forward(&z));
        for ((l, zi), d) in lhs.iter_mut().zip(z.pixels()).zip(dtd.pixels()) {
            *l += a * zi + cw * d;
        }
        let res: Vec<f64> = lhs.iter().zip(x.pixels()).map(|(l, r)| l - r).collect();
        checks[3].value = checks[3].value.max(norm(&res) / (1.0 + x.norm()));

        let len = rng.random_range(1..=64);
        let v: Vec<f64> = (0..len).map(|_| rng.random_range(-2.0..2.0)).collect();
        let radius = rng.random_range(0.0..(len as f64));
        let p = project_l1_ball(&v, radius);
        let l1: f64 = v.iter().map(|a| a.abs()).sum();
        let tau = if l1 <= radius { 0.0 } else { bisect_threshold(&v, radius) };
        let err = v
            .iter()
            .zip(&p)
            .map(|(a, q)| (a.signum() * (a.abs() - tau).max(0.0) - q).abs())
            .fold(0.0f64, f64::max);
        checks[4].value = checks[4].value.max(err);
    }

    // value function and round trips on one noisy instance
    let truth = Image::from_pixels(shape, (0..shape.len()).map(|_| rng.random_range(0.0..1.0)).collect())?;
    let m = mask(shape, &mut rng);
    let mut b = fourier_forward(&truth, &m)?;
    for s in &mut b.samples {
        *s += Complex64::new(rng.random_range(-0.05..0.05), rng.random_range(-0.05..0.05));
    }
    let data = Dataset::aliased(m, b, Some(truth))?;
    let tight = AdmmConfig {
        max_iter: 20_000,
        primal_tol: 1e-10,
        dual_tol: 1e-10,
        ..AdmmConfig::default()
    };
    for _ in 0..trials.min(5) {
        let r = [rng.random_range(0.05..5.0), rng.random_range(0.05..5.0)];
        let at = solve_lower(&data, &Hyperparams::radii(r[0], r[1])?, &tight)?;
        for i in 0..2 {
            for s in [-1e-3, 1e-3] {
                let mut rp = r;
                rp[i] += s;
                let h = solve_lower(&data, &Hyperparams::radii(rp[0], rp[1])?, &tight)?.value;
                let bound = at.value - at.xi[i] * s;
                checks[5].value = checks[5].value.max(bound - h);
            }
        }
        let lam = [rng.random_range(0.001..0.05), rng.random_range(0.001..0.05)];
        let rt = equivalence_roundtrip(&data, &Hyperparams::weights(lam[0], lam[1])?, &tight)?;
        let worst = rt.penalized_to_constrained.max(rt.constrained_to_penalized) / rt.scale;
        checks[6].value = checks[6].value.max(worst);
    }
    Ok(checks)
}
