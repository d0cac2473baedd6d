mod common;

use bfdca_core::l1ball::{l1_threshold, project_l1_ball};
use bfdca_core::mask::{make_radial_mask, split_mask};
use bfdca_core::metrics::{nre, psnr, rlne};
use bfdca_core::noise::{add_noise, NoiseKind, NoiseSpec};
use bfdca_core::operators::fourier_forward;
use bfdca_core::phantom::{make_random_phantom, make_shepp_logan, rasterize, SHEPP_LOGAN};
use bfdca_core::split::split_corpus;
use bfdca_core::{Image, SamplingMask, Shape};
use common::*;
use proptest::prelude::*;

/// Threshold by bisection on `τ ↦ Σ max(|vᵢ| − τ, 0)`.
fn bisection_threshold(v: &[f64], radius: f64) -> f64 {
    let total: f64 = v.iter().map(|a| a.abs()).sum();
    if total <= radius {
        return 0.0;
    }
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
    0.5 * (lo + hi)
}

fn bisection_projection(v: &[f64], radius: f64) -> Vec<f64> {
    if radius <= 0.0 {
        return vec![0.0; v.len()];
    }
    let t = bisection_threshold(v, radius);
    v.iter().map(|a| a.signum() * (a.abs() - t).max(0.0)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn l1_projection_matches_bisection(v in prop::collection::vec(-10.0f64..10.0, 1..64), frac in 0.0f64..1.5) {
        let radius = frac * v.iter().map(|a| a.abs()).sum::<f64>();
        let got = project_l1_ball(&v, radius);
        let want = bisection_projection(&v, radius);
        prop_assert!(dist(&got, &want) <= 1e-10 * (1.0 + norm(&v)));
        prop_assert!(got.iter().map(|a| a.abs()).sum::<f64>() <= radius + 1e-9);
        // idempotent
        let again = project_l1_ball(&got, radius);
        prop_assert!(dist(&again, &got) <= 1e-12 * (1.0 + norm(&v)));
    }

    #[test]
    fn radial_mask_hits_target(log in 3u32..7, rate in 0.05f64..1.0, seed in any::<u64>()) {
        let n = 1usize << log;
        let mask = make_radial_mask(n, n, rate, 8, seed).unwrap();
        prop_assert_eq!(mask.m(), ((rate * (n * n) as f64).round() as usize).max(1));
        prop_assert!(mask.is_selected(0));
        prop_assert_eq!(&mask, &make_radial_mask(n, n, rate, 8, seed).unwrap());
    }

    #[test]
    fn noise_preserves_length_and_is_seeded(seed in any::<u64>(), level in 0.0f64..0.5, kind in 0usize..3) {
        let x = random_unit_image(Shape::new(8, 8), &mut rng(seed));
        let mask = random_mask(x.shape(), 0.6, &mut rng(seed ^ 1));
        let clean = fourier_forward(&x, &mask).unwrap();
        let kind = [NoiseKind::SaltPepper, NoiseKind::UniformRandom, NoiseKind::Gaussian][kind];
        let spec = NoiseSpec { kind, level, seed };
        let a = add_noise(&clean, &spec).unwrap();
        prop_assert_eq!(a.len(), clean.len());
        prop_assert_eq!(&a, &add_noise(&clean, &spec).unwrap());
    }

    #[test]
    fn psnr_rlne_link(seed in any::<u64>()) {
        let mut r = rng(seed);
        let shape = Shape::new(8, 8);
        let xs = random_unit_image(shape, &mut r);
        let xb = random_unit_image(shape, &mut r);
        let n = shape.len() as f64;
        let lhs = psnr(&xb, &xs).unwrap();
        let rhs = 20.0 * n.sqrt().log10() - 20.0 * (rlne(&xb, &xs).unwrap() * xb.norm()).log10();
        prop_assert!((lhs - rhs).abs() <= 1e-9);
    }

    #[test]
    fn metrics_are_jointly_permutation_invariant(seed in any::<u64>()) {
        let mut r = rng(seed);
        let shape = Shape::new(4, 4);
        let xs = random_unit_image(shape, &mut r);
        let xb = random_unit_image(shape, &mut r);
        let perm: Vec<usize> = {
            use rand::seq::SliceRandom;
            let mut p: Vec<usize> = (0..16).collect();
            p.shuffle(&mut r);
            p
        };
        let apply = |x: &Image| Image::from_pixels(shape, perm.iter().map(|&i| x.pixels()[i]).collect()).unwrap();
        prop_assert!((rlne(&apply(&xb), &apply(&xs)).unwrap() - rlne(&xb, &xs).unwrap()).abs() < 1e-14);
        prop_assert!((psnr(&apply(&xb), &apply(&xs)).unwrap() - psnr(&xb, &xs).unwrap()).abs() < 1e-10);
    }
}

#[test]
fn l1_edge_cases() {
    let v = [3.0, -1.0, 0.5];
    let t = l1_threshold(&v, 2.0);
    assert!((t - bisection_threshold(&v, 2.0)).abs() < 1e-12);
    assert!((t - 1.0).abs() < 1e-12);
    assert_eq!(project_l1_ball(&v, 0.0), vec![0.0; 3]);
    assert_eq!(project_l1_ball(&v, 10.0), v.to_vec());
}

// Second rasterizer: ellipse table written out again, membership tested in
// the ellipse's own frame with the rotation applied to the axes.
const TABLE: [[f64; 6]; 10] = [
    [1.0, 0.69, 0.92, 0.0, 0.0, 0.0],
    [-0.8, 0.6624, 0.874, 0.0, -0.0184, 0.0],
    [-0.2, 0.11, 0.31, 0.22, 0.0, -18.0],
    [-0.2, 0.16, 0.41, -0.22, 0.0, 18.0],
    [0.1, 0.21, 0.25, 0.0, 0.35, 0.0],
    [0.1, 0.046, 0.046, 0.0, 0.1, 0.0],
    [0.1, 0.046, 0.046, 0.0, -0.1, 0.0],
    [0.1, 0.046, 0.023, -0.08, -0.605, 0.0],
    [0.1, 0.023, 0.023, 0.0, -0.606, 0.0],
    [0.1, 0.023, 0.046, 0.06, -0.605, 0.0],
];

fn oracle_phantom(size: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(size * size);
    for row in 0..size {
        for col in 0..size {
            let px = (2 * col + 1) as f64 / size as f64 - 1.0;
            let py = 1.0 - (2 * row + 1) as f64 / size as f64;
            let mut v = 0.0;
            for e in TABLE {
                let th = e[5].to_radians();
                let (ux, uy) = (th.cos(), th.sin());
                let (dx, dy) = (px - e[3], py - e[4]);
                let along = dx * ux + dy * uy;
                let across = dy * ux - dx * uy;
                if (along / e[1]).powi(2) + (across / e[2]).powi(2) <= 1.0 {
                    v += e[0];
                }
            }
            out.push(v.clamp(0.0, 1.0));
        }
    }
    out
}

#[test]
fn phantom_matches_second_rasterizer() {
    let x = make_shepp_logan(64).unwrap();
    let want = oracle_phantom(64);
    let sum: f64 = x.pixels().iter().sum();
    let sum_o: f64 = want.iter().sum();
    assert_eq!(sum, sum_o);
    assert!(x.pixels().iter().zip(&want).all(|(a, b)| a == b));
}

#[test]
fn phantom_geometry() {
    let x = make_shepp_logan(64).unwrap();
    for &(r, c) in &[(0, 0), (0, 63), (63, 0), (63, 63)] {
        assert_eq!(x.get(0, r, c), 0.0);
    }
    // the skull and brain ellipses are centred on the vertical axis, so their
    // midpoint rasterization mirrors exactly; the inner ellipses are not
    // mirror pairs (different axes), which confines asymmetry to them
    let outer = rasterize(&SHEPP_LOGAN[..2], 64);
    for r in 0..64 {
        for c in 0..32 {
            assert_eq!(outer.get(0, r, c), outer.get(0, r, 63 - c));
        }
    }
    let mid = |i: usize| (2 * i + 1) as f64 / 64.0 - 1.0;
    for r in 0..64 {
        for c in 0..64 {
            if x.get(0, r, c) != x.get(0, r, 63 - c) {
                let (px, py) = (mid(c), -mid(r));
                assert!(SHEPP_LOGAN[2..].iter().any(|e| e.contains(px, py) || e.contains(-px, py)));
            }
        }
    }
    assert!(make_random_phantom(64, 5).unwrap() != make_random_phantom(64, 6).unwrap());
}

#[test]
fn phantom_mask_count() {
    let mask = make_radial_mask(64, 64, 0.57, 18, 0).unwrap();
    assert_eq!(mask.m(), 2335);
}

#[test]
fn holdout_split_covers_mask() {
    let mask = make_radial_mask(32, 32, 0.5, 10, 2).unwrap();
    let (tr, val) = split_mask(&mask, 0.8, 3).unwrap();
    assert!(tr.is_disjoint(&val));
    assert_eq!(tr.m() + val.m(), mask.m());
    assert!(tr.is_selected(0));
}

#[test]
fn salt_pepper_count_on_phantom_mask() {
    let x = make_shepp_logan(64).unwrap();
    let mask = make_radial_mask(64, 64, 0.57, 18, 0).unwrap();
    let clean = fourier_forward(&x, &mask).unwrap();
    let noisy = add_noise(&clean, &NoiseSpec { kind: NoiseKind::SaltPepper, level: 0.01, seed: 1 }).unwrap();
    let changed = clean.samples.iter().zip(&noisy.samples).filter(|(a, b)| a != b).count();
    assert_eq!(changed, 23);
}

#[test]
fn nre_increases_with_noise_level() {
    let x = make_shepp_logan(32).unwrap();
    let mask = make_radial_mask(32, 32, 0.5, 10, 0).unwrap();
    let clean = fourier_forward(&x, &mask).unwrap();
    let levels = [0.001, 0.01, 0.05];
    let mut wins = 0;
    for seed in 0..20 {
        let vals: Vec<f64> = levels
            .iter()
            .map(|&level| {
                let b = add_noise(&clean, &NoiseSpec { kind: NoiseKind::Gaussian, level, seed }).unwrap();
                nre(&x, &b, &mask).unwrap()
            })
            .collect();
        wins += usize::from(vals.windows(2).all(|w| w[0] < w[1]));
    }
    assert!(wins >= 18, "{wins}/20 seeds ordered");
    let b0 = add_noise(&clean, &NoiseSpec::none()).unwrap();
    assert_eq!(nre(&x, &b0, &mask).unwrap(), 0.0);
}

#[test]
fn corpus_split_protocol_sizes() {
    let s = split_corpus(100, (10, 10, 50), 9).unwrap();
    assert_eq!((s.train.len(), s.validation.len(), s.test.len()), (10, 10, 50));
    assert_eq!(s, split_corpus(100, (10, 10, 50), 9).unwrap());
    let full = SamplingMask::full(Shape::new(8, 8));
    assert_eq!(full.m(), 64);
}

#[test]
fn restrict_matches_forward_on_submask() {
    let (h, w) = (16, 16);
    let shape = Shape::new(h, w);
    let x = Image::from_pixels(shape, (0..h * w).map(|i| ((i * 37) % 11) as f64 / 11.0).collect()).unwrap();
    let mask = make_radial_mask(h, w, 0.4, 8, 3).unwrap();
    let (tr, val) = split_mask(&mask, 0.7, 5).unwrap();
    let full = SamplingMask::full(shape);
    let k = fourier_forward(&x, &full).unwrap().samples;
    let pick = |m: &SamplingMask| bfdca_core::KSpaceData::new(m.indices().map(|i| k[i]).collect());
    let b = pick(&mask);
    assert_eq!(b.restrict(&mask, &tr).unwrap(), pick(&tr));
    assert_eq!(b.restrict(&mask, &val).unwrap(), pick(&val));
    assert_eq!(b.restrict(&mask, &mask).unwrap(), b);
    // not a subset
    assert!(b.restrict(&mask, &full).is_err());
    // wrong sample count
    assert!(pick(&tr).restrict(&mask, &tr).is_err());
}
