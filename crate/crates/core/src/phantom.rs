//! Shepp-Logan phantom and randomized ellipse phantoms.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::image::{Image, Shape};
use crate::math;

/// One ellipse: intensity, semi-axes, centre and rotation (degrees).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ellipse {
    pub intensity: f64,
    pub a: f64,
    pub b: f64,
    pub x0: f64,
    pub y0: f64,
    pub phi_deg: f64,
}

impl Ellipse {
    const fn new(intensity: f64, a: f64, b: f64, x0: f64, y0: f64, phi_deg: f64) -> Self {
        Self {
            intensity,
            a,
            b,
            x0,
            y0,
            phi_deg,
        }
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        let t = self.phi_deg * PI / 180.0;
        let (c, s) = (math::cos(t), math::sin(t));
        let (dx, dy) = (x - self.x0, y - self.y0);
        let xr = dx * c + dy * s;
        let yr = -dx * s + dy * c;
        (xr * xr) / (self.a * self.a) + (yr * yr) / (self.b * self.b) <= 1.0
    }
}

/// The ten ellipses of the (contrast-enhanced) Shepp-Logan head phantom on
/// the square `[-1, 1]²`, `y` pointing up.
pub const SHEPP_LOGAN: [Ellipse; 10] = [
    Ellipse::new(1.0, 0.69, 0.92, 0.0, 0.0, 0.0),
    Ellipse::new(-0.8, 0.6624, 0.874, 0.0, -0.0184, 0.0),
    Ellipse::new(-0.2, 0.11, 0.31, 0.22, 0.0, -18.0),
    Ellipse::new(-0.2, 0.16, 0.41, -0.22, 0.0, 18.0),
    Ellipse::new(0.1, 0.21, 0.25, 0.0, 0.35, 0.0),
    Ellipse::new(0.1, 0.046, 0.046, 0.0, 0.1, 0.0),
    Ellipse::new(0.1, 0.046, 0.046, 0.0, -0.1, 0.0),
    Ellipse::new(0.1, 0.046, 0.023, -0.08, -0.605, 0.0),
    Ellipse::new(0.1, 0.023, 0.023, 0.0, -0.606, 0.0),
    Ellipse::new(0.1, 0.023, 0.046, 0.06, -0.605, 0.0),
];

/// Rasterizes a list of ellipses by sampling each pixel at its midpoint.
/// Values are clipped to `[0, 1]`.
pub fn rasterize(ellipses: &[Ellipse], size: usize) -> Image {
    let mut px = vec![0.0; size * size];
    let step = 2.0 / size as f64;
    for i in 0..size {
        let y = 1.0 - (i as f64 + 0.5) * step;
        for j in 0..size {
            let x = -1.0 + (j as f64 + 0.5) * step;
            let v: f64 = ellipses
                .iter()
                .filter(|e| e.contains(x, y))
                .map(|e| e.intensity)
                .sum();
            px[i * size + j] = v.clamp(0.0, 1.0);
        }
    }
    Image::with_pixels(Shape::new(size, size), px)
}

fn check_size(size: usize) -> Result<()> {
    if size < 8 || !size.is_power_of_two() {
        return Err(Error::InvalidParameter {
            name: "size",
            reason: "phantom size must be a power of two and at least 8",
        });
    }
    Ok(())
}

pub fn make_shepp_logan(size: usize) -> Result<Image> {
    check_size(size)?;
    Ok(rasterize(&SHEPP_LOGAN, size))
}

/// A random head-like phantom: the Shepp-Logan layout with jittered centres,
/// axes, angles and inner intensities. Deterministic in `seed`.
pub fn make_random_phantom(size: usize, seed: u64) -> Result<Image> {
    check_size(size)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ellipses: Vec<Ellipse> = SHEPP_LOGAN.to_vec();
    let scale = rng.random_range(0.85..1.05);
    for (k, e) in ellipses.iter_mut().enumerate() {
        e.a *= scale;
        e.b *= scale;
        e.x0 *= scale;
        e.y0 *= scale;
        if k >= 2 {
            e.a *= rng.random_range(0.7..1.3);
            e.b *= rng.random_range(0.7..1.3);
            e.x0 += rng.random_range(-0.06..0.06);
            e.y0 += rng.random_range(-0.06..0.06);
            e.phi_deg += rng.random_range(-20.0..20.0);
            e.intensity *= rng.random_range(0.5..2.0);
        }
    }
    // A few extra small lesions.
    let extra = rng.random_range(0..4);
    for _ in 0..extra {
        let r = rng.random_range(0.0..0.45);
        let t = rng.random_range(0.0..2.0 * PI);
        ellipses.push(Ellipse::new(
            rng.random_range(-0.15..0.3),
            rng.random_range(0.02..0.1),
            rng.random_range(0.02..0.1),
            r * math::cos(t),
            r * math::sin(t),
            rng.random_range(0.0..180.0),
        ));
    }
    Ok(rasterize(&ellipses, size))
}
