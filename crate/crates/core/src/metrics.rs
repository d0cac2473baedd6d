//! Reconstruction quality metrics.

use crate::error::{Error, Result};
use crate::image::{Image, KSpaceData, SamplingMask};
use crate::math;
use crate::operators::fourier_forward;

/// `‖x̄ − x⋆‖₂ / ‖x̄‖₂` (normalized by the reconstruction).
pub fn rlne(x_bar: &Image, x_star: &Image) -> Result<f64> {
    x_bar.same_shape(x_star, "rlne")?;
    let den = x_bar.norm();
    if den == 0.0 {
        return Err(Error::ZeroDenominator("rlne: reconstruction is zero"));
    }
    Ok(math::sqrt(math::dist2_sq(x_bar.pixels(), x_star.pixels())) / den)
}

/// `20 log₁₀(√n / ‖x̄ − x⋆‖₂)`; `+∞` on exact recovery.
pub fn psnr(x_bar: &Image, x_star: &Image) -> Result<f64> {
    x_bar.same_shape(x_star, "psnr")?;
    let err = math::sqrt(math::dist2_sq(x_bar.pixels(), x_star.pixels()));
    if err == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(20.0 * math::log10(math::sqrt(x_bar.len() as f64) / err))
}

/// `‖Φx⋆ − b‖₂ / (1 + ‖b‖₂)`.
pub fn nre(x_star: &Image, b: &KSpaceData, mask: &SamplingMask) -> Result<f64> {
    let ax = fourier_forward(x_star, mask)?;
    b.check(mask)?;
    let diff: f64 = ax
        .samples
        .iter()
        .zip(&b.samples)
        .map(|(p, q)| (p - q).norm_sqr())
        .sum();
    Ok(math::sqrt(diff) / (1.0 + b.norm()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricReport {
    pub rlne: f64,
    pub psnr: f64,
    pub nre: f64,
}

impl MetricReport {
    /// RLNE and PSNR of `x_bar` against `x_star`, NRE of the data `b`.
    pub fn compute(x_bar: &Image, x_star: &Image, b: &KSpaceData, mask: &SamplingMask) -> Result<Self> {
        Ok(Self {
            rlne: rlne(x_bar, x_star)?,
            psnr: psnr(x_bar, x_star)?,
            nre: nre(x_star, b, mask)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::Shape;
    use alloc::vec::Vec;

    fn ramp() -> Image {
        let px: Vec<f64> = (0..64).map(|i| i as f64 / 64.0).collect();
        Image::from_pixels(Shape::new(8, 8), px).unwrap()
    }

    #[test]
    fn exact_recovery() {
        let x = ramp();
        assert_eq!(rlne(&x, &x).unwrap(), 0.0);
        assert_eq!(psnr(&x, &x).unwrap(), f64::INFINITY);
    }

    #[test]
    fn doubled_reconstruction() {
        let x = ramp();
        let y = Image::from_pixels(x.shape(), x.pixels().iter().map(|v| 2.0 * v).collect()).unwrap();
        assert!((rlne(&y, &x).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn uniform_offset_gives_20_db() {
        let x = ramp();
        let y = Image::from_pixels(x.shape(), x.pixels().iter().map(|v| v + 0.1).collect()).unwrap();
        assert!((psnr(&y, &x).unwrap() - 20.0).abs() < 1e-10);
    }

    #[test]
    fn zero_reconstruction_is_error() {
        let x = ramp();
        assert!(rlne(&Image::zeros(x.shape()), &x).is_err());
    }

    #[test]
    fn nre_cases() {
        let x = ramp();
        let mask = SamplingMask::full(x.shape());
        let b = fourier_forward(&x, &mask).unwrap();
        assert!(nre(&x, &b, &mask).unwrap() < 1e-14);
        let v = nre(&Image::zeros(x.shape()), &b, &mask).unwrap();
        assert!((v - b.norm() / (1.0 + b.norm())).abs() < 1e-14);
    }
}
