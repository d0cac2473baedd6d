//! Linear operators of the restoration model.
//!
//! * partial Fourier `Φ = P F` with the unitary 2-D DFT,
//! * full-depth orthonormal Haar analysis `Ψ`,
//! * periodic forward differences `D` (anisotropic TV),
//!
//! plus [`FourierSystem`], an exact solver for any combination
//! `Σ w_j Φ_jᵀΦ_j + a I + c DᵀD`, all of which are diagonal in the DFT basis
//! under periodic boundaries.
//!
//! `Φ` maps real images to complex samples; its adjoint is taken with respect
//! to the real inner product `Re⟨·,·⟩`, which is why it keeps only the real part.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft::Fft2;
use crate::image::{GradientField, Image, KSpaceData, SamplingMask, Shape, WaveletCoeffs};
use crate::math;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

fn check_mask(x: &Image, mask: &SamplingMask) -> Result<()> {
    if x.shape() != mask.shape() {
        return Err(Error::mismatch("mask vs image", x.len(), mask.shape().len()));
    }
    x.shape().require_pow2()
}

/// Gathers the mask-selected entries of a full spectrum.
pub fn gather(spec: &[Complex64], mask: &SamplingMask) -> KSpaceData {
    KSpaceData::new(mask.indices().map(|i| spec[i]).collect())
}

/// Zero-filled full spectrum holding `y` at the selected positions.
pub fn scatter(y: &KSpaceData, mask: &SamplingMask) -> Vec<Complex64> {
    let mut spec = vec![ZERO; mask.shape().len()];
    for (i, v) in mask.indices().zip(&y.samples) {
        spec[i] = *v;
    }
    spec
}

/// `(P F) x`: unitary DFT of every frame restricted to the sampled frequencies.
pub fn fourier_forward(x: &Image, mask: &SamplingMask) -> Result<KSpaceData> {
    check_mask(x, mask)?;
    let fft = Fft2::new(x.height(), x.width());
    let spec = fft.forward_real(x.pixels());
    Ok(gather(&spec, mask))
}

/// `Re(Fᴴ Pᵀ y)`.
pub fn fourier_adjoint(y: &KSpaceData, mask: &SamplingMask) -> Result<Image> {
    y.check(mask)?;
    let shape = mask.shape();
    shape.require_pow2()?;
    let fft = Fft2::new(shape.height, shape.width);
    Ok(Image::with_pixels(shape, fft.inverse_real(scatter(y, mask))))
}

fn haar_rows(data: &mut [f64], w: usize, h_block: usize, w_block: usize, tmp: &mut [f64], inverse: bool) {
    let half = w_block / 2;
    for i in 0..h_block {
        let row = &mut data[i * w..i * w + w_block];
        if inverse {
            for j in 0..half {
                let (a, d) = (row[j], row[half + j]);
                tmp[2 * j] = (a + d) * FRAC_1_SQRT_2;
                tmp[2 * j + 1] = (a - d) * FRAC_1_SQRT_2;
            }
        } else {
            for j in 0..half {
                let (a, b) = (row[2 * j], row[2 * j + 1]);
                tmp[j] = (a + b) * FRAC_1_SQRT_2;
                tmp[half + j] = (a - b) * FRAC_1_SQRT_2;
            }
        }
        row.copy_from_slice(&tmp[..w_block]);
    }
}

fn haar_cols(data: &mut [f64], w: usize, h_block: usize, w_block: usize, tmp: &mut [f64], inverse: bool) {
    let half = h_block / 2;
    for j in 0..w_block {
        if inverse {
            for i in 0..half {
                let (a, d) = (data[i * w + j], data[(half + i) * w + j]);
                tmp[2 * i] = (a + d) * FRAC_1_SQRT_2;
                tmp[2 * i + 1] = (a - d) * FRAC_1_SQRT_2;
            }
        } else {
            for i in 0..half {
                let (a, b) = (data[2 * i * w + j], data[(2 * i + 1) * w + j]);
                tmp[i] = (a + b) * FRAC_1_SQRT_2;
                tmp[half + i] = (a - b) * FRAC_1_SQRT_2;
            }
        }
        for i in 0..h_block {
            data[i * w + j] = tmp[i];
        }
    }
}

fn haar_levels(shape: Shape) -> usize {
    shape.height.min(shape.width).trailing_zeros() as usize
}

/// In-place full-depth 2-D Haar analysis of every frame.
pub(crate) fn haar_analysis(shape: Shape, data: &mut [f64]) {
    let (h, w) = (shape.height, shape.width);
    let mut tmp = vec![0.0; h.max(w)];
    for plane in data.chunks_exact_mut(shape.plane()) {
        for level in 0..haar_levels(shape) {
            let (hb, wb) = (h >> level, w >> level);
            haar_rows(plane, w, hb, wb, &mut tmp, false);
            haar_cols(plane, w, hb, wb, &mut tmp, false);
        }
    }
}

/// In-place inverse of [`haar_analysis`] (equal to its transpose).
pub(crate) fn haar_synthesis(shape: Shape, data: &mut [f64]) {
    let (h, w) = (shape.height, shape.width);
    let mut tmp = vec![0.0; h.max(w)];
    for plane in data.chunks_exact_mut(shape.plane()) {
        for level in (0..haar_levels(shape)).rev() {
            let (hb, wb) = (h >> level, w >> level);
            haar_cols(plane, w, hb, wb, &mut tmp, true);
            haar_rows(plane, w, hb, wb, &mut tmp, true);
        }
    }
}

pub fn haar_forward(x: &Image) -> Result<WaveletCoeffs> {
    x.shape().require_pow2()?;
    let mut coeffs = x.pixels().to_vec();
    haar_analysis(x.shape(), &mut coeffs);
    Ok(WaveletCoeffs {
        shape: x.shape(),
        coeffs,
    })
}

pub fn haar_adjoint(c: &WaveletCoeffs) -> Result<Image> {
    c.shape.require_pow2()?;
    if c.coeffs.len() != c.shape.len() {
        return Err(Error::mismatch("wavelet coefficients", c.shape.len(), c.coeffs.len()));
    }
    let mut pixels = c.coeffs.clone();
    haar_synthesis(c.shape, &mut pixels);
    Ok(Image::with_pixels(c.shape, pixels))
}

/// `‖Ψx‖₁`.
pub fn wavelet_l1(x: &Image) -> Result<f64> {
    haar_forward(x).map(|c| c.l1())
}

/// Periodic forward differences written into `dx`, `dy`.
pub(crate) fn diff_into(shape: Shape, x: &[f64], dx: &mut [f64], dy: &mut [f64]) {
    let (h, w) = (shape.height, shape.width);
    for f in 0..shape.frames {
        let base = f * shape.plane();
        for i in 0..h {
            let down = if i + 1 == h { 0 } else { i + 1 };
            for j in 0..w {
                let right = if j + 1 == w { 0 } else { j + 1 };
                let p = base + i * w + j;
                let v = x[p];
                dx[p] = x[base + i * w + right] - v;
                dy[p] = x[base + down * w + j] - v;
            }
        }
    }
}

/// `Dᵀ(dx, dy)`, the negative periodic divergence, written into `out`.
pub(crate) fn diff_adjoint_into(shape: Shape, dx: &[f64], dy: &[f64], out: &mut [f64]) {
    let (h, w) = (shape.height, shape.width);
    for f in 0..shape.frames {
        let base = f * shape.plane();
        for i in 0..h {
            let up = if i == 0 { h - 1 } else { i - 1 };
            for j in 0..w {
                let left = if j == 0 { w - 1 } else { j - 1 };
                let p = base + i * w + j;
                out[p] = dx[base + i * w + left] - dx[p] + dy[base + up * w + j] - dy[p];
            }
        }
    }
}

pub fn diff_forward(x: &Image) -> GradientField {
    let shape = x.shape();
    let mut dx = vec![0.0; shape.len()];
    let mut dy = vec![0.0; shape.len()];
    diff_into(shape, x.pixels(), &mut dx, &mut dy);
    GradientField { shape, dx, dy }
}

pub fn diff_adjoint(g: &GradientField) -> Image {
    let mut out = vec![0.0; g.shape.len()];
    diff_adjoint_into(g.shape, &g.dx, &g.dy, &mut out);
    Image::with_pixels(g.shape, out)
}

/// Anisotropic total variation `Σᵢ ‖Dᵢx‖₁`.
pub fn tv_norm(x: &Image) -> f64 {
    diff_forward(x).l1()
}

/// Index of the frequency `-k` within the same frame.
pub(crate) fn mirror_index(shape: Shape, idx: usize) -> usize {
    let plane = shape.plane();
    let (f, rem) = (idx / plane, idx % plane);
    let (i, j) = (rem / shape.width, rem % shape.width);
    let mi = (shape.height - i) % shape.height;
    let mj = (shape.width - j) % shape.width;
    f * plane + mi * shape.width + mj
}

/// Fourier multiplier of a normal operator that is diagonal in the DFT basis.
///
/// For a real image `x`, `ΦᵀΦx = Re(Fᴴ M F x)` has the symmetrized multiplier
/// `(M(k) + M(-k)) / 2`; that is the symbol stored for each mask term.
#[derive(Debug, Clone)]
pub struct FourierSystem {
    shape: Shape,
    symbol: Vec<f64>,
    fft: Fft2,
}

impl FourierSystem {
    pub fn new(shape: Shape) -> Result<Self> {
        shape.require_pow2()?;
        Ok(Self {
            shape,
            symbol: vec![0.0; shape.len()],
            fft: Fft2::new(shape.height, shape.width),
        })
    }

    /// Adds `a I`.
    pub fn identity(mut self, a: f64) -> Self {
        for s in &mut self.symbol {
            *s += a;
        }
        self
    }

    /// Adds `c DᵀD` (periodic Laplacian symbol `4 sin²(πkₓ/W) + 4 sin²(πk_y/H)`).
    pub fn laplacian(mut self, c: f64) -> Self {
        if c == 0.0 {
            return self;
        }
        let (h, w) = (self.shape.height, self.shape.width);
        let sin2 = |k: usize, len: usize| {
            let s = math::sin(PI * k as f64 / len as f64);
            4.0 * s * s
        };
        let sy: Vec<f64> = (0..h).map(|i| sin2(i, h)).collect();
        let sx: Vec<f64> = (0..w).map(|j| sin2(j, w)).collect();
        for plane in self.symbol.chunks_exact_mut(h * w) {
            for i in 0..h {
                for j in 0..w {
                    plane[i * w + j] += c * (sy[i] + sx[j]);
                }
            }
        }
        self
    }

    /// Adds `weight ΦᵀΦ` for the partial Fourier operator of `mask`.
    pub fn gram(mut self, mask: &SamplingMask, weight: f64) -> Result<Self> {
        if mask.shape() != self.shape {
            return Err(Error::mismatch("gram mask", self.shape.len(), mask.shape().len()));
        }
        if weight == 0.0 {
            return Ok(self);
        }
        let sel = mask.selected();
        for (k, s) in self.symbol.iter_mut().enumerate() {
            let hits = sel[k] as u8 + sel[mirror_index(self.shape, k)] as u8;
            *s += weight * 0.5 * hits as f64;
        }
        Ok(self)
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn fft(&self) -> &Fft2 {
        &self.fft
    }

    pub fn symbol(&self) -> &[f64] {
        &self.symbol
    }

    fn check_nonsingular(&self) -> Result<()> {
        let max = self.symbol.iter().fold(0.0f64, |m, s| m.max(s.abs()));
        let min = self.symbol.iter().fold(f64::INFINITY, |m, s| m.min(*s));
        if !(min > 1e-13 * max.max(1e-300)) {
            return Err(Error::SingularSystem);
        }
        Ok(())
    }

    /// Exact solve given the spectrum of the right-hand side. The spectrum must
    /// be Hermitian-symmetric per frame (it is whenever it comes from a real image).
    pub fn solve_spectrum(&self, mut spec: Vec<Complex64>) -> Result<Vec<f64>> {
        self.check_nonsingular()?;
        for (v, s) in spec.iter_mut().zip(&self.symbol) {
            *v /= *s;
        }
        Ok(self.fft.inverse_real(spec))
    }

    pub fn solve(&self, rhs: &Image) -> Result<Image> {
        if rhs.shape() != self.shape {
            return Err(Error::mismatch("normal system rhs", self.shape.len(), rhs.len()));
        }
        let spec = self.fft.forward_real(rhs.pixels());
        Ok(Image::with_pixels(self.shape, self.solve_spectrum(spec)?))
    }

    /// Applies the operator (used for residual checks).
    pub fn apply(&self, x: &Image) -> Result<Image> {
        if x.shape() != self.shape {
            return Err(Error::mismatch("normal system input", self.shape.len(), x.len()));
        }
        let mut spec = self.fft.forward_real(x.pixels());
        for (v, s) in spec.iter_mut().zip(&self.symbol) {
            *v *= *s;
        }
        Ok(Image::with_pixels(self.shape, self.fft.inverse_real(spec)))
    }
}

/// Solves `(ΦᵀΦ + aI + cDᵀD) x = rhs` exactly by Fourier diagonalization.
pub fn solve_normal_system(rhs: &Image, a: f64, c: f64, mask: &SamplingMask) -> Result<Image> {
    check_mask(rhs, mask)?;
    FourierSystem::new(rhs.shape())?
        .identity(a)
        .laplacian(c)
        .gram(mask, 1.0)?
        .solve(rhs)
}

/// Shared transforms for the iterative solvers. Works on raw slices and keeps
/// the mirror table needed to symmetrize `Pᵀz` spectra.
#[derive(Debug, Clone)]
pub(crate) struct OperatorSet {
    pub shape: Shape,
    pub fft: Fft2,
    mirror: Vec<usize>,
}

impl OperatorSet {
    pub fn new(shape: Shape) -> Result<Self> {
        shape.require_pow2()?;
        Ok(Self {
            shape,
            fft: Fft2::new(shape.height, shape.width),
            mirror: (0..shape.len()).map(|k| mirror_index(shape, k)).collect(),
        })
    }

    pub fn n(&self) -> usize {
        self.shape.len()
    }

    /// Adds the spectrum of `Re(Fᴴ Pᵀ z)` scaled by `scale` into `spec`.
    pub fn add_adjoint_spectrum(&self, z: &[Complex64], mask: &SamplingMask, scale: f64, spec: &mut [Complex64]) {
        let half = 0.5 * scale;
        for (k, v) in mask.indices().zip(z) {
            spec[k] += v * half;
            spec[self.mirror[k]] += v.conj() * half;
        }
    }

    /// `Re(Fᴴ Pᵀ z)`.
    pub fn phi_adjoint(&self, z: &[Complex64], mask: &SamplingMask) -> Vec<f64> {
        let mut spec = vec![ZERO; self.n()];
        for (k, v) in mask.indices().zip(z) {
            spec[k] = *v;
        }
        self.fft.inverse_real(spec)
    }

    pub fn phi(&self, x: &[f64], mask: &SamplingMask) -> Vec<Complex64> {
        let spec = self.fft.forward_real(x);
        mask.indices().map(|i| spec[i]).collect()
    }

    pub fn psi(&self, x: &[f64]) -> Vec<f64> {
        let mut c = x.to_vec();
        haar_analysis(self.shape, &mut c);
        c
    }

    pub fn psi_adjoint(&self, c: &[f64]) -> Vec<f64> {
        let mut x = c.to_vec();
        haar_synthesis(self.shape, &mut x);
        x
    }

    /// Stacked gradient `[dx; dy]` of length `2n`.
    pub fn grad(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n();
        let mut g = vec![0.0; 2 * n];
        let (dx, dy) = g.split_at_mut(n);
        diff_into(self.shape, x, dx, dy);
        g
    }

    pub fn grad_adjoint(&self, g: &[f64]) -> Vec<f64> {
        let n = self.n();
        let mut out = vec![0.0; n];
        diff_adjoint_into(self.shape, &g[..n], &g[n..], &mut out);
        out
    }

    /// `(‖Ψx‖₁, TV(x))`.
    pub fn norms(&self, x: &[f64]) -> (f64, f64) {
        (math::norm1(&self.psi(x)), math::norm1(&self.grad(x)))
    }
}

/// Half the squared residual `½‖Φx − b‖²` for real `x`.
pub fn fidelity(x: &Image, mask: &SamplingMask, b: &KSpaceData) -> Result<f64> {
    let ax = fourier_forward(x, mask)?;
    b.check(mask)?;
    Ok(0.5
        * ax.samples
            .iter()
            .zip(&b.samples)
            .map(|(a, c)| (a - c).norm_sqr())
            .sum::<f64>())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_image(shape: Shape, rng: &mut ChaCha8Rng) -> Image {
        Image::from_pixels(shape, (0..shape.len()).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    fn random_mask(shape: Shape, p: f64, rng: &mut ChaCha8Rng) -> SamplingMask {
        SamplingMask::from_selected(shape, (0..shape.len()).map(|_| rng.random_bool(p)).collect()).unwrap()
    }

    #[test]
    fn zero_image_maps_to_zero_samples() {
        let shape = Shape::new(8, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mask = random_mask(shape, 0.5, &mut rng);
        let y = fourier_forward(&Image::zeros(shape), &mask).unwrap();
        assert!(y.samples.iter().all(|c| c.re == 0.0 && c.im == 0.0));
    }

    #[test]
    fn constant_image_has_only_dc() {
        let shape = Shape::new(8, 8);
        let c = 0.3;
        let y = fourier_forward(&Image::constant(shape, c), &SamplingMask::full(shape)).unwrap();
        assert!((y.samples[0].re - c * 8.0).abs() < 1e-12);
        assert!(y.samples[1..].iter().all(|v| v.norm_sqr() < 1e-24));
    }

    #[test]
    fn zero_data_adjoint_is_zero() {
        let shape = Shape::new(8, 8);
        let mask = SamplingMask::full(shape);
        let x = fourier_adjoint(&KSpaceData::zeros(mask.m()), &mask).unwrap();
        assert!(x.pixels().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn full_mask_gram_is_identity() {
        let shape = Shape::new(8, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = random_image(shape, &mut rng);
        let mask = SamplingMask::full(shape);
        let back = fourier_adjoint(&fourier_forward(&x, &mask).unwrap(), &mask).unwrap();
        for (a, b) in back.pixels().iter().zip(x.pixels()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let mask = SamplingMask::full(Shape::new(8, 8));
        assert!(matches!(
            fourier_forward(&Image::zeros(Shape::new(4, 4)), &mask),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(fourier_adjoint(&KSpaceData::zeros(3), &mask).is_err());
    }

    #[test]
    fn haar_of_constant_has_one_coefficient() {
        let c = haar_forward(&Image::constant(Shape::new(16, 16), 0.5)).unwrap();
        assert!((c.coeffs[0] - 0.5 * 16.0).abs() < 1e-12);
        assert!(c.coeffs[1..].iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn haar_round_trip_and_parseval() {
        let shape = Shape::stack(16, 16, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = random_image(shape, &mut rng);
        let c = haar_forward(&x).unwrap();
        assert!((math::norm2(&c.coeffs) - x.norm()).abs() < 1e-10);
        let back = haar_adjoint(&c).unwrap();
        for (a, b) in back.pixels().iter().zip(x.pixels()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn haar_rejects_non_power_of_two() {
        let x = Image::zeros(Shape::new(6, 8));
        assert_eq!(
            haar_forward(&x).unwrap_err(),
            Error::NotPowerOfTwo { height: 6, width: 8 }
        );
    }

    #[test]
    fn diff_of_constant_is_zero() {
        let g = diff_forward(&Image::constant(Shape::new(8, 4), 2.5));
        assert_eq!(g.l1(), 0.0);
    }

    #[test]
    fn checkerboard_tv_is_eight() {
        let x = Image::from_pixels(Shape::new(2, 2), vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        assert_eq!(tv_norm(&x), 8.0);
    }

    #[test]
    fn identity_system_returns_rhs() {
        let shape = Shape::new(8, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let rhs = random_image(shape, &mut rng);
        let x = solve_normal_system(&rhs, 1.0, 0.0, &SamplingMask::empty(shape)).unwrap();
        for (a, b) in x.pixels().iter().zip(rhs.pixels()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn singular_system_is_rejected() {
        let shape = Shape::new(4, 4);
        let rhs = Image::zeros(shape);
        assert_eq!(
            solve_normal_system(&rhs, 0.0, 0.0, &SamplingMask::empty(shape)).unwrap_err(),
            Error::SingularSystem
        );
        // DᵀD alone annihilates constants
        assert_eq!(
            solve_normal_system(&rhs, 0.0, 1.0, &SamplingMask::empty(shape)).unwrap_err(),
            Error::SingularSystem
        );
    }

    #[test]
    fn mirror_index_is_involution() {
        let shape = Shape::stack(4, 8, 2);
        for k in 0..shape.len() {
            assert_eq!(mirror_index(shape, mirror_index(shape, k)), k);
        }
        assert_eq!(mirror_index(shape, 0), 0);
        assert_eq!(mirror_index(shape, 32), 32);
    }
}
