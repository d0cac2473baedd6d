//! Core data types: images, sampling masks, k-space data and datasets.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::math;

/// Geometry of an image stack: `frames` planes of `height x width` pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Shape {
    pub height: usize,
    pub width: usize,
    pub frames: usize,
}

impl Shape {
    pub const fn new(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            frames: 1,
        }
    }

    pub const fn stack(height: usize, width: usize, frames: usize) -> Self {
        Self {
            height,
            width,
            frames,
        }
    }

    /// Pixels per frame.
    pub const fn plane(&self) -> usize {
        self.height * self.width
    }

    /// Total pixel count over all frames.
    pub const fn len(&self) -> usize {
        self.height * self.width * self.frames
    }

    pub const fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_pow2(&self) -> bool {
        self.height.is_power_of_two() && self.width.is_power_of_two()
    }

    pub(crate) fn require_pow2(&self) -> Result<()> {
        if self.is_pow2() {
            Ok(())
        } else {
            Err(Error::NotPowerOfTwo {
                height: self.height,
                width: self.width,
            })
        }
    }
}

/// Real-valued pixel stack, row-major within each frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    shape: Shape,
    pixels: Vec<f64>,
}

impl Image {
    pub fn zeros(shape: Shape) -> Self {
        Self {
            shape,
            pixels: vec![0.0; shape.len()],
        }
    }

    pub fn constant(shape: Shape, value: f64) -> Self {
        Self {
            shape,
            pixels: vec![value; shape.len()],
        }
    }

    pub fn from_pixels(shape: Shape, pixels: Vec<f64>) -> Result<Self> {
        if pixels.len() != shape.len() {
            return Err(Error::mismatch("image pixels", shape.len(), pixels.len()));
        }
        if pixels.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "pixels",
                reason: "all pixel values must be finite",
            });
        }
        Ok(Self { shape, pixels })
    }

    /// Stacks single-frame images of equal size into one multi-frame image.
    pub fn stack(frames: &[Image]) -> Result<Self> {
        let first = frames.first().ok_or(Error::InvalidParameter {
            name: "frames",
            reason: "cannot stack zero images",
        })?;
        let (h, w) = (first.shape.height, first.shape.width);
        let mut pixels = Vec::with_capacity(h * w * frames.len());
        let mut count = 0;
        for f in frames {
            if f.shape.height != h || f.shape.width != w {
                return Err(Error::mismatch("stacked frame", h * w, f.shape.plane()));
            }
            pixels.extend_from_slice(&f.pixels);
            count += f.shape.frames;
        }
        Ok(Self {
            shape: Shape::stack(h, w, count),
            pixels,
        })
    }

    /// Splits a stack back into single-frame images.
    pub fn frames(&self) -> Vec<Image> {
        let single = Shape::new(self.shape.height, self.shape.width);
        self.pixels
            .chunks_exact(self.shape.plane())
            .map(|p| Image {
                shape: single,
                pixels: p.to_vec(),
            })
            .collect()
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn height(&self) -> usize {
        self.shape.height
    }

    pub fn width(&self) -> usize {
        self.shape.width
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [f64] {
        &mut self.pixels
    }

    pub fn into_pixels(self) -> Vec<f64> {
        self.pixels
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn get(&self, frame: usize, row: usize, col: usize) -> f64 {
        self.pixels[frame * self.shape.plane() + row * self.shape.width + col]
    }

    pub fn norm(&self) -> f64 {
        math::norm2(&self.pixels)
    }

    pub(crate) fn with_pixels(shape: Shape, pixels: Vec<f64>) -> Self {
        debug_assert_eq!(shape.len(), pixels.len());
        Self { shape, pixels }
    }

    pub(crate) fn same_shape(&self, other: &Image, context: &'static str) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::mismatch(context, self.len(), other.len()));
        }
        Ok(())
    }
}

/// Boolean k-space mask, one plane per frame. `true` marks a sampled frequency.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SamplingMask {
    shape: Shape,
    selected: Vec<bool>,
    m: usize,
}

impl SamplingMask {
    pub fn from_selected(shape: Shape, selected: Vec<bool>) -> Result<Self> {
        if selected.len() != shape.len() {
            return Err(Error::mismatch("mask", shape.len(), selected.len()));
        }
        let m = selected.iter().filter(|&&s| s).count();
        Ok(Self { shape, selected, m })
    }

    pub fn full(shape: Shape) -> Self {
        Self {
            shape,
            selected: vec![true; shape.len()],
            m: shape.len(),
        }
    }

    pub fn empty(shape: Shape) -> Self {
        Self {
            shape,
            selected: vec![false; shape.len()],
            m: 0,
        }
    }

    /// The same plane mask repeated over `frames` frames.
    pub fn repeat(&self, frames: usize) -> Self {
        let plane = self.shape.plane();
        let base = &self.selected[..plane];
        let mut selected = Vec::with_capacity(plane * frames);
        for _ in 0..frames {
            selected.extend_from_slice(base);
        }
        let shape = Shape::stack(self.shape.height, self.shape.width, frames);
        let m = selected.iter().filter(|&&s| s).count();
        Self { shape, selected, m }
    }

    /// Stacks single-frame masks.
    pub fn stack(masks: &[SamplingMask]) -> Result<Self> {
        let first = masks.first().ok_or(Error::InvalidParameter {
            name: "masks",
            reason: "cannot stack zero masks",
        })?;
        let (h, w) = (first.shape.height, first.shape.width);
        let mut selected = Vec::new();
        let mut frames = 0;
        for mk in masks {
            if mk.shape.height != h || mk.shape.width != w {
                return Err(Error::mismatch("stacked mask", h * w, mk.shape.plane()));
            }
            selected.extend_from_slice(&mk.selected);
            frames += mk.shape.frames;
        }
        Self::from_selected(Shape::stack(h, w, frames), selected)
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn selected(&self) -> &[bool] {
        &self.selected
    }

    /// Number of sampled locations.
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn is_selected(&self, idx: usize) -> bool {
        self.selected[idx]
    }

    /// Row-major indices of sampled locations; this is the order of
    /// [`KSpaceData`] samples.
    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.selected
            .iter()
            .enumerate()
            .filter_map(|(i, &s)| s.then_some(i))
    }

    /// True when no sampled location of `self` is sampled by `other`.
    pub fn is_disjoint(&self, other: &SamplingMask) -> bool {
        self.selected
            .iter()
            .zip(&other.selected)
            .all(|(a, b)| !(*a && *b))
    }
}

/// Complex k-space samples in the row-major order of the selected mask entries.
#[derive(Debug, Clone, PartialEq)]
pub struct KSpaceData {
    pub samples: Vec<Complex64>,
}

impl KSpaceData {
    pub fn new(samples: Vec<Complex64>) -> Self {
        Self { samples }
    }

    pub fn zeros(m: usize) -> Self {
        Self {
            samples: vec![Complex64::new(0.0, 0.0); m],
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.samples.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        math::sqrt(self.norm_sqr())
    }

    /// Real inner product `Re <self, other>`.
    pub fn inner(&self, other: &KSpaceData) -> f64 {
        self.samples
            .iter()
            .zip(&other.samples)
            .map(|(a, b)| a.re * b.re + a.im * b.im)
            .sum()
    }

    /// Samples of `self` (taken on `mask`) at the locations of `sub`, which
    /// must be a subset of `mask`.
    pub fn restrict(&self, mask: &SamplingMask, sub: &SamplingMask) -> Result<KSpaceData> {
        self.check(mask)?;
        if sub.shape() != mask.shape() {
            return Err(Error::mismatch("sub-mask", mask.shape().len(), sub.shape().len()));
        }
        if sub.indices().any(|i| !mask.is_selected(i)) {
            return Err(Error::InvalidParameter {
                name: "sub",
                reason: "must select a subset of the sampled locations",
            });
        }
        let samples = mask
            .indices()
            .zip(&self.samples)
            .filter(|(i, _)| sub.is_selected(*i))
            .map(|(_, c)| *c)
            .collect();
        Ok(KSpaceData::new(samples))
    }

    pub(crate) fn check(&self, mask: &SamplingMask) -> Result<()> {
        if self.samples.len() != mask.m() {
            return Err(Error::mismatch("k-space data", mask.m(), self.samples.len()));
        }
        Ok(())
    }
}

/// Full-depth orthonormal Haar coefficients (Mallat layout per frame).
#[derive(Debug, Clone, PartialEq)]
pub struct WaveletCoeffs {
    pub shape: Shape,
    pub coeffs: Vec<f64>,
}

impl WaveletCoeffs {
    pub fn l1(&self) -> f64 {
        math::norm1(&self.coeffs)
    }
}

/// Horizontal and vertical periodic forward differences.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientField {
    pub shape: Shape,
    pub dx: Vec<f64>,
    pub dy: Vec<f64>,
}

impl GradientField {
    /// Anisotropic TV: sum of absolute horizontal and vertical differences.
    pub fn l1(&self) -> f64 {
        math::norm1(&self.dx) + math::norm1(&self.dy)
    }

    pub fn inner(&self, other: &GradientField) -> f64 {
        math::dot(&self.dx, &other.dx) + math::dot(&self.dy, &other.dy)
    }
}

/// Training / validation split of the observed data for one image stack.
///
/// `mask_val` may equal `mask_tr` (single-image experiments reuse the same
/// measurements at both levels).
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub mask_tr: SamplingMask,
    pub b_tr: KSpaceData,
    pub mask_val: SamplingMask,
    pub b_val: KSpaceData,
    pub ground_truth: Option<Image>,
}

impl Dataset {
    pub fn new(
        mask_tr: SamplingMask,
        b_tr: KSpaceData,
        mask_val: SamplingMask,
        b_val: KSpaceData,
        ground_truth: Option<Image>,
    ) -> Result<Self> {
        if mask_tr.shape() != mask_val.shape() {
            return Err(Error::mismatch(
                "validation mask",
                mask_tr.shape().len(),
                mask_val.shape().len(),
            ));
        }
        b_tr.check(&mask_tr)?;
        b_val.check(&mask_val)?;
        if let Some(gt) = &ground_truth {
            if gt.shape() != mask_tr.shape() {
                return Err(Error::mismatch("ground truth", mask_tr.shape().len(), gt.len()));
            }
        }
        mask_tr.shape().require_pow2()?;
        Ok(Self {
            mask_tr,
            b_tr,
            mask_val,
            b_val,
            ground_truth,
        })
    }

    /// Dataset whose validation data aliases the training data.
    pub fn aliased(mask: SamplingMask, b: KSpaceData, ground_truth: Option<Image>) -> Result<Self> {
        Self::new(mask.clone(), b.clone(), mask, b, ground_truth)
    }

    pub fn shape(&self) -> Shape {
        self.mask_tr.shape()
    }
}
