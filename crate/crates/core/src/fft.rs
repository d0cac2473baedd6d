//! Radix-2 complex FFT and the unitary 2-D transform used by the Fourier
//! operators. Only power-of-two lengths are supported.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

use crate::math;

/// Precomputed twiddles and bit-reversal permutation for one length.
#[derive(Debug, Clone)]
pub struct Radix2 {
    len: usize,
    twiddles: Vec<Complex64>,
    rev: Vec<usize>,
}

impl Radix2 {
    pub fn new(len: usize) -> Self {
        assert!(len.is_power_of_two(), "FFT length must be a power of two");
        let bits = len.trailing_zeros();
        let rev = (0..len)
            .map(|i| if bits == 0 { 0 } else { i.reverse_bits() >> (usize::BITS - bits) })
            .collect();
        let twiddles = (0..len / 2)
            .map(|k| {
                let ang = -2.0 * PI * k as f64 / len as f64;
                Complex64::new(math::cos(ang), math::sin(ang))
            })
            .collect();
        Self { len, twiddles, rev }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Unnormalized in-place transform. `inverse` flips the exponent sign.
    pub fn process(&self, buf: &mut [Complex64], inverse: bool) {
        let n = self.len;
        debug_assert_eq!(buf.len(), n);
        for i in 0..n {
            let j = self.rev[i];
            if i < j {
                buf.swap(i, j);
            }
        }
        let mut size = 2;
        while size <= n {
            let half = size / 2;
            let stride = n / size;
            for start in (0..n).step_by(size) {
                for k in 0..half {
                    let mut w = self.twiddles[k * stride];
                    if inverse {
                        w = w.conj();
                    }
                    let a = buf[start + k];
                    let b = buf[start + k + half] * w;
                    buf[start + k] = a + b;
                    buf[start + k + half] = a - b;
                }
            }
            size <<= 1;
        }
    }
}

/// Unitary 2-D DFT over a stack of `frames` row-major `height x width` planes.
#[derive(Debug, Clone)]
pub struct Fft2 {
    height: usize,
    width: usize,
    rows: Radix2,
    cols: Radix2,
}

impl Fft2 {
    pub fn new(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            rows: Radix2::new(width),
            cols: Radix2::new(height),
        }
    }

    fn plane(&self, data: &mut [Complex64], inverse: bool) {
        let (h, w) = (self.height, self.width);
        for row in data.chunks_exact_mut(w) {
            self.rows.process(row, inverse);
        }
        let mut col = vec![Complex64::new(0.0, 0.0); h];
        for j in 0..w {
            for i in 0..h {
                col[i] = data[i * w + j];
            }
            self.cols.process(&mut col, inverse);
            for i in 0..h {
                data[i * w + j] = col[i];
            }
        }
        let scale = 1.0 / math::sqrt((h * w) as f64);
        for v in data.iter_mut() {
            *v *= scale;
        }
    }

    /// Forward unitary transform of every frame in place.
    pub fn forward(&self, data: &mut [Complex64]) {
        for plane in data.chunks_exact_mut(self.height * self.width) {
            self.plane(plane, false);
        }
    }

    /// Inverse unitary transform of every frame in place.
    pub fn inverse(&self, data: &mut [Complex64]) {
        for plane in data.chunks_exact_mut(self.height * self.width) {
            self.plane(plane, true);
        }
    }

    /// Forward transform of a real stack.
    pub fn forward_real(&self, x: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward(&mut buf);
        buf
    }

    /// Inverse transform keeping only the real part.
    pub fn inverse_real(&self, mut spec: Vec<Complex64>) -> Vec<f64> {
        self.inverse(&mut spec);
        spec.into_iter().map(|c| c.re).collect()
    }
}
