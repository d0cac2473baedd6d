#![allow(dead_code)]

use bfdca_core::operators::fourier_forward;
use bfdca_core::{Dataset, Image, KSpaceData, SamplingMask, Shape};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_image(shape: Shape, rng: &mut ChaCha8Rng) -> Image {
    let px = (0..shape.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
    Image::from_pixels(shape, px).unwrap()
}

pub fn random_unit_image(shape: Shape, rng: &mut ChaCha8Rng) -> Image {
    let px = (0..shape.len()).map(|_| rng.random_range(0.0..1.0)).collect();
    Image::from_pixels(shape, px).unwrap()
}

/// Random mask keeping each location with probability `p`; DC always kept.
pub fn random_mask(shape: Shape, p: f64, rng: &mut ChaCha8Rng) -> SamplingMask {
    let mut sel: Vec<bool> = (0..shape.len()).map(|_| rng.random_bool(p)).collect();
    for f in 0..shape.frames {
        sel[f * shape.plane()] = true;
    }
    SamplingMask::from_selected(shape, sel).unwrap()
}

pub fn random_samples(m: usize, rng: &mut ChaCha8Rng) -> KSpaceData {
    KSpaceData::new(
        (0..m)
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect(),
    )
}

/// Dataset from a random ground truth plus complex Gaussian-like noise,
/// validation aliasing training.
pub fn noisy_dataset(shape: Shape, p: f64, noise: f64, seed: u64) -> (Dataset, Image) {
    let mut r = rng(seed);
    let x = random_unit_image(shape, &mut r);
    let mask = random_mask(shape, p, &mut r);
    let mut b = fourier_forward(&x, &mask).unwrap();
    for s in &mut b.samples {
        *s += Complex64::new(noise * r.random_range(-1.0..1.0), noise * r.random_range(-1.0..1.0));
    }
    (Dataset::aliased(mask, b, Some(x.clone())).unwrap(), x)
}

/// Dense unitary 2-D DFT matrix, row-major pixel and frequency order.
pub fn dense_dft(h: usize, w: usize) -> Vec<Vec<Complex64>> {
    let n = h * w;
    let scale = 1.0 / (n as f64).sqrt();
    (0..n)
        .map(|k| {
            let (ku, kv) = (k / w, k % w);
            (0..n)
                .map(|p| {
                    let (pr, pc) = (p / w, p % w);
                    let ang = -2.0 * std::f64::consts::PI * ((ku * pr) as f64 / h as f64 + (kv * pc) as f64 / w as f64);
                    Complex64::from_polar(scale, ang)
                })
                .collect()
        })
        .collect()
}

pub fn matmul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let (n, k, p) = (a.len(), b.len(), b[0].len());
    (0..n)
        .map(|i| (0..p).map(|j| (0..k).map(|l| a[i][l] * b[l][j]).sum()).collect())
        .collect()
}

pub fn matvec(a: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    a.iter().map(|row| row.iter().zip(x).map(|(p, q)| p * q).sum()).collect()
}

/// Gaussian elimination with partial pivoting.
pub fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for c in 0..n {
        let piv = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
        a.swap(c, piv);
        b.swap(c, piv);
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            for k in c..n {
                a[r][k] -= f * a[c][k];
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}

/// Dense periodic forward-difference matrices `(Dx, Dy)` on an `h x w` grid.
pub fn dense_diff(h: usize, w: usize) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let n = h * w;
    let mut dx = vec![vec![0.0; n]; n];
    let mut dy = vec![vec![0.0; n]; n];
    for i in 0..h {
        for j in 0..w {
            let p = i * w + j;
            dx[p][i * w + (j + 1) % w] += 1.0;
            dx[p][p] -= 1.0;
            dy[p][((i + 1) % h) * w + j] += 1.0;
            dy[p][p] -= 1.0;
        }
    }
    (dx, dy)
}

pub fn transpose(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    (0..a[0].len()).map(|j| a.iter().map(|r| r[j]).collect()).collect()
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt()
}

/// `Φᵀ(Φx − b)` through the public operators.
pub fn fidelity_grad(x: &Image, mask: &SamplingMask, b: &KSpaceData) -> Vec<f64> {
    let mut r = fourier_forward(x, mask).unwrap();
    for (a, c) in r.samples.iter_mut().zip(&b.samples) {
        *a -= c;
    }
    bfdca_core::operators::fourier_adjoint(&r, mask).unwrap().into_pixels()
}

/// Smallest `‖g + a₁Ψᵀp + a₂Dᵀq‖` over `p ∈ ∂‖Ψx‖₁`, `q ∈ ∂‖Dx‖₁` (entries
/// below `zero_tol` free in `[−1, 1]`), by projected gradient.
pub fn subgradient_distance(x: &Image, g: &[f64], a: [f64; 2], zero_tol: f64, steps: usize) -> f64 {
    use bfdca_core::operators::{diff_adjoint, diff_forward, haar_adjoint, haar_forward};
    use bfdca_core::{GradientField, WaveletCoeffs};
    let shape = x.shape();
    let n = shape.len();
    let psi = haar_forward(x).unwrap().coeffs;
    let d = diff_forward(x);
    let dx: Vec<f64> = d.dx.iter().chain(&d.dy).copied().collect();
    let fix = |v: &[f64]| -> Vec<Option<f64>> {
        v.iter()
            .map(|&s| if s.abs() > zero_tol { Some(s.signum()) } else { None })
            .collect()
    };
    let (fp, fq) = (fix(&psi), fix(&dx));
    let proj = |v: &mut [f64], f: &[Option<f64>]| {
        for (a, s) in v.iter_mut().zip(f) {
            *a = s.unwrap_or(a.clamp(-1.0, 1.0));
        }
    };
    let resid = |p: &[f64], q: &[f64]| -> Vec<f64> {
        let tp = haar_adjoint(&WaveletCoeffs { shape, coeffs: p.to_vec() }).unwrap();
        let tq = diff_adjoint(&GradientField { shape, dx: q[..n].to_vec(), dy: q[n..].to_vec() });
        (0..n).map(|i| g[i] + a[0] * tp.pixels()[i] + a[1] * tq.pixels()[i]).collect()
    };
    let mut p: Vec<f64> = fp.iter().map(|s| s.unwrap_or(0.0)).collect();
    let mut q: Vec<f64> = fq.iter().map(|s| s.unwrap_or(0.0)).collect();
    let lip = a[0] * a[0] + 8.0 * a[1] * a[1];
    if lip > 0.0 {
        for _ in 0..steps {
            let r = resid(&p, &q);
            let img = Image::from_pixels(shape, r).unwrap();
            let gp = haar_forward(&img).unwrap().coeffs;
            let gq = diff_forward(&img);
            for i in 0..n {
                p[i] -= a[0] * gp[i] / lip;
                q[i] -= a[1] * gq.dx[i] / lip;
                q[n + i] -= a[1] * gq.dy[i] / lip;
            }
            proj(&mut p, &fp);
            proj(&mut q, &fq);
        }
    }
    norm(&resid(&p, &q))
}

/// One Haar step on the leading `hb x wb` block, as a dense matrix on the
/// row-major `h x w` grid.
pub fn haar_level(h: usize, w: usize, hb: usize, wb: usize) -> Vec<Vec<f64>> {
    let n = h * w;
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut rows = vec![vec![0.0; n]; n];
    let mut cols = vec![vec![0.0; n]; n];
    for i in 0..h {
        for j in 0..w {
            let p = i * w + j;
            if i < hb && j < wb {
                let (jh, ih) = (wb / 2, hb / 2);
                // rows: averages first, then details
                if j < jh {
                    rows[p][i * w + 2 * j] = s;
                    rows[p][i * w + 2 * j + 1] = s;
                } else {
                    rows[p][i * w + 2 * (j - jh)] = s;
                    rows[p][i * w + 2 * (j - jh) + 1] = -s;
                }
                if i < ih {
                    cols[p][2 * i * w + j] = s;
                    cols[p][(2 * i + 1) * w + j] = s;
                } else {
                    cols[p][2 * (i - ih) * w + j] = s;
                    cols[p][(2 * (i - ih) + 1) * w + j] = -s;
                }
            } else {
                rows[p][p] = 1.0;
                cols[p][p] = 1.0;
            }
        }
    }
    matmul(&cols, &rows)
}


/// Dense 2-D Haar analysis matrix for an `h x h` image.
pub fn dense_haar(h: usize) -> Vec<Vec<f64>> {
    let mut m = haar_level(h, h, h, h);
    let mut b = h / 2;
    while b > 1 {
        m = matmul(&haar_level(h, h, b, b), &m);
        b /= 2;
    }
    m
}

/// Blocky ground truth, noisy samples, and a disjoint validation mask.
pub fn held_out_dataset(shape: Shape, p: f64, noise: f64, seed: u64) -> Dataset {
    let mut r = rng(seed);
    let px = (0..shape.len())
        .map(|i| {
            let (row, col) = ((i % shape.plane()) / shape.width, i % shape.width);
            if (row * 2 / shape.height + col * 2 / shape.width) % 2 == 0 { 0.8 } else { 0.2 }
        })
        .collect();
    let x = Image::from_pixels(shape, px).unwrap();
    let mask = random_mask(shape, p, &mut r);
    let (tr, val) = bfdca_core::mask::split_mask(&mask, 0.7, seed).unwrap();
    let sample = |m: &SamplingMask, r: &mut ChaCha8Rng| {
        let mut b = fourier_forward(&x, m).unwrap();
        for s in &mut b.samples {
            *s += Complex64::new(noise * r.random_range(-1.0..1.0), noise * r.random_range(-1.0..1.0));
        }
        b
    };
    let b_tr = sample(&tr, &mut r);
    let b_val = sample(&val, &mut r);
    Dataset::new(tr, b_tr, val, b_val, Some(x)).unwrap()
}
