//! Pseudo-radial k-space masks and k-space hold-out splits.
//!
//! Masks are stored in DFT order (DC at index 0). Rays are drawn in centred
//! coordinates and shifted back, so they emanate from the DC bin.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::image::{SamplingMask, Shape};
use crate::math;

/// Default number of radial rays: `max(8, round(rate·min(H, W)/2))`.
pub fn default_lines(height: usize, width: usize, rate: f64) -> usize {
    let l = math::round(rate * height.min(width) as f64 / 2.0) as usize;
    l.max(8)
}

/// Target sample count `round(rate·n)`.
pub fn target_count(n: usize, rate: f64) -> usize {
    (math::round(rate * n as f64) as usize).min(n)
}

fn check_rate(rate: f64) -> Result<()> {
    if !(rate > 0.0 && rate <= 1.0) {
        return Err(Error::InvalidParameter {
            name: "rate",
            reason: "sampling rate must lie in (0, 1]",
        });
    }
    Ok(())
}

/// Integer points of the segment from `(r0, c0)` to `(r1, c1)`, endpoints included.
pub fn bresenham(r0: i64, c0: i64, r1: i64, c1: i64) -> Vec<(i64, i64)> {
    let (dr, dc) = ((r1 - r0).abs(), -(c1 - c0).abs());
    let (sr, sc) = (if r0 < r1 { 1 } else { -1 }, if c0 < c1 { 1 } else { -1 });
    let (mut r, mut c, mut err) = (r0, c0, dr + dc);
    let mut out = Vec::new();
    loop {
        out.push((r, c));
        if r == r1 && c == c1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dc {
            err += dc;
            r += sr;
        }
        if e2 <= dr {
            err += dr;
            c += sc;
        }
    }
    out
}

/// Single-frame pseudo-radial mask with exactly `round(rate·n)` samples.
///
/// `lines` rays leave the centre at seeded-random angles and run to the
/// border. Random single frequencies are then added, or random ray points
/// removed, until the target count is met. DC is always kept.
pub fn make_radial_mask(height: usize, width: usize, rate: f64, lines: usize, seed: u64) -> Result<SamplingMask> {
    check_rate(rate)?;
    let shape = Shape::new(height, width);
    shape.require_pow2()?;
    let n = shape.len();
    let target = target_count(n, rate).max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (ch, cw) = ((height / 2) as i64, (width / 2) as i64);
    // centred (row, col) -> DFT index
    let to_dft = |r: i64, c: i64| -> usize {
        let i = (r - ch).rem_euclid(height as i64) as usize;
        let j = (c - cw).rem_euclid(width as i64) as usize;
        i * width + j
    };

    let mut selected = vec![false; n];
    selected[0] = true;
    let radius = (height.max(width)) as f64;
    for _ in 0..lines {
        let angle = rng.random_range(0.0..2.0 * PI);
        // Walk out far, then clip to the grid so the ray ends on the border.
        let (er, ec) = (
            ch as f64 - radius * math::sin(angle),
            cw as f64 + radius * math::cos(angle),
        );
        for (r, c) in bresenham(ch, cw, math::round(er) as i64, math::round(ec) as i64) {
            if r < 0 || c < 0 || r >= height as i64 || c >= width as i64 {
                break;
            }
            selected[to_dft(r, c)] = true;
        }
    }

    let count = selected.iter().filter(|&&s| s).count();
    if count < target {
        let mut free: Vec<usize> = (0..n).filter(|&i| !selected[i]).collect();
        free.shuffle(&mut rng);
        for &i in &free[..target - count] {
            selected[i] = true;
        }
    } else if count > target {
        let mut on: Vec<usize> = (1..n).filter(|&i| selected[i]).collect();
        on.shuffle(&mut rng);
        for &i in &on[..count - target] {
            selected[i] = false;
        }
    }
    SamplingMask::from_selected(shape, selected)
}

/// Randomly partitions the sampled locations of `mask` into a training mask
/// holding `round(train_fraction·m)` of them (DC always training) and a
/// disjoint hold-out mask with the rest.
pub fn split_mask(mask: &SamplingMask, train_fraction: f64, seed: u64) -> Result<(SamplingMask, SamplingMask)> {
    if !(train_fraction > 0.0 && train_fraction <= 1.0) {
        return Err(Error::InvalidParameter {
            name: "train_fraction",
            reason: "must lie in (0, 1]",
        });
    }
    let shape = mask.shape();
    let plane = shape.plane();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tr = vec![false; shape.len()];
    let mut val = vec![false; shape.len()];
    for f in 0..shape.frames {
        let base = f * plane;
        let mut idx: Vec<usize> = (base..base + plane).filter(|&i| mask.is_selected(i)).collect();
        let keep = target_count(idx.len(), train_fraction);
        if mask.is_selected(base) {
            idx.retain(|&i| i != base);
            tr[base] = true;
            idx.shuffle(&mut rng);
            let rest = keep.saturating_sub(1);
            for (k, &i) in idx.iter().enumerate() {
                if k < rest {
                    tr[i] = true;
                } else {
                    val[i] = true;
                }
            }
        } else {
            idx.shuffle(&mut rng);
            for (k, &i) in idx.iter().enumerate() {
                if k < keep {
                    tr[i] = true;
                } else {
                    val[i] = true;
                }
            }
        }
    }
    Ok((
        SamplingMask::from_selected(shape, tr)?,
        SamplingMask::from_selected(shape, val)?,
    ))
}
