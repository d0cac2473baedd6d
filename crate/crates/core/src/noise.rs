//! Corruption of k-space samples.
//!
//! `min` and `max` are taken over the clean samples, separately for the real
//! and imaginary parts. Noise is additive, `b = Φx⋆ + ε`.

use alloc::vec::Vec;

use num_complex::Complex64;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::image::KSpaceData;
use crate::math;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NoiseKind {
    /// `round(level·m)` entries get `ε` set to `min` or `max` at random.
    SaltPepper,
    /// Every entry gets `ε` drawn uniformly from `[min, max]`, scaled by `level`.
    UniformRandom,
    /// Complex Gaussian with per-part std `level·max|clean|`.
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub level: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn none() -> Self {
        Self {
            kind: NoiseKind::Gaussian,
            level: 0.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.level >= 0.0 && self.level.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "noise level",
                reason: "must be nonnegative and finite",
            });
        }
        if self.kind == NoiseKind::SaltPepper && self.level > 1.0 {
            return Err(Error::InvalidParameter {
                name: "noise level",
                reason: "salt-and-pepper fraction must lie in [0, 1]",
            });
        }
        Ok(())
    }
}

/// Number of corrupted entries for salt-and-pepper noise.
pub fn salt_pepper_count(m: usize, level: f64) -> usize {
    (math::round(level * m as f64) as usize).min(m)
}

struct Range {
    lo: f64,
    hi: f64,
}

fn range(values: impl Iterator<Item = f64>) -> Range {
    let mut r = Range {
        lo: f64::INFINITY,
        hi: f64::NEG_INFINITY,
    };
    for v in values {
        r.lo = r.lo.min(v);
        r.hi = r.hi.max(v);
    }
    r
}

pub fn add_noise(clean: &KSpaceData, spec: &NoiseSpec) -> Result<KSpaceData> {
    spec.validate()?;
    let mut out = clean.samples.clone();
    let m = out.len();
    if m == 0 || spec.level == 0.0 {
        return Ok(KSpaceData::new(out));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let re = range(clean.samples.iter().map(|c| c.re));
    let im = range(clean.samples.iter().map(|c| c.im));
    match spec.kind {
        NoiseKind::SaltPepper => {
            let count = salt_pepper_count(m, spec.level);
            let mut picked: Vec<usize> = sample(&mut rng, m, count).into_vec();
            picked.sort_unstable();
            for i in picked {
                let er = if rng.random_bool(0.5) { re.lo } else { re.hi };
                let ei = if rng.random_bool(0.5) { im.lo } else { im.hi };
                out[i] += Complex64::new(er, ei);
            }
        }
        NoiseKind::UniformRandom => {
            for v in &mut out {
                let er = re.lo + (re.hi - re.lo) * rng.random::<f64>();
                let ei = im.lo + (im.hi - im.lo) * rng.random::<f64>();
                *v += Complex64::new(er, ei) * spec.level;
            }
        }
        NoiseKind::Gaussian => {
            let peak = clean
                .samples
                .iter()
                .fold(0.0f64, |a, c| a.max(math::sqrt(c.norm_sqr())));
            let std = spec.level * peak;
            for v in &mut out {
                let gr: f64 = rng.sample(StandardNormal);
                let gi: f64 = rng.sample(StandardNormal);
                *v += Complex64::new(gr, gi) * std;
            }
        }
    }
    Ok(KSpaceData::new(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn clean(m: usize) -> KSpaceData {
        KSpaceData::new(
            (0..m)
                .map(|i| Complex64::new(math::sin(i as f64), math::cos(0.3 * i as f64)))
                .collect(),
        )
    }

    #[test]
    fn zero_level_is_identity() {
        let c = clean(50);
        for kind in [NoiseKind::SaltPepper, NoiseKind::Gaussian, NoiseKind::UniformRandom] {
            let s = NoiseSpec { kind, level: 0.0, seed: 1 };
            assert_eq!(add_noise(&c, &s).unwrap(), c);
        }
    }

    #[test]
    fn salt_pepper_touches_exact_count() {
        let c = clean(2335);
        let s = NoiseSpec {
            kind: NoiseKind::SaltPepper,
            level: 0.01,
            seed: 4,
        };
        let noisy = add_noise(&c, &s).unwrap();
        let changed = noisy.samples.iter().zip(&c.samples).filter(|(a, b)| a != b).count();
        assert_eq!(changed, 23);
    }

    #[test]
    fn seeded() {
        let c = clean(100);
        let s = NoiseSpec {
            kind: NoiseKind::Gaussian,
            level: 0.1,
            seed: 9,
        };
        assert_eq!(add_noise(&c, &s).unwrap(), add_noise(&c, &s).unwrap());
        let t = NoiseSpec { seed: 10, ..s };
        assert_ne!(add_noise(&c, &s).unwrap(), add_noise(&c, &t).unwrap());
    }

    #[test]
    fn invalid_level() {
        let c = KSpaceData::new(vec![Complex64::new(1.0, 0.0)]);
        let s = NoiseSpec {
            kind: NoiseKind::SaltPepper,
            level: 1.5,
            seed: 0,
        };
        assert!(add_noise(&c, &s).is_err());
    }
}
