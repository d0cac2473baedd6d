//! Tree-structured Parzen estimator over the two coordinates of `u = log₁₀ λ`.
//!
//! After `n_startup` uniform trials (the same draws random search makes for
//! the same seed) each trial splits the history at the `γ`-quantile of the
//! errors, fits independent per-coordinate truncated Gaussian mixtures `l`
//! (good) and `g` (bad), draws `n_candidates` points from `l` and evaluates
//! the one maximizing `l/g`.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::image::Dataset;
use crate::lower::AdmmConfig;
use crate::math;
use crate::search::{Objective, PenalizedObjective, SearchSpace, SearchTrace};
use crate::Clock;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TpeConfig {
    pub gamma: f64,
    pub n_startup: usize,
    pub n_candidates: usize,
}

impl Default for TpeConfig {
    fn default() -> Self {
        Self {
            gamma: 0.25,
            n_startup: 10,
            n_candidates: 24,
        }
    }
}

/// One-dimensional truncated Gaussian mixture on `[lo, hi]` with equal
/// weights. The first component is a wide prior centred on the interval.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Parzen {
    lo: f64,
    hi: f64,
    mus: Vec<f64>,
    sigmas: Vec<f64>,
}

impl Parzen {
    /// Bandwidth of each point is the larger gap to its sorted neighbours
    /// (interval ends count as neighbours), clipped to `[(hi−lo)/min(100, 1+n), hi−lo]`.
    pub(crate) fn fit(points: &[f64], lo: f64, hi: f64) -> Self {
        let width = hi - lo;
        let mut mus = Vec::with_capacity(points.len() + 1);
        let mut sigmas = Vec::with_capacity(points.len() + 1);
        mus.push(0.5 * (lo + hi));
        sigmas.push(width);
        let mut sorted: Vec<f64> = points.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let min_sigma = width / (100.0f64).min(1.0 + n as f64);
        for (i, &p) in sorted.iter().enumerate() {
            let left = if i == 0 { lo } else { sorted[i - 1] };
            let right = if i + 1 == n { hi } else { sorted[i + 1] };
            let s = (p - left).max(right - p).clamp(min_sigma, width);
            mus.push(p);
            sigmas.push(s);
        }
        Self { lo, hi, mus, sigmas }
    }

    fn degenerate(&self) -> bool {
        self.hi <= self.lo
    }

    pub(crate) fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        if self.degenerate() {
            return self.lo;
        }
        let k = rng.random_range(0..self.mus.len());
        for _ in 0..64 {
            let z: f64 = rng.sample(StandardNormal);
            let v = self.mus[k] + self.sigmas[k] * z;
            if v >= self.lo && v <= self.hi {
                return v;
            }
        }
        self.mus[k].clamp(self.lo, self.hi)
    }

    pub(crate) fn log_pdf(&self, x: f64) -> f64 {
        if self.degenerate() {
            return 0.0;
        }
        let w = 1.0 / self.mus.len() as f64;
        let mut total = 0.0;
        for (&m, &s) in self.mus.iter().zip(&self.sigmas) {
            let mass = normal_cdf((self.hi - m) / s) - normal_cdf((self.lo - m) / s);
            let z = (x - m) / s;
            let pdf = math::exp(-0.5 * z * z) / (s * math::sqrt(2.0 * core::f64::consts::PI));
            total += w * pdf / mass.max(1e-300);
        }
        math::ln(total.max(1e-300))
    }
}

fn normal_cdf(z: f64) -> f64 {
    0.5 * (1.0 + math::erf(z / core::f64::consts::SQRT_2))
}

/// TPE with the given objective.
pub fn tpe_search_with(obj: &dyn Objective, space: &SearchSpace, cfg: &TpeConfig) -> Result<SearchTrace> {
    space.validate()?;
    if space.budget < cfg.n_startup {
        return Err(Error::BudgetTooSmall {
            budget: space.budget,
            startup: cfg.n_startup,
        });
    }
    if !(cfg.gamma > 0.0 && cfg.gamma < 1.0) || cfg.n_candidates == 0 {
        return Err(Error::InvalidParameter {
            name: "tpe",
            reason: "need 0 < gamma < 1 and at least one candidate",
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(space.seed);
    let startup: Vec<[f64; 2]> = (0..cfg.n_startup).map(|_| space.sample(&mut rng)).collect();
    let mut trace = SearchTrace::new();
    trace.extend(&startup, obj.evaluate_batch(&startup))?;

    while trace.trials.len() < space.budget {
        let u = propose(&trace, space, cfg, &mut rng);
        trace.push(u, obj.evaluate(u)?);
    }
    Ok(trace)
}

fn propose(trace: &SearchTrace, space: &SearchSpace, cfg: &TpeConfig, rng: &mut ChaCha8Rng) -> [f64; 2] {
    if trace.trials.is_empty() {
        return space.sample(rng);
    }
    let mut order: Vec<usize> = (0..trace.trials.len()).collect();
    // stable on ties: earlier trials rank first
    order.sort_by(|&a, &b| trace.trials[a].val_err.total_cmp(&trace.trials[b].val_err));
    let n = order.len();
    let n_good = (math::ceil(cfg.gamma * n as f64) as usize).clamp(1, n);
    let coord = |idx: &[usize], c: usize| -> Vec<f64> { idx.iter().map(|&i| trace.trials[i].u[c]).collect() };
    let (good, bad) = order.split_at(n_good);
    let l = [
        Parzen::fit(&coord(good, 0), space.lo, space.hi),
        Parzen::fit(&coord(good, 1), space.lo, space.hi),
    ];
    let g = [
        Parzen::fit(&coord(bad, 0), space.lo, space.hi),
        Parzen::fit(&coord(bad, 1), space.lo, space.hi),
    ];
    let mut best = ([space.lo; 2], f64::NEG_INFINITY);
    for _ in 0..cfg.n_candidates {
        let u = [l[0].sample(rng), l[1].sample(rng)];
        let score = l[0].log_pdf(u[0]) + l[1].log_pdf(u[1]) - g[0].log_pdf(u[0]) - g[1].log_pdf(u[1]);
        if score > best.1 {
            best = (u, score);
        }
    }
    best.0
}

pub fn tpe_search(data: &Dataset, space: &SearchSpace, cfg: &AdmmConfig, clock: &dyn Clock) -> Result<SearchTrace> {
    tpe_search_with(&PenalizedObjective { data, cfg: cfg.clone(), clock }, space, &TpeConfig::default())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::search::{random_search_with, Evaluation, FnObjective};

    fn bowl(c: f64) -> FnObjective<impl Fn([f64; 2]) -> Result<Evaluation>> {
        FnObjective(move |u: [f64; 2]| Ok(Evaluation::score((u[0] - c).powi(2) + (u[1] - c).powi(2))))
    }

    #[test]
    fn startup_only_matches_random_search() {
        let space = SearchSpace::new(-7.0, 7.0, 2, 10, 99).unwrap();
        let a = tpe_search_with(&bowl(1.0), &space, &TpeConfig::default()).unwrap();
        let b = random_search_with(&bowl(1.0), &space).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn budget_below_startup() {
        let space = SearchSpace::new(-1.0, 1.0, 2, 9, 0).unwrap();
        assert!(matches!(
            tpe_search_with(&bowl(0.0), &space, &TpeConfig::default()),
            Err(Error::BudgetTooSmall { budget: 9, startup: 10 })
        ));
    }

    #[test]
    fn finds_bowl_minimum() {
        for seed in 0..5 {
            let space = SearchSpace::new(-9.0, -3.0, 2, 50, seed).unwrap();
            let c = -5.2;
            let t = tpe_search_with(&bowl(c), &space, &TpeConfig::default()).unwrap();
            let u = t.trials[t.best.index].u;
            let d = math::sqrt((u[0] - c).powi(2) + (u[1] - c).powi(2));
            assert!(d < 0.5, "seed {seed}: best {u:?}");
        }
    }

    #[test]
    fn reproducible() {
        let space = SearchSpace::new(-3.0, 3.0, 2, 40, 4).unwrap();
        let a = tpe_search_with(&bowl(0.5), &space, &TpeConfig::default()).unwrap();
        let b = tpe_search_with(&bowl(0.5), &space, &TpeConfig::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn parzen_density_integrates_to_one() {
        let p = Parzen::fit(&[0.1, 0.15, 0.8], 0.0, 1.0);
        let n = 20_000;
        let h = 1.0 / n as f64;
        let total: f64 = (0..n).map(|i| math::exp(p.log_pdf((i as f64 + 0.5) * h)) * h).sum();
        assert!((total - 1.0).abs() < 1e-6, "{total}");
    }

    #[test]
    fn parzen_samples_in_bounds() {
        let p = Parzen::fit(&[-0.99, 0.99], -1.0, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!((0..1000).map(|_| p.sample(&mut rng)).all(|v| (-1.0..=1.0).contains(&v)));
    }
}
