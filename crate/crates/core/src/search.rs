//! Grid and random search over `u = log₁₀ λ` for the penalized model.
//!
//! Searches are written against the [`Objective`] trait so that the caller
//! decides how trials run (serially here, on a thread pool in the CLI) and
//! tests can plug in synthetic objectives.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::image::{Dataset, Image};
use crate::lower::{AdmmConfig, Hyperparams};
use crate::math;
use crate::metrics;
use crate::penalized::solve_penalized;
use crate::Clock;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchSpace {
    /// Bounds on both coordinates of `u = log₁₀ λ`.
    pub lo: f64,
    pub hi: f64,
    /// Points per axis for grid search.
    pub grid_points: usize,
    /// Trial count for random search and TPE.
    pub budget: usize,
    pub seed: u64,
}

impl SearchSpace {
    pub fn new(lo: f64, hi: f64, grid_points: usize, budget: usize, seed: u64) -> Result<Self> {
        let s = Self {
            lo,
            hi,
            grid_points,
            budget,
            seed,
        };
        s.validate()?;
        Ok(s)
    }

    /// `lo == hi` is accepted so that a degenerate grid can be expressed.
    pub fn validate(&self) -> Result<()> {
        if !(self.lo.is_finite() && self.hi.is_finite() && self.lo <= self.hi) {
            return Err(Error::InvalidParameter {
                name: "lo/hi",
                reason: "need finite bounds with lo <= hi",
            });
        }
        if self.budget == 0 {
            return Err(Error::InvalidParameter {
                name: "budget",
                reason: "must be at least one",
            });
        }
        Ok(())
    }

    pub(crate) fn sample(&self, rng: &mut ChaCha8Rng) -> [f64; 2] {
        [self.draw(rng), self.draw(rng)]
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        if self.lo == self.hi {
            self.lo
        } else {
            rng.random_range(self.lo..self.hi)
        }
    }
}

/// `λ = 10^u`, coordinatewise.
pub fn to_lambda(u: [f64; 2]) -> [f64; 2] {
    [math::powf(10.0, u[0]), math::powf(10.0, u[1])]
}

/// Outcome of one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    /// `½‖Φ_val x(λ) − b_val‖²`, or any score to minimize.
    pub val_err: f64,
    pub x: Option<Image>,
    pub rlne: Option<f64>,
    pub psnr: Option<f64>,
    /// Time spent on this trial.
    pub seconds: f64,
    pub converged: bool,
    pub iterations: usize,
}

impl Evaluation {
    /// A bare score, for synthetic objectives.
    pub fn score(val_err: f64) -> Self {
        Self {
            val_err,
            x: None,
            rlne: None,
            psnr: None,
            seconds: 0.0,
            converged: true,
            iterations: 0,
        }
    }
}

/// Something that scores points `u`.
pub trait Objective {
    fn evaluate(&self, u: [f64; 2]) -> Result<Evaluation>;

    /// Scores independent points. Results come back in input order.
    fn evaluate_batch(&self, us: &[[f64; 2]]) -> Vec<Result<Evaluation>> {
        us.iter().map(|&u| self.evaluate(u)).collect()
    }
}

/// Wraps a closure as an [`Objective`].
pub struct FnObjective<F>(pub F);

impl<F: Fn([f64; 2]) -> Result<Evaluation>> Objective for FnObjective<F> {
    fn evaluate(&self, u: [f64; 2]) -> Result<Evaluation> {
        (self.0)(u)
    }
}

/// Solves the penalized model on the training data and scores the result on
/// the validation data.
pub fn evaluate_penalized(data: &Dataset, u: [f64; 2], cfg: &AdmmConfig, clock: &dyn Clock) -> Result<Evaluation> {
    let t0 = clock.now();
    let lam = to_lambda(u);
    let sol = solve_penalized(&data.mask_tr, &data.b_tr, &Hyperparams::weights(lam[0], lam[1])?, cfg)?;
    let val_err = crate::operators::fidelity(&sol.x, &data.mask_val, &data.b_val)?;
    let (rlne, psnr) = match &data.ground_truth {
        Some(gt) => (metrics::rlne(&sol.x, gt).ok(), metrics::psnr(&sol.x, gt).ok()),
        None => (None, None),
    };
    Ok(Evaluation {
        val_err,
        rlne,
        psnr,
        seconds: clock.now() - t0,
        converged: sol.converged,
        iterations: sol.iterations,
        x: Some(sol.x),
    })
}

/// Serial penalized-model objective.
pub struct PenalizedObjective<'a> {
    pub data: &'a Dataset,
    pub cfg: AdmmConfig,
    pub clock: &'a dyn Clock,
}

impl Objective for PenalizedObjective<'_> {
    fn evaluate(&self, u: [f64; 2]) -> Result<Evaluation> {
        evaluate_penalized(self.data, u, &self.cfg, self.clock)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub index: usize,
    pub u: [f64; 2],
    pub lambda: [f64; 2],
    pub val_err: f64,
    /// Sum of trial times up to and including this one.
    pub wall_time: f64,
    pub rlne: Option<f64>,
    pub psnr: Option<f64>,
    pub converged: bool,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BestTrial {
    pub index: usize,
    pub lambda: [f64; 2],
    pub val_err: f64,
    pub x: Option<Image>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchTrace {
    pub trials: Vec<TrialRecord>,
    pub best: BestTrial,
}

impl SearchTrace {
    pub(crate) fn new() -> Self {
        Self {
            trials: Vec::new(),
            best: BestTrial {
                index: 0,
                lambda: [0.0; 2],
                val_err: f64::INFINITY,
                x: None,
            },
        }
    }

    /// Appends a trial. Ties keep the earlier trial as best.
    pub(crate) fn push(&mut self, u: [f64; 2], ev: Evaluation) {
        let index = self.trials.len();
        let elapsed = self.trials.last().map_or(0.0, |t| t.wall_time) + ev.seconds;
        let lambda = to_lambda(u);
        if self.trials.is_empty() || ev.val_err < self.best.val_err {
            self.best = BestTrial {
                index,
                lambda,
                val_err: ev.val_err,
                x: ev.x,
            };
        }
        self.trials.push(TrialRecord {
            index,
            u,
            lambda,
            val_err: ev.val_err,
            wall_time: elapsed,
            rlne: ev.rlne,
            psnr: ev.psnr,
            converged: ev.converged,
            iterations: ev.iterations,
        });
    }

    pub(crate) fn extend(&mut self, us: &[[f64; 2]], evs: Vec<Result<Evaluation>>) -> Result<()> {
        for (u, ev) in us.iter().zip(evs) {
            self.push(*u, ev?);
        }
        Ok(())
    }

    /// Running minimum of the validation error.
    pub fn best_so_far(&self) -> Vec<f64> {
        let mut acc = f64::INFINITY;
        self.trials
            .iter()
            .map(|t| {
                acc = acc.min(t.val_err);
                acc
            })
            .collect()
    }
}

/// The `grid_points²` grid points, row-major in `u₁`.
pub fn grid_points(space: &SearchSpace) -> Result<Vec<[f64; 2]>> {
    space.validate()?;
    let g = space.grid_points;
    if g < 2 {
        return Err(Error::InvalidParameter {
            name: "grid_points",
            reason: "must be at least two",
        });
    }
    let step = (space.hi - space.lo) / (g - 1) as f64;
    let axis: Vec<f64> = (0..g).map(|i| space.lo + step * i as f64).collect();
    Ok(axis.iter().flat_map(|&a| axis.iter().map(move |&b| [a, b])).collect())
}

/// The `budget` uniform draws of random search.
pub fn random_points(space: &SearchSpace) -> Result<Vec<[f64; 2]>> {
    space.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(space.seed);
    Ok((0..space.budget).map(|_| space.sample(&mut rng)).collect())
}

pub fn grid_search_with(obj: &dyn Objective, space: &SearchSpace) -> Result<SearchTrace> {
    run_points(obj, &grid_points(space)?)
}

pub fn random_search_with(obj: &dyn Objective, space: &SearchSpace) -> Result<SearchTrace> {
    run_points(obj, &random_points(space)?)
}

fn run_points(obj: &dyn Objective, us: &[[f64; 2]]) -> Result<SearchTrace> {
    let mut trace = SearchTrace::new();
    trace.extend(us, obj.evaluate_batch(us))?;
    Ok(trace)
}

pub fn grid_search(data: &Dataset, space: &SearchSpace, cfg: &AdmmConfig, clock: &dyn Clock) -> Result<SearchTrace> {
    grid_search_with(&PenalizedObjective { data, cfg: cfg.clone(), clock }, space)
}

pub fn random_search(data: &Dataset, space: &SearchSpace, cfg: &AdmmConfig, clock: &dyn Clock) -> Result<SearchTrace> {
    random_search_with(&PenalizedObjective { data, cfg: cfg.clone(), clock }, space)
}
