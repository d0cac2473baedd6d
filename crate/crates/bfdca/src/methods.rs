//! Runs one selection or restoration method on a dataset.

use bfdca_core::penalized::solve_penalized;
use bfdca_core::search::{
    evaluate_penalized, grid_search_with, random_search_with, Evaluation, Objective, SearchTrace,
};
use bfdca_core::tpe::{tpe_search_with, TpeConfig};
use bfdca_core::{metrics, run_bfdca, AdmmConfig, Clock, Dataset, Hyperparams, Image};
use rayon::prelude::*;

use crate::config::{ExperimentConfig, Method};
use crate::error::Result;

/// Penalized-model objective whose batches run on the rayon pool. Results
/// come back in input order, so traces do not depend on scheduling.
pub struct ParallelObjective<'a> {
    pub data: &'a Dataset,
    pub cfg: AdmmConfig,
    pub clock: &'a (dyn Clock + Sync),
}

impl Objective for ParallelObjective<'_> {
    fn evaluate(&self, u: [f64; 2]) -> bfdca_core::Result<Evaluation> {
        evaluate_penalized(self.data, u, &self.cfg, self.clock)
    }

    fn evaluate_batch(&self, us: &[[f64; 2]]) -> Vec<bfdca_core::Result<Evaluation>> {
        us.par_iter().map(|&u| self.evaluate(u)).collect()
    }
}

/// One line of a per-iteration or per-trial trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub k: usize,
    pub time_s: f64,
    pub rlne: Option<f64>,
    pub psnr: Option<f64>,
    pub val_err: f64,
    pub eta: Option<f64>,
    pub delta: Option<f64>,
    pub alpha: Option<f64>,
    pub rho: Option<f64>,
    /// `λ` for penalized methods, `r` for BF-DCA.
    pub param: [f64; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub x: Image,
    pub rows: Vec<TraceRow>,
    pub time_s: f64,
    pub val_err: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Penalized weights equivalent to the selection: the search winner, the
    /// fixed input, or the lower-level multipliers at BF-DCA's final radii.
    pub weights: [f64; 2],
    /// BF-DCA's final radii.
    pub radii: Option<[f64; 2]>,
}

pub fn run_method(cfg: &ExperimentConfig, seed: u64, data: &Dataset, clock: &(dyn Clock + Sync)) -> Result<Outcome> {
    match cfg.method {
        Method::Bfdca => run_bfdca_method(cfg, data, clock),
        Method::Gs | Method::Rs | Method::Tpe => run_search(cfg, seed, data, clock),
        Method::RestoreFixed => run_fixed(cfg, data, clock),
    }
}

fn run_bfdca_method(cfg: &ExperimentConfig, data: &Dataset, clock: &(dyn Clock + Sync)) -> Result<Outcome> {
    let t = run_bfdca(data, &cfg.bfdca()?, clock)?;
    if t.small_radius_steps > 0 {
        eprintln!(
            "warning: {} of {} iterates had a radius below {:e}",
            t.small_radius_steps,
            t.iterations(),
            bfdca_core::driver::SMALL_RADIUS
        );
    }
    if t.lower_warnings > 0 {
        eprintln!("warning: {} lower-level solves hit their iteration cap", t.lower_warnings);
    }
    let rows = t
        .records
        .iter()
        .map(|r| TraceRow {
            k: r.k,
            time_s: r.wall_time,
            rlne: r.rlne,
            psnr: r.psnr,
            val_err: r.val_err,
            eta: Some(r.eta),
            delta: Some(r.delta),
            alpha: Some(r.alpha),
            rho: Some(r.rho),
            param: r.r,
        })
        .collect::<Vec<_>>();
    let last = rows.last().expect("at least one outer iteration");
    Ok(Outcome {
        time_s: last.time_s,
        val_err: last.val_err,
        iterations: t.iterations(),
        converged: t.converged,
        weights: t.lower.xi,
        radii: Some(t.z.r),
        x: t.z.x,
        rows,
    })
}

fn run_search(cfg: &ExperimentConfig, seed: u64, data: &Dataset, clock: &(dyn Clock + Sync)) -> Result<Outcome> {
    let mut space = cfg.space()?;
    space.seed = seed;
    let obj = ParallelObjective {
        data,
        cfg: cfg.admm(),
        clock,
    };
    let trace: SearchTrace = match cfg.method {
        Method::Gs => grid_search_with(&obj, &space)?,
        Method::Rs => random_search_with(&obj, &space)?,
        _ => tpe_search_with(&obj, &space, &TpeConfig::default())?,
    };
    let rows = trace
        .trials
        .iter()
        .map(|t| TraceRow {
            k: t.index,
            time_s: t.wall_time,
            rlne: t.rlne,
            psnr: t.psnr,
            val_err: t.val_err,
            eta: None,
            delta: None,
            alpha: None,
            rho: None,
            param: t.lambda,
        })
        .collect::<Vec<_>>();
    let best = trace.best;
    let x = match best.x {
        Some(x) => x,
        None => solve_penalized(
            &data.mask_tr,
            &data.b_tr,
            &Hyperparams::weights(best.lambda[0], best.lambda[1])?,
            &cfg.admm(),
        )?
        .x,
    };
    Ok(Outcome {
        time_s: rows.last().map_or(0.0, |r| r.time_s),
        val_err: best.val_err,
        iterations: rows.len(),
        converged: trace.trials.iter().all(|t| t.converged),
        weights: best.lambda,
        radii: None,
        x,
        rows,
    })
}

fn run_fixed(cfg: &ExperimentConfig, data: &Dataset, clock: &(dyn Clock + Sync)) -> Result<Outcome> {
    let t0 = clock.now();
    let lam = Hyperparams::weights(cfg.lambda[0], cfg.lambda[1])?;
    let sol = solve_penalized(&data.mask_tr, &data.b_tr, &lam, &cfg.admm())?;
    let time_s = clock.now() - t0;
    let val_err = bfdca_core::operators::fidelity(&sol.x, &data.mask_val, &data.b_val)?;
    let (rlne, psnr) = match &data.ground_truth {
        Some(gt) => (metrics::rlne(&sol.x, gt).ok(), metrics::psnr(&sol.x, gt).ok()),
        None => (None, None),
    };
    Ok(Outcome {
        rows: vec![TraceRow {
            k: 0,
            time_s,
            rlne,
            psnr,
            val_err,
            eta: None,
            delta: None,
            alpha: None,
            rho: None,
            param: cfg.lambda,
        }],
        time_s,
        val_err,
        iterations: sol.iterations,
        converged: sol.converged,
        weights: cfg.lambda,
        radii: None,
        x: sol.x,
    })
}
