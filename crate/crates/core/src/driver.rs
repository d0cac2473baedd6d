//! Outer BF-DCA loop: lower-level solve, penalty subproblem, parameter updates.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::image::{Dataset, Image};
use crate::lower::{solve_lower_warm, AdmmConfig, Hyperparams, LowerSolution};
use crate::metrics;
use crate::penalty::{eval_energy, eval_eta, solve_subproblem, InnerState, OuterPoint, PenaltyConfig, PenaltyState};
use crate::Clock;

#[derive(Debug, Clone, PartialEq)]
pub struct BfdcaConfig {
    pub c_alpha: f64,
    pub c_rho: f64,
    pub delta_alpha: f64,
    pub delta_rho: f64,
    pub alpha0: f64,
    pub alpha_max: f64,
    pub rho0: f64,
    pub rho_max: f64,
    pub tol: f64,
    pub max_outer: usize,
    /// Initial radii; the initial image is zero unless `x0` is set.
    pub r0: [f64; 2],
    pub x0: Option<Image>,
    pub lower: AdmmConfig,
    pub penalty: PenaltyConfig,
    /// Reuse ADMM states between outer iterations.
    pub warm_start: bool,
    /// Store every `xᵏ` in the trace (needed to recompute energies afterwards).
    pub keep_iterates: bool,
}

impl Default for BfdcaConfig {
    fn default() -> Self {
        Self {
            c_alpha: 1.0,
            c_rho: 1.0,
            delta_alpha: 0.005,
            delta_rho: 0.0,
            alpha0: 0.0,
            alpha_max: 10.0,
            rho0: 0.001,
            rho_max: 0.001,
            tol: 1e-3,
            max_outer: 500,
            r0: [0.1, 0.5],
            x0: None,
            lower: AdmmConfig::default(),
            penalty: PenaltyConfig::default(),
            warm_start: true,
            keep_iterates: false,
        }
    }
}

impl BfdcaConfig {
    pub fn validate(&self) -> Result<()> {
        let pos = [
            ("c_alpha", self.c_alpha),
            ("c_rho", self.c_rho),
            ("delta_alpha", self.delta_alpha),
            ("rho0", self.rho0),
            ("tol", self.tol),
        ];
        for (name, v) in pos {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter {
                    name,
                    reason: "must be positive and finite",
                });
            }
        }
        if !(self.delta_rho >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "delta_rho",
                reason: "must be nonnegative",
            });
        }
        if !(self.alpha0 >= 0.0 && self.alpha_max > self.alpha0) {
            return Err(Error::InvalidParameter {
                name: "alpha_max",
                reason: "need alpha_max > alpha0 >= 0",
            });
        }
        if !(self.rho_max >= self.rho0) {
            return Err(Error::InvalidParameter {
                name: "rho_max",
                reason: "need rho_max >= rho0",
            });
        }
        if self.max_outer == 0 {
            return Err(Error::InvalidParameter {
                name: "max_outer",
                reason: "must be at least one",
            });
        }
        if !(self.r0[0] >= 0.0 && self.r0[1] >= 0.0) {
            return Err(Error::NegativeHyperparameter("r0"));
        }
        self.lower.validate()
    }
}

/// `α` update: grow by `δ_α` (capped) when `max(α, 1/η) < c_α/Δ`.
///
/// `1/0` is `+∞`, so a feasible iterate never grows `α`. A zero step with
/// positive `η` reads `c_α/0 = +∞` and does grow it.
pub fn update_alpha(alpha: f64, delta: f64, eta: f64, cfg: &BfdcaConfig) -> f64 {
    let inv_eta = if eta > 0.0 { 1.0 / eta } else { f64::INFINITY };
    let bound = if delta > 0.0 { cfg.c_alpha / delta } else { f64::INFINITY };
    let lhs = alpha.max(inv_eta);
    let grow = if lhs.is_infinite() { false } else { lhs < bound };
    if grow {
        (alpha + cfg.delta_alpha).min(cfg.alpha_max)
    } else {
        alpha
    }
}

/// `ρ` update: grow by `δ_ρ` (capped) when `Δ > c_ρ`.
pub fn update_rho(rho: f64, delta: f64, cfg: &BfdcaConfig) -> f64 {
    if delta > cfg.c_rho {
        (rho + cfg.delta_rho).min(cfg.rho_max)
    } else {
        rho
    }
}

/// One outer iteration `k → k+1`.
#[derive(Debug, Clone, PartialEq)]
pub struct OuterRecord {
    pub k: usize,
    /// `r^{k+1}`.
    pub r: [f64; 2],
    /// `x^{k+1}` when iterates are kept.
    pub x: Option<Image>,
    pub alpha: f64,
    pub rho: f64,
    pub eta: f64,
    pub delta: f64,
    pub phi_value: f64,
    /// `h(rᵏ)`.
    pub lower_value: f64,
    /// `ξᵏ`.
    pub xi: [f64; 2],
    /// Validation fidelity at `x^{k+1}`.
    pub val_err: f64,
    pub wall_time: f64,
    pub rlne: Option<f64>,
    pub psnr: Option<f64>,
    pub residual_norm: f64,
    pub residual_target: f64,
    pub inner_iterations: usize,
    pub lower_iterations: usize,
    pub lower_converged: bool,
    /// `E_{α_k}(z^{k+1}, zᵏ, ξᵏ)`.
    pub energy: f64,
    /// `E_{α_k}(zᵏ, zᵏ⁻¹, ξᵏ⁻¹)`; `None` for `k = 0`.
    pub energy_prev: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OuterTrace {
    pub records: Vec<OuterRecord>,
    pub z0: OuterPoint,
    /// Last iterate.
    pub z: OuterPoint,
    /// Lower-level solution at the last iterate's radii.
    pub lower: LowerSolution,
    /// Stopping test `max(Δ, η) < tol` met.
    pub converged: bool,
    /// Iterate with the smallest `max(Δ, η)` seen.
    pub best: OuterPoint,
    /// Lower-level solves that hit their iteration cap.
    pub lower_warnings: usize,
    /// Iterates with `min(r) < SMALL_RADIUS`. The convergence theory assumes
    /// radii bounded away from zero; they are not projected, only counted.
    pub small_radius_steps: usize,
}

/// Radius below which an iterate is counted in [`OuterTrace::small_radius_steps`].
pub const SMALL_RADIUS: f64 = 1e-8;

impl OuterTrace {
    pub fn iterations(&self) -> usize {
        self.records.len()
    }
}

/// Runs the outer loop on `data`. Wall times come from `clock`.
pub fn run_bfdca(data: &Dataset, cfg: &BfdcaConfig, clock: &dyn Clock) -> Result<OuterTrace> {
    run_bfdca_with(data, cfg, clock, |_| {})
}

/// As [`run_bfdca`], calling `observe` after every outer iteration.
pub fn run_bfdca_with(
    data: &Dataset,
    cfg: &BfdcaConfig,
    clock: &dyn Clock,
    mut observe: impl FnMut(&OuterRecord),
) -> Result<OuterTrace> {
    cfg.validate()?;
    let shape = data.shape();
    let x0 = match &cfg.x0 {
        Some(x) if x.shape() == shape => x.clone(),
        Some(x) => return Err(Error::mismatch("initial image", shape.len(), x.len())),
        None => Image::zeros(shape),
    };
    let t0 = clock.now();
    let z0 = OuterPoint::new(x0, cfg.r0)?;
    let mut z = z0.clone();
    let mut alpha = cfg.alpha0;
    let mut rho = cfg.rho0;
    let mut prev_step: Option<f64> = None;
    // (zᵏ⁻¹, ξᵏ⁻¹, h(rᵏ⁻¹)) for the energy comparison
    let mut previous: Option<(OuterPoint, [f64; 2], f64)> = None;
    let mut warm_lower = None;
    let mut warm_inner: Option<InnerState> = None;
    let mut records = Vec::new();
    let mut best = (f64::INFINITY, z.clone());
    let mut lower_warnings = 0;
    let mut small_radius_steps = 0;
    let mut converged = false;

    let mut lower = solve_lower_warm(data, &Hyperparams::radii(z.r[0], z.r[1])?, &cfg.lower, None)?;
    for k in 0..cfg.max_outer {
        if k > 0 {
            lower = solve_lower_warm(
                data,
                &Hyperparams::radii(z.r[0], z.r[1])?,
                &cfg.lower,
                warm_lower.as_ref(),
            )?;
        }
        if !lower.converged {
            lower_warnings += 1;
        }
        if cfg.warm_start {
            warm_lower = Some(lower.state.clone());
        }
        let lower_iterations = lower.iterations;
        let lower_converged = lower.converged;
        let state = PenaltyState {
            z_prev: z.clone(),
            lower,
            alpha,
            rho,
            prev_step,
        };
        let sub = solve_subproblem(&state, data, &cfg.penalty, warm_inner.as_ref())?;
        if cfg.warm_start {
            warm_inner = Some(sub.inner.clone());
        }
        let z_next = sub.z_next.clone();
        let delta = z_next.dist(&z);
        let eta = eval_eta(&z_next, &state, data)?;
        let xi = state.xi();
        let h = state.h();
        let energy = eval_energy(&z_next, &z, xi, alpha, rho, h, data)?;
        let energy_prev = match &previous {
            Some((zp, xip, hp)) => Some(eval_energy(&z, zp, *xip, alpha, rho, *hp, data)?),
            None => None,
        };
        let val_err = crate::operators::fidelity(&z_next.x, &data.mask_val, &data.b_val)?;
        let (rlne, psnr) = match &data.ground_truth {
            Some(gt) => (metrics::rlne(&z_next.x, gt).ok(), metrics::psnr(&z_next.x, gt).ok()),
            None => (None, None),
        };
        let record = OuterRecord {
            k,
            r: z_next.r,
            x: cfg.keep_iterates.then(|| z_next.x.clone()),
            alpha,
            rho,
            eta,
            delta,
            phi_value: sub.phi_value,
            lower_value: h,
            xi,
            val_err,
            wall_time: clock.now() - t0,
            rlne,
            psnr,
            residual_norm: sub.residual_norm,
            residual_target: sub.tolerance,
            inner_iterations: sub.inner_iterations,
            lower_iterations,
            lower_converged,
            energy,
            energy_prev,
        };
        if z_next.r[0].min(z_next.r[1]) < SMALL_RADIUS {
            small_radius_steps += 1;
        }
        observe(&record);
        records.push(record);

        let measure = delta.max(eta);
        if measure < best.0 {
            best = (measure, z_next.clone());
        }
        previous = Some((z, xi, h));
        z = z_next;
        lower = state.lower;
        if measure < cfg.tol {
            converged = true;
            break;
        }
        alpha = update_alpha(alpha, delta, eta, cfg);
        rho = update_rho(rho, delta, cfg);
        prev_step = Some(delta);
    }

    // Lower-level solution at the final radii, for diagnostics.
    let lower = solve_lower_warm(
        data,
        &Hyperparams::radii(z.r[0], z.r[1])?,
        &cfg.lower,
        cfg.warm_start.then_some(&lower.state),
    )?;
    Ok(OuterTrace {
        records,
        z0,
        z,
        lower,
        converged,
        best: best.1,
        lower_warnings,
        small_radius_steps,
    })
}
