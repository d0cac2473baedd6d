//! Penalized restoration
//!
//! ```text
//! min ½‖Φx − b‖² + λ₁‖Ψx‖₁ + λ₂ TV(x)
//! ```
//!
//! by ADMM on `v = Ψx`, `w = Dx` with soft-thresholding updates.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::image::{Image, KSpaceData, SamplingMask};
use crate::l1ball::soft;
use crate::lower::{cnorm_sq, AdmmConfig, AdmmState, HyperparamKind, Hyperparams};
use crate::math;
use crate::operators::{FourierSystem, OperatorSet};

#[derive(Debug, Clone, PartialEq)]
pub struct PenalizedSolution {
    pub x: Image,
    pub objective: f64,
    /// `½‖Φx − b‖²`.
    pub fidelity: f64,
    /// Stationarity residual with the duals clipped onto the subdifferentials.
    pub kkt_residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective after each iteration, only filled when requested.
    pub history: Vec<f64>,
    /// Final ADMM iterate in the layout of the constrained solver, with
    /// `u = yᵤ = Φx − b`. Duals on `v` and `w` lie in `λ∂‖·‖₁`, which is
    /// also the multiplier structure of the constrained problem.
    pub state: AdmmState,
}

/// Objective value of the penalized problem at `x`.
pub fn penalized_objective(x: &Image, mask: &SamplingMask, b: &KSpaceData, lam: [f64; 2]) -> Result<f64> {
    let ops = OperatorSet::new(x.shape())?;
    let fid = crate::operators::fidelity(x, mask, b)?;
    let (l1, tv) = ops.norms(x.pixels());
    Ok(fid + lam[0] * l1 + lam[1] * tv)
}

/// Penalized solve on the training data of a mask / data pair.
pub fn solve_penalized(mask: &SamplingMask, b: &KSpaceData, lam: &Hyperparams, cfg: &AdmmConfig) -> Result<PenalizedSolution> {
    solve_penalized_ext(mask, b, lam, cfg, None, false)
}

/// As [`solve_penalized`], with an optional warm start and optional recording
/// of the objective after every iteration. The warm state supplies `v`, `w`,
/// their duals and `sigma`; its `u` block is ignored.
pub fn solve_penalized_ext(
    mask: &SamplingMask,
    b: &KSpaceData,
    lam: &Hyperparams,
    cfg: &AdmmConfig,
    warm: Option<&AdmmState>,
    record: bool,
) -> Result<PenalizedSolution> {
    if lam.kind != HyperparamKind::Weights {
        return Err(Error::InvalidParameter {
            name: "lam",
            reason: "the penalized problem takes weights",
        });
    }
    let lam = Hyperparams::weights(lam.values[0], lam.values[1])?.values;
    cfg.validate()?;
    b.check(mask)?;
    let shape = mask.shape();
    let ops = OperatorSet::new(shape)?;
    let gram = FourierSystem::new(shape)?.gram(mask, 1.0)?;
    let reg = FourierSystem::new(shape)?.identity(1.0).laplacian(1.0);
    let n = shape.len();

    let start = match warm {
        Some(s) if s.fits(n, mask.m()) => s.clone(),
        _ => AdmmState::zeros(n, mask.m(), cfg.sigma),
    };
    let mut x = start.x;
    let mut v = start.v;
    let mut w = start.w;
    let mut yv = start.yv;
    let mut yw = start.yw;
    let mut sigma = start.sigma;
    let mut symbol = combine(gram.symbol(), reg.symbol(), sigma);
    // Φᵀb spectrum is fixed.
    let mut atb = vec![Complex64::new(0.0, 0.0); n];
    ops.add_adjoint_spectrum(&b.samples, mask, 1.0, &mut atb);
    let atb_norm = math::sqrt(cnorm_sq(&atb));

    let mut history = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    let mut rebalances = 0;
    let (mut psi_x, mut d_x) = (ops.psi(&x), ops.grad(&x));
    let mut spec_x = ops.fft.forward_real(&x);

    for it in 1..=cfg.max_iter {
        iterations = it;
        let mut real_part: Vec<f64> = ops.psi_adjoint(&v.iter().zip(&yv).map(|(a, y)| sigma * a - y).collect::<Vec<_>>());
        let gt: Vec<f64> = w.iter().zip(&yw).map(|(a, y)| sigma * a - y).collect();
        for (a, c) in real_part.iter_mut().zip(ops.grad_adjoint(&gt)) {
            *a += c;
        }
        let mut spec = ops.fft.forward_real(&real_part);
        for ((s, t), d) in spec.iter_mut().zip(&atb).zip(&symbol) {
            *s = (*s + t) / *d;
        }
        spec_x.copy_from_slice(&spec);
        x = ops.fft.inverse_real(spec);
        psi_x = ops.psi(&x);
        d_x = ops.grad(&x);

        let inv = 1.0 / sigma;
        let v_prev = core::mem::take(&mut v);
        v = psi_x
            .iter()
            .zip(&yv)
            .map(|(p, y)| soft(p + y * inv, lam[0] * inv))
            .collect();
        let w_prev = core::mem::take(&mut w);
        w = d_x
            .iter()
            .zip(&yw)
            .map(|(p, y)| soft(p + y * inv, lam[1] * inv))
            .collect();

        let mut prim_sq = 0.0;
        for ((y, p), a) in yv.iter_mut().zip(&psi_x).zip(&v) {
            let r = p - a;
            prim_sq += r * r;
            *y += sigma * r;
        }
        for ((y, p), a) in yw.iter_mut().zip(&d_x).zip(&w) {
            let r = p - a;
            prim_sq += r * r;
            *y += sigma * r;
        }
        let change = math::sqrt(math::dist2_sq(&v, &v_prev) + math::dist2_sq(&w, &w_prev));
        let kx = math::sqrt(sq(&psi_x) + sq(&d_x));
        let zn = math::sqrt(sq(&v) + sq(&w));
        let yn = math::sqrt(sq(&yv) + sq(&yw));
        let p_abs = math::sqrt(prim_sq);
        let d_abs = sigma * change;
        let rp = p_abs / kx.max(zn).max(1e-12);
        let rd = d_abs / yn.max(atb_norm).max(1e-12);

        if record {
            let fid = fidelity_from_spectrum(&spec_x, mask, b);
            history.push(fid + lam[0] * math::norm1(&psi_x) + lam[1] * math::norm1(&d_x));
        }
        if (p_abs <= 1e-14 || rp <= cfg.primal_tol) && (d_abs <= 1e-14 || rd <= cfg.dual_tol) {
            converged = true;
            break;
        }
        if cfg.balance_ratio > 0.0 && it % 10 == 0 && rebalances < cfg.balance_limit {
            let next = if rp > cfg.balance_ratio * rd {
                sigma * 2.0
            } else if rd > cfg.balance_ratio * rp {
                sigma * 0.5
            } else {
                sigma
            };
            if next != sigma {
                sigma = next;
                symbol = combine(gram.symbol(), reg.symbol(), sigma);
                rebalances += 1;
            }
        }
    }

    let fid = fidelity_from_spectrum(&spec_x, mask, b);
    let objective = fid + lam[0] * math::norm1(&psi_x) + lam[1] * math::norm1(&d_x);
    let kkt_residual = stationarity(&ops, mask, b, &spec_x, &v, &w, &yv, &yw, lam);
    let u: Vec<Complex64> = mask.indices().zip(&b.samples).map(|(i, c)| spec_x[i] - c).collect();
    let state = AdmmState {
        x: x.clone(),
        yu: u.clone(),
        u,
        v,
        w,
        yv,
        yw,
        sigma,
    };
    Ok(PenalizedSolution {
        x: Image::from_pixels(shape, x)?,
        objective,
        fidelity: fid,
        kkt_residual,
        iterations,
        converged,
        history,
        state,
    })
}

fn sq(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum()
}

fn combine(gram: &[f64], reg: &[f64], sigma: f64) -> Vec<f64> {
    gram.iter().zip(reg).map(|(g, r)| g + sigma * r).collect()
}

fn fidelity_from_spectrum(spec: &[Complex64], mask: &SamplingMask, b: &KSpaceData) -> f64 {
    0.5 * mask
        .indices()
        .zip(&b.samples)
        .map(|(i, c)| (spec[i] - c).norm_sqr())
        .sum::<f64>()
}

/// Clips a dual vector onto `λ ∂‖z‖₁` using `zero_tol` to decide which
/// entries of `z` count as zero.
pub(crate) fn clip_to_subdifferential(y: &[f64], z: &[f64], lam: f64, zero_tol: f64) -> Vec<f64> {
    y.iter()
        .zip(z)
        .map(|(&a, &s)| {
            if s > zero_tol {
                lam
            } else if s < -zero_tol {
                -lam
            } else {
                a.clamp(-lam, lam)
            }
        })
        .collect()
}

/// Sign patterns come from the split variables, which are exactly sparse
/// after soft-thresholding, rather than from `Ψx` and `Dx`, whose near-zero
/// entries carry the ADMM primal error.
#[allow(clippy::too_many_arguments)]
fn stationarity(
    ops: &OperatorSet,
    mask: &SamplingMask,
    b: &KSpaceData,
    spec_x: &[Complex64],
    v: &[f64],
    w: &[f64],
    yv: &[f64],
    yw: &[f64],
    lam: [f64; 2],
) -> f64 {
    let tol = 1e-8 * (1.0 + math::norm_inf(v).max(math::norm_inf(w)));
    let pv = clip_to_subdifferential(yv, v, lam[0], tol);
    let pw = clip_to_subdifferential(yw, w, lam[1], tol);
    let resid: Vec<Complex64> = mask.indices().zip(&b.samples).map(|(i, c)| spec_x[i] - c).collect();
    let mut g = ops.phi_adjoint(&resid, mask);
    for ((a, p), q) in g.iter_mut().zip(ops.psi_adjoint(&pv)).zip(ops.grad_adjoint(&pw)) {
        *a += p + q;
    }
    math::norm2(&g)
}

