//! Optimality diagnostics for the single-level reformulation
//!
//! ```text
//! min F(x)  s.t.  f(x) − h(r) ≤ 0,  ‖Ψx‖₁ ≤ r₁,  TV(x) ≤ r₂,  r ≥ 0
//! ```
//!
//! with `F` the validation fidelity and `f` the training fidelity, plus the
//! penalized / constrained round trip.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::image::{Dataset, Image};
use crate::lower::{solve_lower_warm, AdmmConfig, HyperparamKind, Hyperparams, LowerSolution};
use crate::math;
use crate::operators::{fidelity, OperatorSet};
use crate::penalized::{solve_penalized, solve_penalized_ext};
use crate::penalty::OuterPoint;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktResidual {
    pub stationarity_x: f64,
    pub stationarity_r: f64,
    pub complementarity: f64,
    pub feasibility: f64,
    /// `(ξ₀, ξ₁, ξ₂)`, all nonnegative.
    pub multipliers: [f64; 3],
}

impl KktResidual {
    pub fn max_component(&self) -> f64 {
        self.stationarity_x
            .max(self.stationarity_r)
            .max(self.complementarity)
            .max(self.feasibility)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktOptions {
    /// Entries of `Ψx` and `Dx` at most `zero_tol·(1 + max|·|)` in magnitude
    /// get the whole interval `[−1, 1]` as subdifferential.
    pub zero_tol: f64,
    /// Alternations between the `ξ₀` fit and the subgradient fit.
    pub rounds: usize,
    /// Projected-gradient steps per alternation.
    pub inner_steps: usize,
    /// Allowed lower-level infeasibility, relative to `1 + max r`.
    pub lower_tol: f64,
}

impl Default for KktOptions {
    fn default() -> Self {
        Self {
            zero_tol: 1e-6,
            rounds: 8,
            inner_steps: 200,
            lower_tol: 1e-3,
        }
    }
}

pub fn kkt_residual(z: &OuterPoint, lower: &LowerSolution, data: &Dataset) -> Result<KktResidual> {
    kkt_residual_with(z, lower, data, &KktOptions::default())
}

/// Candidate multipliers are `ξ₀ ≥ 0` fitted by least squares and
/// `(ξ₁, ξ₂) = ξ₀·ξ_lower`, which makes the `r` block stationary whenever
/// `r > 0`. The `x` residual is the distance reached by the best subgradient
/// found, so it is an upper bound on the true distance.
pub fn kkt_residual_with(z: &OuterPoint, lower: &LowerSolution, data: &Dataset, opts: &KktOptions) -> Result<KktResidual> {
    let shape = data.shape();
    if z.x.shape() != shape {
        return Err(Error::mismatch("kkt point", shape.len(), z.x.len()));
    }
    let scale = 1.0 + z.r[0].abs().max(z.r[1].abs());
    if (lower.radii[0] - z.r[0]).abs() > 1e-12 * scale || (lower.radii[1] - z.r[1]).abs() > 1e-12 * scale {
        return Err(Error::InvalidParameter {
            name: "lower",
            reason: "lower solution was computed at different radii",
        });
    }
    let bad = lower.infeasibility();
    if bad > opts.lower_tol * scale {
        return Err(Error::InfeasibleLower(bad));
    }

    let ops = OperatorSet::new(shape)?;
    let x = z.x.pixels();
    let grad_fid = |mask, b: &crate::image::KSpaceData| -> Vec<f64> {
        let ax = ops.phi(x, mask);
        let resid: Vec<_> = ax.iter().zip(&b.samples).map(|(a, c)| a - c).collect();
        ops.phi_adjoint(&resid, mask)
    };
    let g_val = grad_fid(&data.mask_val, &data.b_val);
    let g_tr = grad_fid(&data.mask_tr, &data.b_tr);
    let c = lower.xi;
    let psi_x = ops.psi(x);
    let d_x = ops.grad(x);
    let boxes = [
        SubBox::new(&psi_x, opts.zero_tol),
        SubBox::new(&d_x, opts.zero_tol),
    ];

    // start from the sign pattern with zero on free entries
    let mut p = boxes[0].centre();
    let mut q = boxes[1].centre();
    let mut best = (math::norm2(&g_val), 0.0, p.clone(), q.clone());
    for _ in 0..opts.rounds.max(1) {
        let dir = combine(&ops, &g_tr, c, &p, &q);
        let dd = math::dot(&dir, &dir);
        let xi0 = if dd > 0.0 { (-math::dot(&g_val, &dir) / dd).max(0.0) } else { 0.0 };
        let res = residual(&g_val, &dir, xi0);
        if res < best.0 {
            best = (res, xi0, p.clone(), q.clone());
        }
        if xi0 == 0.0 || (c[0] == 0.0 && c[1] == 0.0) {
            break;
        }
        // with ξ₀ fixed, minimize ‖g + ξ₀(∇f + c₁Ψᵀp + c₂Dᵀq)‖ over the boxes
        let base: Vec<f64> = g_val.iter().zip(&g_tr).map(|(a, b)| a + xi0 * b).collect();
        let (a1, a2) = (xi0 * c[0], xi0 * c[1]);
        let lip = a1 * a1 + 8.0 * a2 * a2;
        let step = 1.0 / lip;
        let (mut yp, mut yq) = (p.clone(), q.clone());
        let mut t = 1.0f64;
        for _ in 0..opts.inner_steps {
            let mut r = base.clone();
            add_scaled(&mut r, &ops.psi_adjoint(&yp), a1);
            add_scaled(&mut r, &ops.grad_adjoint(&yq), a2);
            let gp = ops.psi(&r);
            let gq = ops.grad(&r);
            let np: Vec<f64> = yp.iter().zip(&gp).map(|(v, g)| v - step * a1 * g).collect();
            let nq: Vec<f64> = yq.iter().zip(&gq).map(|(v, g)| v - step * a2 * g).collect();
            let np = boxes[0].project(np);
            let nq = boxes[1].project(nq);
            let t_next = 0.5 * (1.0 + math::sqrt(1.0 + 4.0 * t * t));
            let mom = (t - 1.0) / t_next;
            yp = np.iter().zip(&p).map(|(a, b)| a + mom * (a - b)).collect();
            yq = nq.iter().zip(&q).map(|(a, b)| a + mom * (a - b)).collect();
            yp = boxes[0].project(yp);
            yq = boxes[1].project(yq);
            p = np;
            q = nq;
            t = t_next;
        }
        let dir = combine(&ops, &g_tr, c, &p, &q);
        let res = residual(&g_val, &dir, xi0);
        if res < best.0 {
            best = (res, xi0, p.clone(), q.clone());
        }
    }
    let (stationarity_x, xi0) = (best.0, best.1);
    let xi = [xi0, xi0 * c[0], xi0 * c[1]];

    // ∇_r ℒ = ξ₀ ξ_lower − (ξ₁, ξ₂); at rᵢ = 0 the normal cone absorbs negative parts
    let mut stationarity_r = 0.0f64;
    for i in 0..2 {
        let g = xi0 * c[i] - xi[i + 1];
        let v = if z.r[i] > 0.0 { g.abs() } else { (-g).max(0.0) };
        stationarity_r = stationarity_r.max(v);
    }

    let (l1, tv) = ops.norms(x);
    let g0 = fidelity(&z.x, &data.mask_tr, &data.b_tr)? - lower.value;
    let g1 = l1 - z.r[0];
    let g2 = tv - z.r[1];
    let complementarity = (xi[0] * g0).abs().max((xi[1] * g1).abs()).max((xi[2] * g2).abs());
    let feasibility = g0.max(g1).max(g2).max(-z.r[0]).max(-z.r[1]).max(0.0);
    Ok(KktResidual {
        stationarity_x,
        stationarity_r,
        complementarity,
        feasibility,
        multipliers: xi,
    })
}

/// Box `∂‖·‖₁` at a vector: fixed signs on clear nonzeros, `[−1, 1]` elsewhere.
struct SubBox {
    fixed: Vec<Option<f64>>,
}

impl SubBox {
    fn new(v: &[f64], zero_tol: f64) -> Self {
        let tol = zero_tol * (1.0 + math::norm_inf(v));
        Self {
            fixed: v
                .iter()
                .map(|&a| {
                    if a > tol {
                        Some(1.0)
                    } else if a < -tol {
                        Some(-1.0)
                    } else {
                        None
                    }
                })
                .collect(),
        }
    }

    fn centre(&self) -> Vec<f64> {
        self.fixed.iter().map(|f| f.unwrap_or(0.0)).collect()
    }

    fn project(&self, mut v: Vec<f64>) -> Vec<f64> {
        for (a, f) in v.iter_mut().zip(&self.fixed) {
            *a = match f {
                Some(s) => *s,
                None => a.clamp(-1.0, 1.0),
            };
        }
        v
    }
}

fn add_scaled(acc: &mut [f64], v: &[f64], s: f64) {
    for (a, b) in acc.iter_mut().zip(v) {
        *a += s * b;
    }
}

fn combine(ops: &OperatorSet, g_tr: &[f64], c: [f64; 2], p: &[f64], q: &[f64]) -> Vec<f64> {
    let mut dir = g_tr.to_vec();
    add_scaled(&mut dir, &ops.psi_adjoint(p), c[0]);
    add_scaled(&mut dir, &ops.grad_adjoint(q), c[1]);
    dir
}

fn residual(g: &[f64], dir: &[f64], s: f64) -> f64 {
    math::sqrt(g.iter().zip(dir).map(|(a, b)| math::sq(a + s * b)).sum())
}

/// Discrepancies of the two penalized / constrained round trips.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundTrip {
    pub lambda: [f64; 2],
    /// `x̄ = argmin penalized(λ)`.
    pub x_penalized: Image,
    /// `r = (‖Ψx̄‖₁, TV(x̄))`.
    pub radii: [f64; 2],
    /// Multipliers returned by the constrained solve at `r`.
    pub xi: [f64; 2],
    /// `‖x_c(r) − x̄‖`.
    pub penalized_to_constrained: f64,
    /// `‖x_p(ξ) − x_c(r)‖`.
    pub constrained_to_penalized: f64,
    /// `1 + ‖x̄‖`, the natural scale of both discrepancies.
    pub scale: f64,
    pub converged: bool,
}

/// Penalized solve at `λ`, constrained solve at the radii it attains, then a
/// penalized solve at the recovered multipliers.
///
/// Each solve starts from the previous one's primal-dual state. Both problems
/// can have a whole face of minimizers, and the claims being checked are
/// memberships (`x̄` solves the other problem), so the discrepancy measures
/// how far a solver moves away from the point it was handed.
pub fn equivalence_roundtrip(data: &Dataset, lam: &Hyperparams, cfg: &AdmmConfig) -> Result<RoundTrip> {
    if lam.kind != HyperparamKind::Weights {
        return Err(Error::InvalidParameter {
            name: "lam",
            reason: "the round trip starts from weights",
        });
    }
    let ops = OperatorSet::new(data.shape())?;
    let pen = solve_penalized(&data.mask_tr, &data.b_tr, lam, cfg)?;
    let (l1, tv) = ops.norms(pen.x.pixels());
    let radii = [l1, tv];
    let con = solve_lower_warm(data, &Hyperparams::radii(l1, tv)?, cfg, Some(&pen.state))?;
    let back = solve_penalized_ext(
        &data.mask_tr,
        &data.b_tr,
        &Hyperparams::weights(con.xi[0], con.xi[1])?,
        cfg,
        Some(&con.state),
        false,
    )?;
    let d1 = math::sqrt(math::dist2_sq(con.x_bar.pixels(), pen.x.pixels()));
    let d2 = math::sqrt(math::dist2_sq(back.x.pixels(), con.x_bar.pixels()));
    Ok(RoundTrip {
        lambda: lam.values,
        scale: 1.0 + pen.x.norm(),
        x_penalized: pen.x,
        radii,
        xi: con.xi,
        penalized_to_constrained: d1,
        constrained_to_penalized: d2,
        converged: pen.converged && con.converged && back.converged,
    })
}
