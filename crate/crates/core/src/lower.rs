//! Constrained lower-level problem
//!
//! ```text
//! h(r) = min ½‖Φ_tr x − b_tr‖²  s.t.  ‖Ψx‖₁ ≤ r₁,  TV(x) ≤ r₂
//! ```
//!
//! solved by two-block ADMM on the splitting `u = Φx − b`, `v = Ψx`, `w = Dx`.
//! The `(u, v, w)` block is separable with closed-form updates. The `x` block
//! is one Fourier-diagonal solve of `(ΦᵀΦ + I + DᵀD) x = …`.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::image::{Dataset, Image, KSpaceData, SamplingMask};
use crate::l1ball::project_l1_ball_into;
use crate::math;
use crate::operators::{FourierSystem, OperatorSet};

/// Whether a hyperparameter pair holds constraint radii or penalty weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HyperparamKind {
    Radii,
    Weights,
}

/// A pair of nonnegative hyperparameters: `(r₁, r₂)` or `(λ₁, λ₂)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hyperparams {
    pub kind: HyperparamKind,
    pub values: [f64; 2],
}

impl Hyperparams {
    pub fn radii(r1: f64, r2: f64) -> Result<Self> {
        Self::checked(HyperparamKind::Radii, r1, r2)
    }

    pub fn weights(l1: f64, l2: f64) -> Result<Self> {
        Self::checked(HyperparamKind::Weights, l1, l2)
    }

    fn checked(kind: HyperparamKind, a: f64, b: f64) -> Result<Self> {
        let name = match kind {
            HyperparamKind::Radii => "radius",
            HyperparamKind::Weights => "weight",
        };
        if !(a >= 0.0 && b >= 0.0) || !a.is_finite() || !b.is_finite() {
            return Err(Error::NegativeHyperparameter(name));
        }
        Ok(Self {
            kind,
            values: [a, b],
        })
    }
}

/// ADMM settings. `sigma` is the initial penalty; it is rebalanced on the fly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdmmConfig {
    pub sigma: f64,
    pub max_iter: usize,
    pub primal_tol: f64,
    pub dual_tol: f64,
    pub feas_tol: f64,
    pub comp_tol: f64,
    /// Residual ratio that triggers a doubling or halving of `sigma`; `0` disables.
    pub balance_ratio: f64,
    /// Most `sigma` changes per solve. Unbounded rebalancing can keep ADMM
    /// from settling, so `sigma` is frozen after this many.
    pub balance_limit: usize,
}

impl Default for AdmmConfig {
    fn default() -> Self {
        Self {
            sigma: 1.0,
            max_iter: 2000,
            primal_tol: 1e-6,
            dual_tol: 1e-6,
            feas_tol: 1e-5,
            comp_tol: 1e-5,
            balance_ratio: 10.0,
            balance_limit: 20,
        }
    }
}

impl AdmmConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("sigma", self.sigma),
            ("primal_tol", self.primal_tol),
            ("dual_tol", self.dual_tol),
            ("feas_tol", self.feas_tol),
            ("comp_tol", self.comp_tol),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter {
                    name,
                    reason: "must be positive and finite",
                });
            }
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidParameter {
                name: "max_iter",
                reason: "must be at least one",
            });
        }
        if !(self.balance_ratio >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "balance_ratio",
                reason: "must be nonnegative",
            });
        }
        Ok(())
    }
}

/// Full ADMM iterate, kept so the next solve can start from it.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmmState {
    pub x: Vec<f64>,
    pub u: Vec<Complex64>,
    pub v: Vec<f64>,
    pub w: Vec<f64>,
    pub yu: Vec<Complex64>,
    pub yv: Vec<f64>,
    pub yw: Vec<f64>,
    pub sigma: f64,
}

impl AdmmState {
    pub(crate) fn zeros(n: usize, m: usize, sigma: f64) -> Self {
        let cz = Complex64::new(0.0, 0.0);
        Self {
            x: vec![0.0; n],
            u: vec![cz; m],
            v: vec![0.0; n],
            w: vec![0.0; 2 * n],
            yu: vec![cz; m],
            yv: vec![0.0; n],
            yw: vec![0.0; 2 * n],
            sigma,
        }
    }

    pub(crate) fn fits(&self, n: usize, m: usize) -> bool {
        self.x.len() == n && self.u.len() == m && self.v.len() == n && self.w.len() == 2 * n
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LowerSolution {
    pub x_bar: Image,
    /// Multipliers `(ξ₁, ξ₂)` of the wavelet and TV constraints.
    pub xi: [f64; 2],
    /// `h(r) = ½‖Φ_tr x̄ − b_tr‖²`.
    pub value: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub radii: [f64; 2],
    /// `(‖Ψx̄‖₁, TV(x̄))`.
    pub norms: [f64; 2],
    pub state: AdmmState,
}

impl LowerSolution {
    /// Largest constraint violation `max(‖Ψx̄‖₁ − r₁, TV(x̄) − r₂, 0)`.
    pub fn infeasibility(&self) -> f64 {
        (self.norms[0] - self.radii[0])
            .max(self.norms[1] - self.radii[1])
            .max(0.0)
    }
}

pub(crate) fn cnorm_sq(z: &[Complex64]) -> f64 {
    z.iter().map(|c| c.norm_sqr()).sum()
}

fn cdist_sq(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q).norm_sqr()).sum()
}

/// Multipliers from converged ADMM duals: `ξᵢ = ‖yᵢ‖_∞` when constraint `i`
/// is active (norm within `feas_tol·(1 + rᵢ)` of the radius), else `0`.
pub fn recover_multipliers(
    dual_v: &[f64],
    dual_w: &[f64],
    norms: [f64; 2],
    r: [f64; 2],
    feas_tol: f64,
) -> [f64; 2] {
    let pick = |y: &[f64], norm: f64, radius: f64| {
        if norm < radius - feas_tol * (1.0 + radius) {
            0.0
        } else {
            math::norm_inf(y)
        }
    };
    [pick(dual_v, norms[0], r[0]), pick(dual_w, norms[1], r[1])]
}

/// Same as [`recover_multipliers`] but measures the norms of `x_bar` itself.
pub fn recover_multipliers_at(
    dual_v: &[f64],
    dual_w: &[f64],
    x_bar: &Image,
    r: &Hyperparams,
    feas_tol: f64,
) -> Result<[f64; 2]> {
    let ops = OperatorSet::new(x_bar.shape())?;
    let (a, b) = ops.norms(x_bar.pixels());
    Ok(recover_multipliers(dual_v, dual_w, [a, b], r.values, feas_tol))
}

/// Solves the lower-level problem from a cold start.
pub fn solve_lower(dataset: &Dataset, r: &Hyperparams, cfg: &AdmmConfig) -> Result<LowerSolution> {
    solve_lower_warm(dataset, r, cfg, None)
}

/// Solves the lower-level problem, optionally starting from a previous ADMM state.
pub fn solve_lower_warm(
    dataset: &Dataset,
    r: &Hyperparams,
    cfg: &AdmmConfig,
    warm: Option<&AdmmState>,
) -> Result<LowerSolution> {
    if r.kind != HyperparamKind::Radii {
        return Err(Error::InvalidParameter {
            name: "r",
            reason: "the constrained problem takes radii",
        });
    }
    let r = Hyperparams::radii(r.values[0], r.values[1])?.values;
    cfg.validate()?;
    let ops = OperatorSet::new(dataset.shape())?;
    let sys = FourierSystem::new(dataset.shape())?
        .identity(1.0)
        .laplacian(1.0)
        .gram(&dataset.mask_tr, 1.0)?;
    LowerAdmm {
        ops: &ops,
        symbol: sys.symbol(),
        mask: &dataset.mask_tr,
        b: &dataset.b_tr,
        r,
        cfg,
    }
    .run(warm)
}

struct LowerAdmm<'a> {
    ops: &'a OperatorSet,
    symbol: &'a [f64],
    mask: &'a SamplingMask,
    b: &'a KSpaceData,
    r: [f64; 2],
    cfg: &'a AdmmConfig,
}

impl LowerAdmm<'_> {
    fn run(&self, warm: Option<&AdmmState>) -> Result<LowerSolution> {
        let n = self.ops.n();
        let m = self.mask.m();
        let b = &self.b.samples;
        let mut st = match warm {
            Some(s) if s.fits(n, m) => s.clone(),
            _ => AdmmState::zeros(n, m, self.cfg.sigma),
        };
        let b_norm = math::sqrt(cnorm_sq(b));

        let mut phi_x = self.ops.phi(&st.x, self.mask);
        let mut psi_x = self.ops.psi(&st.x);
        let mut d_x = self.ops.grad(&st.x);
        let mut pv = vec![0.0; n];
        let mut pw = vec![0.0; 2 * n];
        let (mut rp, mut rd) = (f64::INFINITY, f64::INFINITY);
        let mut iterations = 0;
        let mut converged = false;
        let mut rebalances = 0;

        for it in 1..=self.cfg.max_iter {
            iterations = it;
            let sigma = st.sigma;
            let inv = 1.0 / sigma;

            // x-update in the Fourier domain; x̂ also yields Φx without another FFT.
            let mut real_part = self.ops.psi_adjoint(
                &st.v.iter().zip(&st.yv).map(|(v, y)| v - y * inv).collect::<Vec<_>>(),
            );
            let g_target: Vec<f64> = st.w.iter().zip(&st.yw).map(|(w, y)| w - y * inv).collect();
            for (a, c) in real_part.iter_mut().zip(self.ops.grad_adjoint(&g_target)) {
                *a += c;
            }
            let mut spec = self.ops.fft.forward_real(&real_part);
            let zu: Vec<Complex64> = st
                .u
                .iter()
                .zip(b)
                .zip(&st.yu)
                .map(|((u, bb), y)| u + bb - y * inv)
                .collect();
            self.ops.add_adjoint_spectrum(&zu, self.mask, 1.0, &mut spec);
            for (s, d) in spec.iter_mut().zip(self.symbol) {
                *s /= *d;
            }
            phi_x.clear();
            phi_x.extend(self.mask.indices().map(|i| spec[i]));
            st.x = self.ops.fft.inverse_real(spec);
            psi_x = self.ops.psi(&st.x);
            d_x = self.ops.grad(&st.x);

            // (u, v, w)-update.
            let u_prev = core::mem::take(&mut st.u);
            st.u = phi_x
                .iter()
                .zip(b)
                .zip(&st.yu)
                .map(|((p, bb), y)| (y + (p - bb) * sigma) / (1.0 + sigma))
                .collect();
            for ((t, p), y) in pv.iter_mut().zip(&psi_x).zip(&st.yv) {
                *t = p + y * inv;
            }
            let v_prev = core::mem::replace(&mut st.v, vec![0.0; n]);
            project_l1_ball_into(&pv, self.r[0], &mut st.v);
            for ((t, p), y) in pw.iter_mut().zip(&d_x).zip(&st.yw) {
                *t = p + y * inv;
            }
            let w_prev = core::mem::replace(&mut st.w, vec![0.0; 2 * n]);
            project_l1_ball_into(&pw, self.r[1], &mut st.w);

            // Dual ascent and residuals.
            let mut prim_sq = 0.0;
            for (((y, p), bb), u) in st.yu.iter_mut().zip(&phi_x).zip(b).zip(&st.u) {
                let res = p - bb - u;
                prim_sq += res.norm_sqr();
                *y += res * sigma;
            }
            for ((y, p), v) in st.yv.iter_mut().zip(&psi_x).zip(&st.v) {
                let res = p - v;
                prim_sq += res * res;
                *y += sigma * res;
            }
            for ((y, p), w) in st.yw.iter_mut().zip(&d_x).zip(&st.w) {
                let res = p - w;
                prim_sq += res * res;
                *y += sigma * res;
            }
            let change = math::sqrt(
                cdist_sq(&st.u, &u_prev)
                    + math::dist2_sq(&st.v, &v_prev)
                    + math::dist2_sq(&st.w, &w_prev),
            );

            let kx = math::sqrt(cnorm_sq(&phi_x) + norm_sq(&psi_x) + norm_sq(&d_x));
            let zeta = math::sqrt(cnorm_sq(&st.u) + norm_sq(&st.v) + norm_sq(&st.w)) + b_norm;
            let y_norm = math::sqrt(cnorm_sq(&st.yu) + norm_sq(&st.yv) + norm_sq(&st.yw));
            let p_abs = math::sqrt(prim_sq);
            let d_abs = sigma * change;
            rp = p_abs / kx.max(zeta).max(1e-12);
            rd = d_abs / y_norm.max(1e-12);
            if (p_abs <= 1e-14 || rp <= self.cfg.primal_tol) && (d_abs <= 1e-14 || rd <= self.cfg.dual_tol) {
                converged = true;
                break;
            }
            if self.cfg.balance_ratio > 0.0 && it % 10 == 0 && rebalances < self.cfg.balance_limit {
                if rp > self.cfg.balance_ratio * rd {
                    st.sigma = sigma * 2.0;
                    rebalances += 1;
                } else if rd > self.cfg.balance_ratio * rp {
                    st.sigma = sigma * 0.5;
                    rebalances += 1;
                }
            }
        }

        let value = 0.5
            * phi_x
                .iter()
                .zip(b)
                .map(|(p, bb)| (p - bb).norm_sqr())
                .sum::<f64>();
        let norms = [math::norm1(&psi_x), math::norm1(&d_x)];
        let xi = recover_multipliers(&st.yv, &st.yw, norms, self.r, self.cfg.feas_tol);
        Ok(LowerSolution {
            x_bar: Image::from_pixels(self.ops.shape, st.x.clone())?,
            xi,
            value,
            primal_residual: rp,
            dual_residual: rd,
            iterations,
            converged,
            radii: self.r,
            norms,
            state: st,
        })
    }
}

fn norm_sq(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum()
}
