//! Proximal feasibility-penalty subproblem of the outer loop.
//!
//! With `zᵏ = (xᵏ, rᵏ)`, multipliers `ξᵏ` and `hᵏ = h(rᵏ)`:
//!
//! ```text
//! θ(x, r) = ½‖Φ_tr x − b_tr‖² − hᵏ + ⟨ξᵏ, r − rᵏ⟩
//! φ(z)    = ½‖Φ_val x − b_val‖² + ρ/2‖x − xᵏ‖² + ρ/2‖r − rᵏ‖²
//!           + α max{0, θ(z), ‖Ψx‖₁ − r₁, TV(x) − r₂},   r ≥ 0
//! ```
//!
//! The subproblem is solved by ADMM with `x` as the first block and
//! `(s, v, w, r) = (Φ_tr x − b_tr, Ψx, Dx, r)` as the second. The second
//! block's prox is evaluated through its dual over the 4-simplex of weights
//! `μ = (μ₀, μ_θ, μ₁, μ₂)` on the branches of the max. For fixed `μ` every
//! piece has a closed form. The final `μ` together with the ADMM duals gives
//! an explicit element of `∂φ(z) + N_Σ(z)`, which is the returned certificate.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::image::{Dataset, Image, SamplingMask};
use crate::l1ball::soft;
use crate::lower::{cnorm_sq, LowerSolution};
use crate::math;
use crate::operators::{FourierSystem, OperatorSet};

/// `z = (x, r)` with `r ≥ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct OuterPoint {
    pub x: Image,
    pub r: [f64; 2],
}

impl OuterPoint {
    pub fn new(x: Image, r: [f64; 2]) -> Result<Self> {
        if !(r[0] >= 0.0 && r[1] >= 0.0) {
            return Err(Error::OutsideDomain);
        }
        Ok(Self { x, r })
    }

    pub fn norm(&self) -> f64 {
        math::sqrt(self.x.norm() * self.x.norm() + self.r[0] * self.r[0] + self.r[1] * self.r[1])
    }

    /// `‖self − other‖₂` over the stacked `(x, r)`.
    pub fn dist(&self, other: &OuterPoint) -> f64 {
        let dr = math::sq(self.r[0] - other.r[0]) + math::sq(self.r[1] - other.r[1]);
        math::sqrt(math::dist2_sq(self.x.pixels(), other.x.pixels()) + dr)
    }

    pub fn in_domain(&self) -> bool {
        self.r[0] >= 0.0 && self.r[1] >= 0.0
    }
}

/// Data of the k-th subproblem.
#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyState {
    /// `zᵏ`.
    pub z_prev: OuterPoint,
    /// Lower-level solution at `rᵏ`, supplying `ξᵏ` and `h(rᵏ)`.
    pub lower: LowerSolution,
    pub alpha: f64,
    pub rho: f64,
    /// `‖zᵏ − zᵏ⁻¹‖`; `None` on the first outer iteration.
    pub prev_step: Option<f64>,
}

impl PenaltyState {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "alpha",
                reason: "must be nonnegative and finite",
            });
        }
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "rho",
                reason: "must be positive and finite",
            });
        }
        if !self.z_prev.in_domain() {
            return Err(Error::OutsideDomain);
        }
        Ok(())
    }

    pub fn xi(&self) -> [f64; 2] {
        self.lower.xi
    }

    pub fn h(&self) -> f64 {
        self.lower.value
    }
}

/// Inner ADMM settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltyConfig {
    pub sigma: f64,
    pub max_iter: usize,
    /// Certificate evaluation period in inner iterations.
    pub check_every: usize,
    /// `ε₀ = initial_budget·(1 + ‖z⁰‖)` replaces the step bound on the first
    /// outer iteration.
    pub initial_budget: f64,
    /// Residual ratio that triggers a change of `sigma`; `0` disables.
    pub balance_ratio: f64,
    /// Most `sigma` changes per subproblem solve.
    pub balance_limit: usize,
    /// Lower bound on the certificate target, guarding against targets that
    /// are below floating-point resolution.
    pub min_tol: f64,
}

impl Default for PenaltyConfig {
    fn default() -> Self {
        Self {
            sigma: 1.0,
            max_iter: 5000,
            check_every: 5,
            initial_budget: 1e-3,
            balance_ratio: 10.0,
            balance_limit: 20,
            min_tol: 0.0,
        }
    }
}

/// Stored dual information from which the certificate is rebuilt.
#[derive(Debug, Clone, PartialEq)]
pub struct CertificateData {
    /// Simplex weights on the branches `(0, θ, wavelet, TV)`.
    pub mu: [f64; 4],
    /// Element of `[−1, 1]ⁿ` paired with `Ψx`.
    pub p: Vec<f64>,
    /// Element of `[−1, 1]²ⁿ` paired with `Dx`.
    pub q: Vec<f64>,
    /// Entries of `Ψx`/`Dx` at most this large in magnitude count as zero.
    pub zero_tol: f64,
    /// Branches within this distance of the maximum count as active.
    pub act_tol: f64,
}

/// The explicit residual `e = (e_x, e_r)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub e_x: Vec<f64>,
    pub e_r: [f64; 2],
    pub norm: f64,
    /// The weights actually used after restricting to active branches.
    pub mu: [f64; 4],
}

/// Inner ADMM duals, reused to warm start the next subproblem.
#[derive(Debug, Clone, PartialEq)]
pub struct InnerState {
    pub ys: Vec<Complex64>,
    pub yv: Vec<f64>,
    pub yw: Vec<f64>,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubproblemResult {
    pub z_next: OuterPoint,
    /// `‖e‖` of the certificate at `z_next`.
    pub residual_norm: f64,
    /// Target the certificate had to meet.
    pub tolerance: f64,
    pub inner_iterations: usize,
    pub phi_value: f64,
    pub converged: bool,
    pub certificate: CertificateData,
    pub inner: InnerState,
}

/// `θ(x, r)`.
pub fn eval_theta(z: &OuterPoint, state: &PenaltyState, data: &Dataset) -> Result<f64> {
    let fid = crate::operators::fidelity(&z.x, &data.mask_tr, &data.b_tr)?;
    Ok(theta_from(fid, z.r, state.xi(), state.z_prev.r, state.h()))
}

fn theta_from(fid_tr: f64, r: [f64; 2], xi: [f64; 2], rk: [f64; 2], h: f64) -> f64 {
    fid_tr - h + xi[0] * (r[0] - rk[0]) + xi[1] * (r[1] - rk[1])
}

/// Branch values `(0, θ, ‖Ψx‖₁ − r₁, TV − r₂)` at `z`.
pub fn branch_values(z: &OuterPoint, state: &PenaltyState, data: &Dataset) -> Result<[f64; 4]> {
    let ops = OperatorSet::new(data.shape())?;
    let (l1, tv) = ops.norms(z.x.pixels());
    Ok([0.0, eval_theta(z, state, data)?, l1 - z.r[0], tv - z.r[1]])
}

fn max4(f: &[f64; 4]) -> f64 {
    f.iter().fold(f64::NEG_INFINITY, |m, v| m.max(*v))
}

/// `φ(z)`.
pub fn eval_phi(z: &OuterPoint, state: &PenaltyState, data: &Dataset) -> Result<f64> {
    if !z.in_domain() {
        return Err(Error::OutsideDomain);
    }
    let f_val = crate::operators::fidelity(&z.x, &data.mask_val, &data.b_val)?;
    let prox = 0.5 * state.rho * math::sq(z.dist(&state.z_prev));
    Ok(f_val + prox + state.alpha * max4(&branch_values(z, state, data)?))
}

/// `η = max{0, θ(z), ‖Ψx‖₁ − r₁, TV(x) − r₂}`.
pub fn eval_eta(z_next: &OuterPoint, state: &PenaltyState, data: &Dataset) -> Result<f64> {
    Ok(max4(&branch_values(z_next, state, data)?))
}

/// Energy `E(z_next, z, ξ)` with `h*(−ξ) = ⟨−ξ, z.r⟩ − h_at_r`; `+∞` outside Σ.
pub fn eval_energy(
    z_next: &OuterPoint,
    z: &OuterPoint,
    xi: [f64; 2],
    alpha: f64,
    rho: f64,
    h_at_r: f64,
    data: &Dataset,
) -> Result<f64> {
    if !z_next.in_domain() {
        return Ok(f64::INFINITY);
    }
    let ops = OperatorSet::new(data.shape())?;
    let f_val = crate::operators::fidelity(&z_next.x, &data.mask_val, &data.b_val)?;
    let f_tr = crate::operators::fidelity(&z_next.x, &data.mask_tr, &data.b_tr)?;
    let conj = -(xi[0] * z.r[0] + xi[1] * z.r[1]) - h_at_r;
    let (l1, tv) = ops.norms(z_next.x.pixels());
    let branch = f_tr + xi[0] * z_next.r[0] + xi[1] * z_next.r[1] + conj;
    let m = 0.0f64.max(branch).max(l1 - z_next.r[0]).max(tv - z_next.r[1]);
    Ok(f_val + 0.25 * rho * math::sq(z_next.dist(z)) + alpha * m)
}

/// Certificate target: `(√2/2)·ρ·‖zᵏ − zᵏ⁻¹‖`, or `ε₀` on the first iteration.
pub fn certificate_target(state: &PenaltyState, cfg: &PenaltyConfig) -> f64 {
    let t = match state.prev_step {
        Some(step) => core::f64::consts::FRAC_1_SQRT_2 * state.rho * step,
        None => cfg.initial_budget * (1.0 + state.z_prev.norm()),
    };
    t.max(cfg.min_tol)
}

/// Rebuilds `e ∈ ∂φ(z) + N_Σ(z)` at `z` from stored duals.
///
/// Branches more than `act_tol` below the maximum lose their weight (the rest
/// is renormalized). Entries of `Ψx` or `Dx` larger than `zero_tol` in
/// magnitude use their sign; smaller ones keep the stored dual value.
pub fn certificate(z: &OuterPoint, state: &PenaltyState, data: &Dataset, cert: &CertificateData) -> Result<Certificate> {
    let ops = OperatorSet::new(data.shape())?;
    let n = ops.n();
    if cert.p.len() != n || cert.q.len() != 2 * n {
        return Err(Error::mismatch("certificate duals", n, cert.p.len()));
    }
    let spec = ops.fft.forward_real(z.x.pixels());
    let psi_x = ops.psi(z.x.pixels());
    let d_x = ops.grad(z.x.pixels());
    let fid_tr = fid_from_spec(&spec, &data.mask_tr, &data.b_tr.samples);
    let f = [
        0.0,
        theta_from(fid_tr, z.r, state.xi(), state.z_prev.r, state.h()),
        math::norm1(&psi_x) - z.r[0],
        math::norm1(&d_x) - z.r[1],
    ];
    let mu = active_weights(&cert.mu, &f, cert.act_tol);
    let alpha = state.alpha;
    let rho = state.rho;

    let mut fourier = vec![Complex64::new(0.0, 0.0); n];
    let res_val: Vec<Complex64> = data
        .mask_val
        .indices()
        .zip(&data.b_val.samples)
        .map(|(i, b)| spec[i] - b)
        .collect();
    ops.add_adjoint_spectrum(&res_val, &data.mask_val, 1.0, &mut fourier);
    if alpha * mu[1] != 0.0 {
        let res_tr: Vec<Complex64> = data
            .mask_tr
            .indices()
            .zip(&data.b_tr.samples)
            .map(|(i, b)| spec[i] - b)
            .collect();
        ops.add_adjoint_spectrum(&res_tr, &data.mask_tr, alpha * mu[1], &mut fourier);
    }
    let mut e_x = ops.fft.inverse_real(fourier);
    let p = snap(&cert.p, &psi_x, cert.zero_tol);
    let q = snap(&cert.q, &d_x, cert.zero_tol);
    let wp: Vec<f64> = p.iter().map(|a| alpha * mu[2] * a).collect();
    let wq: Vec<f64> = q.iter().map(|a| alpha * mu[3] * a).collect();
    let xp = ops.psi_adjoint(&wp);
    let xq = ops.grad_adjoint(&wq);
    for (i, e) in e_x.iter_mut().enumerate() {
        *e += rho * (z.x.pixels()[i] - state.z_prev.x.pixels()[i]) + xp[i] + xq[i];
    }
    let xi = state.xi();
    let mut e_r = [0.0; 2];
    for i in 0..2 {
        let g = rho * (z.r[i] - state.z_prev.r[i]) + alpha * (mu[1] * xi[i] - mu[2 + i]);
        e_r[i] = if z.r[i] <= 0.0 { g.min(0.0) } else { g };
    }
    let norm = math::sqrt(math::sq(math::norm2(&e_x)) + e_r[0] * e_r[0] + e_r[1] * e_r[1]);
    Ok(Certificate { e_x, e_r, norm, mu })
}

fn snap(dual: &[f64], z: &[f64], zero_tol: f64) -> Vec<f64> {
    dual.iter()
        .zip(z)
        .map(|(&d, &s)| {
            if s > zero_tol {
                1.0
            } else if s < -zero_tol {
                -1.0
            } else {
                d.clamp(-1.0, 1.0)
            }
        })
        .collect()
}

fn active_weights(mu: &[f64; 4], f: &[f64; 4], act_tol: f64) -> [f64; 4] {
    let top = max4(f);
    let mut out = [0.0; 4];
    let mut mass = 0.0;
    for j in 0..4 {
        if f[j] >= top - act_tol && mu[j] > 0.0 {
            out[j] = mu[j];
            mass += mu[j];
        }
    }
    if mass > 0.0 {
        for o in &mut out {
            *o /= mass;
        }
    } else {
        let j = (0..4).fold(0, |b, j| if f[j] > f[b] { j } else { b });
        out[j] = 1.0;
    }
    out
}

fn fid_from_spec(spec: &[Complex64], mask: &SamplingMask, b: &[Complex64]) -> f64 {
    0.5 * mask
        .indices()
        .zip(b)
        .map(|(i, c)| (spec[i] - c).norm_sqr())
        .sum::<f64>()
}

/// Magnitudes sorted in decreasing order with prefix sums, so that
/// `‖soft(t, τ)‖₁` and `‖soft(t, τ) − t‖²` cost `O(log n)` for any `τ`.
struct SortedAbs {
    mags: Vec<f64>,
    pre: Vec<f64>,
    pre_sq: Vec<f64>,
}

impl SortedAbs {
    fn new(t: &[f64]) -> Self {
        let mut mags: Vec<f64> = t.iter().map(|a| a.abs()).collect();
        mags.sort_unstable_by(|a, b| b.total_cmp(a));
        let mut pre = Vec::with_capacity(mags.len() + 1);
        let mut pre_sq = Vec::with_capacity(mags.len() + 1);
        let (mut s, mut s2) = (0.0, 0.0);
        pre.push(0.0);
        pre_sq.push(0.0);
        for &m in &mags {
            s += m;
            s2 += m * m;
            pre.push(s);
            pre_sq.push(s2);
        }
        Self { mags, pre, pre_sq }
    }

    /// `(‖soft(t, τ)‖₁, ‖soft(t, τ) − t‖², nnz)`.
    fn eval(&self, tau: f64) -> (f64, f64, usize) {
        let k = self.mags.partition_point(|&m| m > tau);
        let l1 = self.pre[k] - k as f64 * tau;
        let total_sq = *self.pre_sq.last().unwrap_or(&0.0);
        let sq = k as f64 * tau * tau + (total_sq - self.pre_sq[k]);
        (l1, sq, k)
    }
}

/// Second-block prox in dual form.
struct BlockProx<'a> {
    alpha: f64,
    rho: f64,
    sigma: f64,
    xi: [f64; 2],
    rk: [f64; 2],
    h: f64,
    ts_sq: f64,
    tv: &'a SortedAbs,
    tw: &'a SortedAbs,
}

/// Primal quantities for a fixed `μ`.
#[derive(Debug, Clone, Copy)]
struct ProxEval {
    d: f64,
    f: [f64; 4],
    r: [f64; 2],
    cs: f64,
    nnz: [usize; 2],
}

impl BlockProx<'_> {
    fn eval(&self, mu: &[f64; 4]) -> ProxEval {
        let (a, s) = (self.alpha, self.sigma);
        let cs = s / (s + a * mu[1]);
        let mut r = [0.0; 2];
        for i in 0..2 {
            r[i] = (self.rk[i] - a * (mu[1] * self.xi[i] - mu[2 + i]) / self.rho).max(0.0);
        }
        let (l1v, sqv, nv) = self.tv.eval(a * mu[2] / s);
        let (l1w, sqw, nw) = self.tw.eval(a * mu[3] / s);
        let ftheta = 0.5 * cs * cs * self.ts_sq - self.h
            + self.xi[0] * (r[0] - self.rk[0])
            + self.xi[1] * (r[1] - self.rk[1]);
        let f = [0.0, ftheta, l1v - r[0], l1w - r[1]];
        let dr = math::sq(r[0] - self.rk[0]) + math::sq(r[1] - self.rk[1]);
        let quad = 0.5 * self.rho * dr + 0.5 * s * (math::sq(1.0 - cs) * self.ts_sq + sqv + sqw);
        let d = quad + a * (mu[1] * f[1] + mu[2] * f[2] + mu[3] * f[3]);
        ProxEval {
            d,
            f,
            r,
            cs,
            nnz: [nv, nw],
        }
    }

    /// Hessian of the dual function (negative semidefinite).
    fn hessian(&self, mu: &[f64; 4], ev: &ProxEval) -> [[f64; 4]; 4] {
        let (a, s, rho) = (self.alpha, self.sigma, self.rho);
        let mut h = [[0.0; 4]; 4];
        let on = [ev.r[0] > 0.0, ev.r[1] > 0.0];
        let mut tt = -a * ev.cs * ev.cs * self.ts_sq / (s + a * mu[1]);
        for i in 0..2 {
            if on[i] {
                tt -= a * self.xi[i] * self.xi[i] / rho;
                let c = a * self.xi[i] / rho;
                h[1][2 + i] = a * c;
                h[2 + i][1] = a * c;
            }
            h[2 + i][2 + i] = a * (-(a / s) * ev.nnz[i] as f64 - if on[i] { a / rho } else { 0.0 });
        }
        h[1][1] = a * tt;
        h
    }

    /// Maximizes the dual over the simplex. Returns `μ` and its evaluation.
    fn solve(&self, start: [f64; 4]) -> ([f64; 4], ProxEval) {
        let mut mu = start;
        let mut ev = self.eval(&mu);
        if self.alpha == 0.0 {
            return (mu, ev);
        }
        for _ in 0..60 {
            let top = max4(&ev.f);
            let gap = self.alpha * (top - dot4(&mu, &ev.f));
            let scale = 1e-14 * (1.0 + ev.d.abs() + self.alpha * top.abs());
            if gap <= scale {
                break;
            }
            let g: [f64; 4] = core::array::from_fn(|j| self.alpha * ev.f[j]);
            let h = self.hessian(&mu, &ev);
            let target = newton_face(&g, &h, &mu);
            // Backtracking on the segment towards the QP maximizer; falls back
            // to the best vertex when the quadratic model is poor.
            let mut step = 1.0;
            let mut improved = false;
            for _ in 0..40 {
                let cand: [f64; 4] = core::array::from_fn(|j| mu[j] + step * (target[j] - mu[j]));
                let ce = self.eval(&cand);
                if ce.d > ev.d {
                    mu = cand;
                    ev = ce;
                    improved = true;
                    break;
                }
                step *= 0.5;
            }
            if !improved {
                let j = (0..4).fold(0, |b, j| if ev.f[j] > ev.f[b] { j } else { b });
                let mut best = (mu, ev);
                let mut t = 1.0;
                for _ in 0..60 {
                    let cand: [f64; 4] = core::array::from_fn(|i| (1.0 - t) * mu[i] + if i == j { t } else { 0.0 });
                    let ce = self.eval(&cand);
                    if ce.d > best.1.d {
                        best = (cand, ce);
                        break;
                    }
                    t *= 0.5;
                }
                if best.1.d <= ev.d {
                    break;
                }
                mu = best.0;
                ev = best.1;
            }
        }
        (mu, ev)
    }
}

fn dot4(a: &[f64; 4], b: &[f64; 4]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Maximizer over the simplex of the quadratic model
/// `g·(μ' − μ) + ½(μ' − μ)ᵀH(μ' − μ)`, by enumerating the faces.
fn newton_face(g: &[f64; 4], h: &[[f64; 4]; 4], mu: &[f64; 4]) -> [f64; 4] {
    let scale = h.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    let reg = 1e-10 * scale.max(1e-300) + 1e-300;
    let hmu: [f64; 4] = core::array::from_fn(|i| (0..4).map(|j| h[i][j] * mu[j]).sum::<f64>() - reg * mu[i]);
    let model = |c: &[f64; 4]| {
        let d: [f64; 4] = core::array::from_fn(|i| c[i] - mu[i]);
        let mut v = dot4(g, &d);
        for i in 0..4 {
            for j in 0..4 {
                v += 0.5 * d[i] * (h[i][j] - if i == j { reg } else { 0.0 }) * d[j];
            }
        }
        v
    };
    let mut best = *mu;
    let mut best_val = 0.0;
    for set in 1u32..16 {
        let idx: Vec<usize> = (0..4).filter(|j| set & (1 << j) != 0).collect();
        let k = idx.len();
        // [H_SS  -1][μ_S]   [Hμ − g]_S
        // [1ᵀ     0][ λ ] = [   1   ]
        let mut a = [[0.0; 6]; 5];
        for (r, &i) in idx.iter().enumerate() {
            for (c, &j) in idx.iter().enumerate() {
                a[r][c] = h[i][j] - if i == j { reg } else { 0.0 };
            }
            a[r][k] = -1.0;
            a[r][5] = hmu[i] - g[i];
            a[k][r] = 1.0;
        }
        a[k][5] = 1.0;
        let Some(sol) = solve_small(&mut a, k + 1) else {
            continue;
        };
        if sol[..k].iter().any(|&v| v < -1e-14) {
            continue;
        }
        let mut cand = [0.0; 4];
        let total: f64 = sol[..k].iter().map(|v| v.max(0.0)).sum();
        for (r, &i) in idx.iter().enumerate() {
            cand[i] = sol[r].max(0.0) / total;
        }
        let val = model(&cand);
        if val > best_val {
            best_val = val;
            best = cand;
        }
    }
    best
}

/// Gaussian elimination with partial pivoting on an augmented `n × (n+1)`
/// system stored in the first `n` rows / columns `0..n` plus column 5.
fn solve_small(a: &mut [[f64; 6]; 5], n: usize) -> Option<[f64; 5]> {
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        for row in 0..n {
            if row != col {
                let f = a[row][col] / a[col][col];
                if f != 0.0 {
                    for c in col..n {
                        a[row][c] -= f * a[col][c];
                    }
                    a[row][5] -= f * a[col][5];
                }
            }
        }
    }
    let mut out = [0.0; 5];
    for i in 0..n {
        out[i] = a[i][5] / a[i][i];
        if !out[i].is_finite() {
            return None;
        }
    }
    Some(out)
}

/// Solves the subproblem from `zᵏ`, optionally warm-starting the inner duals.
pub fn solve_subproblem(
    state: &PenaltyState,
    data: &Dataset,
    cfg: &PenaltyConfig,
    warm: Option<&InnerState>,
) -> Result<SubproblemResult> {
    state.validate()?;
    if state.z_prev.x.shape() != data.shape() {
        return Err(Error::mismatch("outer point", data.shape().len(), state.z_prev.x.len()));
    }
    if cfg.max_iter == 0 || cfg.check_every == 0 || !(cfg.sigma > 0.0) {
        return Err(Error::InvalidParameter {
            name: "penalty config",
            reason: "sigma, max_iter and check_every must be positive",
        });
    }
    let target = certificate_target(state, cfg);
    Inner::new(state, data, cfg)?.run(warm, target)
}

struct Inner<'a> {
    state: &'a PenaltyState,
    data: &'a Dataset,
    cfg: &'a PenaltyConfig,
    ops: OperatorSet,
    gram_val: Vec<f64>,
    reg_tr: Vec<f64>,
    fixed_rhs: Vec<Complex64>,
}

impl<'a> Inner<'a> {
    fn new(state: &'a PenaltyState, data: &'a Dataset, cfg: &'a PenaltyConfig) -> Result<Self> {
        let shape = data.shape();
        let ops = OperatorSet::new(shape)?;
        let gram_val = FourierSystem::new(shape)?
            .identity(state.rho)
            .gram(&data.mask_val, 1.0)?
            .symbol()
            .to_vec();
        let reg_tr = FourierSystem::new(shape)?
            .identity(1.0)
            .laplacian(1.0)
            .gram(&data.mask_tr, 1.0)?
            .symbol()
            .to_vec();
        // Φ_valᵀ b_val + ρ xᵏ
        let mut fixed_rhs = ops.fft.forward_real(state.z_prev.x.pixels());
        for c in &mut fixed_rhs {
            *c *= state.rho;
        }
        ops.add_adjoint_spectrum(&data.b_val.samples, &data.mask_val, 1.0, &mut fixed_rhs);
        Ok(Self {
            state,
            data,
            cfg,
            ops,
            gram_val,
            reg_tr,
            fixed_rhs,
        })
    }

    fn symbol(&self, sigma: f64) -> Vec<f64> {
        self.gram_val.iter().zip(&self.reg_tr).map(|(g, r)| g + sigma * r).collect()
    }

    fn run(&self, warm: Option<&InnerState>, target: f64) -> Result<SubproblemResult> {
        let st = self.state;
        let n = self.ops.n();
        let mask_tr = &self.data.mask_tr;
        let b = &self.data.b_tr.samples;
        let m = mask_tr.m();
        let alpha = st.alpha;

        let mut x = st.z_prev.x.pixels().to_vec();
        let spec0 = self.ops.fft.forward_real(&x);
        let mut s: Vec<Complex64> = mask_tr.indices().zip(b).map(|(i, c)| spec0[i] - c).collect();
        let mut v = self.ops.psi(&x);
        let mut w = self.ops.grad(&x);
        let (mut ys, mut yv, mut yw, mut sigma) = match warm {
            Some(ws) if ws.ys.len() == m && ws.yv.len() == n && ws.yw.len() == 2 * n => {
                (ws.ys.clone(), ws.yv.clone(), ws.yw.clone(), ws.sigma)
            }
            _ => (vec![Complex64::new(0.0, 0.0); m], vec![0.0; n], vec![0.0; 2 * n], self.cfg.sigma),
        };
        let mut symbol = self.symbol(sigma);
        let mut mu = [1.0, 0.0, 0.0, 0.0];

        let mut best: Option<(f64, Vec<f64>, [f64; 2], CertificateData)> = None;
        let mut iterations = 0;
        let mut converged = false;
        let mut rebalances = 0;

        for it in 1..=self.cfg.max_iter {
            iterations = it;
            let inv = 1.0 / sigma;
            // x-update
            let mut real_part = self
                .ops
                .psi_adjoint(&v.iter().zip(&yv).map(|(a, y)| sigma * a - y).collect::<Vec<_>>());
            let gt: Vec<f64> = w.iter().zip(&yw).map(|(a, y)| sigma * a - y).collect();
            for (a, c) in real_part.iter_mut().zip(self.ops.grad_adjoint(&gt)) {
                *a += c;
            }
            let mut spec = self.ops.fft.forward_real(&real_part);
            let zs: Vec<Complex64> = s
                .iter()
                .zip(b)
                .zip(&ys)
                .map(|((a, c), y)| (a + c) * sigma - y)
                .collect();
            self.ops.add_adjoint_spectrum(&zs, mask_tr, 1.0, &mut spec);
            for ((c, f), d) in spec.iter_mut().zip(&self.fixed_rhs).zip(&symbol) {
                *c = (*c + f) / *d;
            }
            let phi_x: Vec<Complex64> = mask_tr.indices().zip(b).map(|(i, c)| spec[i] - c).collect();
            x = self.ops.fft.inverse_real(spec);
            let psi_x = self.ops.psi(&x);
            let d_x = self.ops.grad(&x);

            // second block through the simplex dual
            let ts: Vec<Complex64> = phi_x.iter().zip(&ys).map(|(p, y)| p + y * inv).collect();
            let tv: Vec<f64> = psi_x.iter().zip(&yv).map(|(p, y)| p + y * inv).collect();
            let tw: Vec<f64> = d_x.iter().zip(&yw).map(|(p, y)| p + y * inv).collect();
            let (sv, sw) = (SortedAbs::new(&tv), SortedAbs::new(&tw));
            let prox = BlockProx {
                alpha,
                rho: st.rho,
                sigma,
                xi: st.xi(),
                rk: st.z_prev.r,
                h: st.h(),
                ts_sq: cnorm_sq(&ts),
                tv: &sv,
                tw: &sw,
            };
            let (new_mu, ev) = prox.solve(mu);
            mu = new_mu;
            let r = ev.r;
            let (tau_v, tau_w) = (alpha * mu[2] * inv, alpha * mu[3] * inv);
            let s_prev = core::mem::take(&mut s);
            s = ts.iter().map(|t| t * ev.cs).collect();
            let v_prev = core::mem::take(&mut v);
            v = tv.iter().map(|&t| soft(t, tau_v)).collect();
            let w_prev = core::mem::take(&mut w);
            w = tw.iter().map(|&t| soft(t, tau_w)).collect();

            // duals
            let mut prim_sq = 0.0;
            for ((y, p), a) in ys.iter_mut().zip(&phi_x).zip(&s) {
                let res = p - a;
                prim_sq += res.norm_sqr();
                *y += res * sigma;
            }
            let mut max_v: f64 = 0.0;
            for ((y, p), a) in yv.iter_mut().zip(&psi_x).zip(&v) {
                let res = p - a;
                prim_sq += res * res;
                max_v = max_v.max(res.abs());
                *y += sigma * res;
            }
            let mut max_w: f64 = 0.0;
            for ((y, p), a) in yw.iter_mut().zip(&d_x).zip(&w) {
                let res = p - a;
                prim_sq += res * res;
                max_w = max_w.max(res.abs());
                *y += sigma * res;
            }
            let change = math::sqrt(
                s.iter().zip(&s_prev).map(|(a, c)| (a - c).norm_sqr()).sum::<f64>()
                    + math::dist2_sq(&v, &v_prev)
                    + math::dist2_sq(&w, &w_prev),
            );

            if it % self.cfg.check_every == 0 || it == self.cfg.max_iter {
                let p = dual_direction(&yv, alpha * mu[2]);
                let q = dual_direction(&yw, alpha * mu[3]);
                // Gap between branch values measured at x and at the split
                // variables bounds how far activity decisions can be off.
                let drift = [
                    0.5 * (cnorm_sq(&phi_x) - cnorm_sq(&s)).abs(),
                    (math::norm1(&psi_x) - math::norm1(&v)).abs(),
                    (math::norm1(&d_x) - math::norm1(&w)).abs(),
                ];
                let act_tol = 2.0 * drift.iter().fold(0.0f64, |a, d| a.max(*d)) + 1e-12 * (1.0 + max4(&ev.f).abs());
                let data = CertificateData {
                    mu,
                    p,
                    q,
                    zero_tol: max_v.max(max_w),
                    act_tol,
                };
                let z = OuterPoint {
                    x: Image::from_pixels(self.ops.shape, x.clone())?,
                    r,
                };
                let cert = certificate(&z, st, self.data, &data)?;
                if best.as_ref().is_none_or(|b| cert.norm < b.0) {
                    best = Some((cert.norm, x.clone(), r, data));
                }
                if cert.norm <= target {
                    converged = true;
                    break;
                }
            }

            if self.cfg.balance_ratio > 0.0 && it % 10 == 0 && rebalances < self.cfg.balance_limit {
                let kx = math::sqrt(cnorm_sq(&phi_x) + sq(&psi_x) + sq(&d_x));
                let zn = math::sqrt(cnorm_sq(&s) + sq(&v) + sq(&w));
                let yn = math::sqrt(cnorm_sq(&ys) + sq(&yv) + sq(&yw));
                let rp = math::sqrt(prim_sq) / kx.max(zn).max(1e-12);
                let rd = sigma * change / yn.max(1e-12);
                let next = if rp > self.cfg.balance_ratio * rd {
                    sigma * 2.0
                } else if rd > self.cfg.balance_ratio * rp {
                    sigma * 0.5
                } else {
                    sigma
                };
                if next != sigma && (1e-8..=1e8).contains(&next) {
                    sigma = next;
                    symbol = self.symbol(sigma);
                    rebalances += 1;
                }
            }
        }

        let (residual_norm, bx, br, cert) = best.expect("at least one certificate check");
        let z_next = OuterPoint {
            x: Image::from_pixels(self.ops.shape, bx)?,
            r: br,
        };
        let phi_value = eval_phi(&z_next, st, self.data)?;
        Ok(SubproblemResult {
            z_next,
            residual_norm,
            tolerance: target,
            inner_iterations: iterations,
            phi_value,
            converged,
            certificate: cert,
            inner: InnerState { ys, yv, yw, sigma },
        })
    }
}

fn sq(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum()
}

/// `y / c` clipped to `[−1, 1]`; zero when `c = 0`.
fn dual_direction(y: &[f64], c: f64) -> Vec<f64> {
    if c <= 0.0 {
        return vec![0.0; y.len()];
    }
    y.iter().map(|a| (a / c).clamp(-1.0, 1.0)).collect()
}
