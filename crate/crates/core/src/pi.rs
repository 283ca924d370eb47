//! Passive beamforming: the unimodular quadratic program over the lifted RIS
//! phase vector and its power-iteration solver.
//!
//! For fixed `(W, u, λ)` the WMMSE objective is a quadratic in `θ`,
//! `θᴴAθ + βᴴθ + θᴴβ`. Lifting `x = [θ; z]` turns its minimisation into
//! `max xᴴBx` over unit-modulus `x`, which is solved by the fixed-point
//! iteration `x ← exp(j∠(R x))` with `R = B + γI`.

use crate::channel::ChannelSet;
use crate::config::PhaseResolution;
use crate::linalg::{frobenius, hermitian_eigenvalues, unit_phase, wrap_angle, CMat, CVec, ONE};
use crate::{Error, Result, C64};

/// Default inner tolerance and iteration cap used by WMMSE-PI.
pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 200;

/// Relative objective decrease tolerated before a run is declared broken.
const MONOTONE_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticForm {
    /// `N × N` Hermitian PSD.
    pub a: CMat,
    /// Length `N`.
    pub beta: CVec,
    /// `(N+1) × (N+1)` lifted matrix `[[−A, −β], [−βᴴ, 0]]`.
    pub b: CMat,
    /// Diagonal loading, `‖B‖_F` by default.
    pub gamma: f64,
}

impl QuadraticForm {
    pub fn from_parts(a: CMat, beta: CVec) -> Self {
        let b = lifted_matrix(&a, &beta);
        let gamma = frobenius(&b);
        QuadraticForm { a, beta, b, gamma }
    }

    /// `R = B + γI`.
    pub fn r(&self) -> CMat {
        loaded(&self.b, self.gamma)
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    /// `θᴴAθ + βᴴθ + θᴴβ`, the θ-dependent part of the WMMSE objective.
    pub fn passive_objective(&self, theta: &CVec) -> f64 {
        let at = &self.a * theta;
        theta.dotc(&at).re + 2.0 * self.beta.dotc(theta).re
    }
}

/// `B + γI`.
pub fn loaded(b: &CMat, gamma: f64) -> CMat {
    let mut r = b.clone();
    for i in 0..r.nrows() {
        r[(i, i)] += gamma;
    }
    r
}

pub fn lifted_matrix(a: &CMat, beta: &CVec) -> CMat {
    let n = a.nrows();
    let mut b = CMat::zeros(n + 1, n + 1);
    b.view_mut((0, 0), (n, n)).copy_from(&(-a));
    for i in 0..n {
        b[(i, n)] = -beta[i];
        b[(n, i)] = -beta[i].conj();
    }
    b
}

/// Assembles `A`, `β` and `B` for fixed `(W, u, λ)` on `channels`.
pub fn build_quadratic(channels: &ChannelSet, w: &CMat, u: &[C64], lambda: &[f64]) -> Result<QuadraticForm> {
    let (n, m, k) = (channels.n(), channels.m(), channels.k());
    if w.nrows() != m || w.ncols() != k || u.len() != k || lambda.len() != k {
        return Err(Error::Dimension(format!(
            "W {:?}, u {}, lambda {} for M={m}, K={k}",
            w.shape(),
            u.len(),
            lambda.len()
        )));
    }
    let mut a = CMat::zeros(n, n);
    let mut beta = CVec::zeros(n);
    for j in 0..k {
        let weight = channels.alpha[j] * lambda[j];
        if weight == 0.0 {
            continue;
        }
        // T = H_r,j W so that H_r,j (Σ w_i w_iᴴ) H_r,jᴴ = T Tᴴ
        let t = &channels.h_cas[j] * w;
        let c = weight * u[j].norm_sqr();
        a.gemm(C64::from(c), &t, &t.adjoint(), ONE);
        let hd_w = w.tr_mul(&channels.h_d[j]).conjugate();
        beta.gemv(C64::from(c), &t, &hd_w, ONE);
        beta.axpy(-u[j].conj() * weight, &t.column(j), ONE);
    }
    Ok(QuadraticForm::from_parts(a, beta))
}

/// `Re(xᴴ R x)`.
pub fn objective(x: &CVec, r: &CMat) -> f64 {
    x.dotc(&(r * x)).re
}

/// One power-iteration step `x ← exp(j∠(R x))`; entries where `R x`
/// vanishes keep their previous phase.
pub fn pi_step(x: &CVec, r: &CMat) -> CVec {
    let y = r * x;
    CVec::from_fn(x.len(), |i, _| unit_phase(y[i], x[i]))
}

/// Convergence evidence for one power-iteration run.
#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    /// The objective never dropped by more than the slack.
    pub monotone: bool,
    /// `‖R x̄ − |R x̄| ∘ x̄‖_∞`.
    pub stationarity_residual: f64,
    /// Every iterate stayed below `Σ|R_ij|`.
    pub within_bound: bool,
    pub bound: f64,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PiOutcome {
    pub x: CVec,
    pub iterations: usize,
    pub certificate: Certificate,
    /// Objective after every step, starting with the initial point.
    pub trace: Vec<f64>,
}

pub fn stationarity_residual(x: &CVec, r: &CMat) -> f64 {
    let y = r * x;
    y.iter()
        .zip(x.iter())
        .map(|(yi, xi)| (yi - xi * yi.norm()).norm())
        .fold(0.0, f64::max)
}

/// Smallest eigenvalue of `diag(|R x̄|) − R`; nonnegative at a local optimum.
pub fn local_optimality_margin(x: &CVec, r: &CMat) -> f64 {
    let y = r * x;
    let mut d = -r.clone();
    for i in 0..y.len() {
        d[(i, i)] += y[i].norm();
    }
    hermitian_eigenvalues(&d).first().copied().unwrap_or(0.0)
}

/// `Σ_ij |R_ij|`.
pub fn objective_bound(r: &CMat) -> f64 {
    r.iter().map(|z| z.norm()).sum()
}

/// Iterates [`pi_step`] on the loaded matrix of `quad`.
pub fn pi_solve(quad: &QuadraticForm, x0: &CVec, max_iter: usize, tol: f64) -> Result<PiOutcome> {
    pi_solve_matrix(&quad.r(), x0, max_iter, tol)
}

/// Iterates [`pi_step`] until the relative objective change falls below
/// `tol` or `max_iter` steps have run.
pub fn pi_solve_matrix(r: &CMat, x0: &CVec, max_iter: usize, tol: f64) -> Result<PiOutcome> {
    if r.nrows() != x0.len() || r.ncols() != x0.len() {
        return Err(Error::Dimension(format!("R is {:?}, x0 has {}", r.shape(), x0.len())));
    }
    let bound = objective_bound(r);
    let bound_slack = 1e-12 * bound.max(f64::MIN_POSITIVE);
    let mut x = x0.clone();
    let mut f = objective(&x, r);
    let mut trace = vec![f];
    let mut within_bound = f <= bound + bound_slack;
    let mut iterations = 0;
    for step in 1..=max_iter {
        let next = pi_step(&x, r);
        let f_next = objective(&next, r);
        let scale = f.abs().max(f_next.abs()).max(f64::MIN_POSITIVE);
        if f_next < f - MONOTONE_SLACK * scale {
            return Err(Error::MonotonicityViolation {
                step,
                drop: (f - f_next) / scale,
            });
        }
        within_bound &= f_next <= bound + bound_slack;
        trace.push(f_next);
        let change = (f_next - f).abs();
        x = next;
        f = f_next;
        iterations = step;
        if change <= tol * scale {
            break;
        }
    }
    let certificate = Certificate {
        monotone: true,
        stationarity_residual: stationarity_residual(&x, r),
        within_bound,
        bound,
        objective: f,
    };
    Ok(PiOutcome {
        x,
        iterations,
        certificate,
        trace,
    })
}

/// `θ = x*_{N+1} · x[1:N]`.
pub fn extract_theta(x: &CVec) -> CVec {
    let n = x.len().saturating_sub(1);
    if x.is_empty() {
        return CVec::zeros(0);
    }
    let z = x[n].conj();
    CVec::from_fn(n, |i, _| unit_phase(x[i] * z, ONE))
}

/// Maps each phase to the nearest point of the `2^B` grid (wrap-around
/// distance, ties toward the lower grid phase).
pub fn quantize_hard(theta: &CVec, bits: u32) -> CVec {
    let levels = 1u64 << bits;
    let step = std::f64::consts::TAU / levels as f64;
    theta.map(|z| {
        let phi = if z.norm() == 0.0 { 0.0 } else { wrap_angle(z.arg()) };
        let q = phi / step;
        let lower = q.floor();
        let idx = if q - lower > 0.5 { lower + 1.0 } else { lower };
        let idx = (idx as u64) % levels;
        C64::from_polar(1.0, idx as f64 * step)
    })
}

/// Applies the hard quantizer for `res`; identity for continuous phases.
pub fn quantize(theta: &CVec, res: PhaseResolution) -> CVec {
    match res {
        PhaseResolution::Continuous => theta.clone(),
        PhaseResolution::Bits(b) => quantize_hard(theta, b),
    }
}

/// Smooth staircase `Q(φ) = (π/2^B) Σ_{l=1}^{2^B} [tanh(η(φ − 2πl/2^B)) + 1]`.
pub fn quantize_soft_phase(phi: f64, bits: u32, eta: f64) -> f64 {
    let levels = 1u64 << bits;
    let step = std::f64::consts::TAU / levels as f64;
    let half = std::f64::consts::PI / levels as f64;
    (1..=levels)
        .map(|l| (eta * (phi - step * l as f64)).tanh() + 1.0)
        .sum::<f64>()
        * half
}

pub fn quantize_soft(phases: &[f64], bits: u32, eta: f64) -> Vec<f64> {
    phases.iter().map(|&p| quantize_soft_phase(p, bits, eta)).collect()
}

/// Soft quantization of unit-modulus phases.
pub fn quantize_soft_theta(theta: &CVec, bits: u32, eta: f64) -> CVec {
    theta.map(|z| {
        let phi = if z.norm() == 0.0 { 0.0 } else { wrap_angle(z.arg()) };
        C64::from_polar(1.0, quantize_soft_phase(phi, bits, eta))
    })
}

/// True when every entry lies on the `2^B` grid to within `tol` radians.
pub fn on_grid(theta: &CVec, bits: u32, tol: f64) -> bool {
    let step = std::f64::consts::TAU / (1u64 << bits) as f64;
    theta.iter().all(|z| {
        let q = wrap_angle(z.arg()) / step;
        let d = (q - q.round()).abs() * step;
        (z.norm() - 1.0).abs() < 1e-12 && d <= tol
    })
}
