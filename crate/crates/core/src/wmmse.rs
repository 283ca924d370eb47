//! Active beamforming: the WMMSE block updates and rate evaluation.
//!
//! All routines take the combined channels `h_k = h_d,k + θᴴ H_r,k` as
//! plain vectors of the row entries, `W` as an `M × K` matrix whose columns
//! are the user beamformers, and the power budget in watts. Rates are in
//! bits/s/Hz.

use crate::channel::{combined_channel, ChannelSet};
use crate::linalg::{solve_hermitian, vec_norm_sqr, CMat, CVec, ONE, ZERO};
use crate::{Error, Result, C64};

/// The full iterate of the alternating algorithm.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamformerState {
    /// `M × K` active beamformers.
    pub w: CMat,
    /// RIS phases, length `N`.
    pub theta: CVec,
    /// Receive gains.
    pub u: Vec<C64>,
    /// MSE weights.
    pub lambda: Vec<f64>,
    /// Lifted phase vector `[θ; z]` of length `N + 1`.
    pub x: CVec,
}

impl BeamformerState {
    pub fn new(w: CMat, theta: CVec) -> Self {
        let k = w.ncols();
        let x = lift(&theta);
        BeamformerState {
            w,
            theta,
            u: vec![ZERO; k],
            lambda: vec![1.0; k],
            x,
        }
    }

    pub fn is_unit_modulus(&self, tol: f64) -> bool {
        self.theta.iter().all(|z| (z.norm() - 1.0).abs() <= tol)
    }

    pub fn is_power_feasible(&self, pt: f64) -> bool {
        total_power(&self.w) <= pt * (1.0 + 1e-9) + 1e-9 * pt
    }
}

/// `[θ; 1]`.
pub fn lift(theta: &CVec) -> CVec {
    let mut x = CVec::from_element(theta.len() + 1, ONE);
    x.rows_mut(0, theta.len()).copy_from(theta);
    x
}

/// `Σ_k ‖w_k‖²`.
pub fn total_power(w: &CMat) -> f64 {
    w.iter().map(|z| z.norm_sqr()).sum()
}

/// `h w` without conjugation.
#[inline]
fn hw(h: &CVec, w: &CMat, col: usize) -> C64 {
    h.dot(&w.column(col))
}

/// Achievable rate of user `k` in bits/s/Hz.
pub fn rate(h_k: &CVec, w: &CMat, k: usize, sigma2_k: f64) -> f64 {
    let mut signal = 0.0;
    let mut interference = 0.0;
    for i in 0..w.ncols() {
        let g = hw(h_k, w, i).norm_sqr();
        if i == k {
            signal = g;
        } else {
            interference += g;
        }
    }
    (1.0 + signal / (interference + sigma2_k)).log2()
}

pub fn rates(h: &[CVec], w: &CMat, sigma2: &[f64]) -> Vec<f64> {
    h.iter().enumerate().map(|(k, hk)| rate(hk, w, k, sigma2[k])).collect()
}

/// Weighted sum rate on already-combined channels.
pub fn wsr_combined(h: &[CVec], w: &CMat, alpha: &[f64], sigma2: &[f64]) -> f64 {
    rates(h, w, sigma2).iter().zip(alpha).map(|(r, a)| a * r).sum()
}

/// Weighted sum rate `Σ α_k R_k` for beamformers `w` and RIS phases `theta`.
pub fn wsr(channels: &ChannelSet, w: &CMat, theta: &CVec) -> Result<f64> {
    check_w(channels.k(), channels.m(), w)?;
    let h = combined_channel(channels, theta)?;
    Ok(wsr_combined(&h, w, &channels.alpha, &channels.sigma2))
}

fn check_w(k: usize, m: usize, w: &CMat) -> Result<()> {
    if w.shape() != (m, k) {
        return Err(Error::Dimension(format!("W is {:?}, expected ({m}, {k})", w.shape())));
    }
    Ok(())
}

/// Equivalent MSE `e_k` including the auxiliary power term.
pub fn mse(h_k: &CVec, w: &CMat, k: usize, u_k: C64, sigma2_k: f64, pt: f64) -> f64 {
    let hwk = hw(h_k, w, k);
    let gain: f64 = (0..w.ncols()).map(|i| hw(h_k, w, i).norm_sqr()).sum();
    let cross = 2.0 * (u_k.conj() * hwk).re;
    1.0 - cross + u_k.norm_sqr() * gain + sigma2_k / pt * u_k.norm_sqr() * total_power(w)
}

/// WMMSE objective `Σ α_k (λ_k e_k − ln λ_k)`.
pub fn p3_objective(h: &[CVec], w: &CMat, u: &[C64], lambda: &[f64], alpha: &[f64], sigma2: &[f64], pt: f64) -> f64 {
    (0..h.len())
        .map(|k| alpha[k] * (lambda[k] * mse(&h[k], w, k, u[k], sigma2[k], pt) - lambda[k].ln()))
        .sum()
}

/// Receive gains minimising each `e_k` for fixed `W`.
pub fn update_u(h: &[CVec], w: &CMat, sigma2: &[f64], pt: f64) -> Result<Vec<C64>> {
    let power = total_power(w);
    h.iter()
        .enumerate()
        .map(|(k, hk)| {
            let gain: f64 = (0..w.ncols()).map(|i| hw(hk, w, i).norm_sqr()).sum();
            let denom = gain + sigma2[k] / pt * power;
            if !(denom > 0.0) || !denom.is_finite() {
                return Err(Error::ZeroDenominator("receive gain update"));
            }
            Ok(hw(hk, w, k) / denom)
        })
        .collect()
}

/// MSE weights `λ_k = (1 − u_k* h_k w_k)⁻¹`, real part kept.
pub fn update_lambda(u: &[C64], h: &[CVec], w: &CMat) -> Result<Vec<f64>> {
    u.iter()
        .zip(h)
        .enumerate()
        .map(|(k, (uk, hk))| {
            let v = ONE - uk.conj() * hw(hk, w, k);
            if v.norm() == 0.0 || !v.re.is_finite() {
                return Err(Error::ZeroDenominator("MSE weight update"));
            }
            let lam = v.inv();
            if lam.im.abs() > 1e-6 * lam.norm().max(1.0) {
                log::warn!("lambda[{k}] has imaginary residual {:.3e}", lam.im);
            }
            Ok(lam.re)
        })
        .collect()
}

/// Closed-form beamformers for fixed `(u, λ)`:
/// `w_k = α_k u_k λ_k (Σ_i α_i|u_i|²λ_i((σ_i²/P_T) I + h_iᴴh_i))⁻¹ h_kᴴ`.
pub fn update_w(u: &[C64], lambda: &[f64], h: &[CVec], alpha: &[f64], sigma2: &[f64], pt: f64) -> Result<CMat> {
    let k = h.len();
    let m = h.first().map_or(0, |v| v.len());
    let mut mat = CMat::zeros(m, m);
    for i in 0..k {
        let c = alpha[i] * u[i].norm_sqr() * lambda[i];
        if c == 0.0 {
            continue;
        }
        let hc = h[i].conjugate();
        mat.ger(C64::from(c), &hc, &h[i], ONE);
        for d in 0..m {
            mat[(d, d)] += c * sigma2[i] / pt;
        }
    }
    let mut rhs = CMat::zeros(m, k);
    for j in 0..k {
        let s = u[j] * (alpha[j] * lambda[j]);
        rhs.set_column(j, &(h[j].conjugate() * s));
    }
    solve_hermitian(&mat, &rhs, "beamformer update")
}

/// Rescales `W` so that `Σ_k ‖w_k‖² = P_T`.
pub fn scale_power(w: &CMat, pt: f64) -> Result<CMat> {
    let p = total_power(w);
    if !(p > 0.0) || !p.is_finite() {
        return Err(Error::ZeroDenominator("power scaling of an all-zero W"));
    }
    Ok(w * C64::from((pt / p).sqrt()))
}

/// One `u → λ → W` sweep. Returns `(u, λ, W)` with `W` unscaled.
pub fn sweep(h: &[CVec], w: &CMat, alpha: &[f64], sigma2: &[f64], pt: f64) -> Result<(Vec<C64>, Vec<f64>, CMat)> {
    let u = update_u(h, w, sigma2, pt)?;
    let lambda = update_lambda(&u, h, w)?;
    let w_new = update_w(&u, &lambda, h, alpha, sigma2, pt)?;
    Ok((u, lambda, w_new))
}

/// Zero-forcing beamformers `Hᴴ(HHᴴ)⁻¹` with equal per-user power summing
/// to `P_T`. Falls back to matched-filter columns `h_kᴴ` when `K > M` or the
/// stacked channel is rank deficient.
pub fn zf_init(h: &[CVec], pt: f64) -> CMat {
    let k = h.len();
    let m = h.first().map_or(0, |v| v.len());
    let stacked = CMat::from_fn(k, m, |r, c| h[r][c]);
    let gram = &stacked * stacked.adjoint();
    let zf = if k <= m && crate::linalg::condition_number(&gram) < 1e12 {
        solve_hermitian(&gram, &CMat::identity(k, k), "zero forcing")
            .ok()
            .map(|inv| stacked.adjoint() * inv)
    } else {
        None
    };
    let mut w = zf.unwrap_or_else(|| stacked.adjoint());
    let per_user = (pt / k as f64).sqrt();
    for mut col in w.column_iter_mut() {
        let n = col.norm();
        if n > 0.0 {
            col *= C64::from(per_user / n);
        }
    }
    w
}

/// Which user index scales the Gram terms in [`structured_w`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ZetaIndex {
    /// `Σ_i ζ_i h_iᴴ h_i`.
    #[default]
    Summand,
    /// `Σ_i ζ_k h_iᴴ h_i`, the literal alternative.
    Target,
}

/// Beamformers with the optimal-structure parameterisation
/// `w_k = √p_k · normalize((σ² I + Σ_i ζ_i h_iᴴh_i)⁻¹ h_kᴴ)`.
pub fn structured_w(p: &[f64], zeta: &[f64], h: &[CVec], sigma2: f64) -> Result<CMat> {
    structured_w_with(p, zeta, h, sigma2, ZetaIndex::Summand)
}

pub fn structured_w_with(p: &[f64], zeta: &[f64], h: &[CVec], sigma2: f64, index: ZetaIndex) -> Result<CMat> {
    let k = h.len();
    if p.len() != k || zeta.len() != k {
        return Err(Error::Dimension(format!("p/zeta length {} / {} for {k} users", p.len(), zeta.len())));
    }
    if !(sigma2 > 0.0) {
        return Err(Error::InvalidParameter("sigma2 must be positive".into()));
    }
    let m = h.first().map_or(0, |v| v.len());
    // divide through by σ² for conditioning; the direction is unchanged
    let gram = |scale: &dyn Fn(usize) -> f64| {
        let mut mat = CMat::identity(m, m);
        for i in 0..k {
            mat.ger(C64::from(scale(i) / sigma2), &h[i].conjugate(), &h[i], ONE);
        }
        mat
    };
    let mut w = CMat::zeros(m, k);
    match index {
        ZetaIndex::Summand => {
            let mat = gram(&|i| zeta[i]);
            let rhs = CMat::from_fn(m, k, |r, c| h[c][r].conj());
            let dirs = solve_hermitian(&mat, &rhs, "structured beamformer")?;
            for c in 0..k {
                set_scaled(&mut w, c, dirs.column(c).into_owned(), p[c]);
            }
        }
        ZetaIndex::Target => {
            for c in 0..k {
                let mat = gram(&|_| zeta[c]);
                let rhs = CMat::from_fn(m, 1, |r, _| h[c][r].conj());
                let dir = solve_hermitian(&mat, &rhs, "structured beamformer")?;
                set_scaled(&mut w, c, dir.column(0).into_owned(), p[c]);
            }
        }
    }
    Ok(w)
}

fn set_scaled(w: &mut CMat, col: usize, dir: CVec, power: f64) {
    let n = vec_norm_sqr(&dir).sqrt();
    if n > 0.0 {
        w.set_column(col, &(dir * C64::from(power.max(0.0).sqrt() / n)));
    }
}

/// Runs up to `max_sweeps` scaled WMMSE sweeps on fixed combined channels,
/// stopping once the relative change of the WMMSE objective drops below
/// `tol`. Returns the final state pieces.
pub fn wmmse_fixed_theta(
    h: &[CVec],
    w0: &CMat,
    alpha: &[f64],
    sigma2: &[f64],
    pt: f64,
    max_sweeps: usize,
    tol: f64,
) -> Result<(Vec<C64>, Vec<f64>, CMat)> {
    let mut w = w0.clone();
    let mut u = vec![ZERO; h.len()];
    let mut lambda = vec![1.0; h.len()];
    let mut prev = f64::INFINITY;
    for _ in 0..max_sweeps {
        let (u1, l1, w1) = sweep(h, &w, alpha, sigma2, pt)?;
        let obj = p3_objective(h, &w1, &u1, &l1, alpha, sigma2, pt);
        u = u1;
        lambda = l1;
        w = scale_power(&w1, pt)?;
        if prev.is_finite() && (prev - obj).abs() <= tol * obj.abs().max(1e-300) {
            break;
        }
        prev = obj;
    }
    Ok((u, lambda, w))
}
