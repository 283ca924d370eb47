//! Channel realisations for the RIS-assisted downlink.
//!
//! The AP–RIS link `G` and the RIS–user links `h_r,k` are Rician: a fixed
//! line-of-sight part built from array steering vectors plus a Rayleigh part.
//! The direct AP–user links `h_d,k` are pure Rayleigh. Path loss multiplies
//! the normalised fading as an amplitude factor.
//!
//! Array geometry: the AP is a half-wavelength ULA along the y-axis. The RIS
//! is an `n1 × n2` half-wavelength UPA (`n1` the largest divisor of `N` not
//! above `√N`) whose horizontal axis is also parallel to y; elevation is zero
//! everywhere so only the horizontal index carries phase.

use std::f64::consts::PI;

use rand::Rng;

use crate::config::{db_to_amplitude, direct_path_loss_db, ris_path_loss_db, SystemConfig};
use crate::linalg::{CMat, CVec};
use crate::rng::{complex_gaussian, gaussian_matrix, gaussian_vector};
use crate::{Error, Result, C64};

/// Line-of-sight part of one scenario sample: everything that stays fixed
/// while the Rayleigh components are redrawn.
#[derive(Debug, Clone, PartialEq)]
pub struct LosComponents {
    pub user_pos: Vec<[f64; 2]>,
    /// `N × M`, unit-modulus entries.
    pub g_los: CMat,
    /// `K` row vectors of length `N`, unit-modulus entries.
    pub h_los_r: Vec<CVec>,
    /// Amplitude path-loss coefficient of `G`.
    pub l1: f64,
    /// Amplitude path-loss coefficients of `h_r,k`.
    pub l2: Vec<f64>,
    /// Amplitude path-loss coefficients of `h_d,k`.
    pub ld: Vec<f64>,
    /// Direct-link path loss in dB, used for user priorities.
    pub direct_pl_db: Vec<f64>,
}

impl LosComponents {
    pub fn m(&self) -> usize {
        self.g_los.ncols()
    }

    pub fn n(&self) -> usize {
        self.g_los.nrows()
    }

    pub fn k(&self) -> usize {
        self.user_pos.len()
    }
}

/// Normalised random components a [`ChannelSet`] was composed from.
#[derive(Debug, Clone, PartialEq)]
pub struct FadingParts {
    pub g_los: CMat,
    pub h_los_r: Vec<CVec>,
    pub g_nlos: CMat,
    pub h_nlos_r: Vec<CVec>,
    pub h_d_fading: Vec<CVec>,
    pub l1: f64,
    pub l2: Vec<f64>,
    pub ld: Vec<f64>,
    pub kappa: f64,
}

/// One channel realisation.
///
/// Row vectors (`h_r,k`, `h_d,k`) are stored as plain vectors of their
/// entries; no conjugation is implied by the storage.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    /// AP→RIS, `N × M`.
    pub g: CMat,
    /// RIS→user `k`, length `N`.
    pub h_r: Vec<CVec>,
    /// AP→user `k`, length `M`.
    pub h_d: Vec<CVec>,
    /// Cascaded channels `diag(h_r,k) G`, each `N × M`.
    pub h_cas: Vec<CMat>,
    pub alpha: Vec<f64>,
    /// Noise variances in watts.
    pub sigma2: Vec<f64>,
    pub user_pos: Vec<[f64; 2]>,
    pub parts: Option<FadingParts>,
}

impl ChannelSet {
    /// Builds a channel set directly from its links, computing the cascaded
    /// channels. Without fading parts the whole of each link is treated as
    /// its random component by [`corrupt_channels`].
    pub fn from_links(g: CMat, h_r: Vec<CVec>, h_d: Vec<CVec>, alpha: Vec<f64>, sigma2: Vec<f64>) -> Result<Self> {
        let (n, m) = g.shape();
        let k = h_d.len();
        if h_r.len() != k || alpha.len() != k || sigma2.len() != k {
            return Err(Error::Dimension(format!(
                "per-user lengths differ: h_r {}, h_d {}, alpha {}, sigma2 {}",
                h_r.len(),
                k,
                alpha.len(),
                sigma2.len()
            )));
        }
        if h_r.iter().any(|h| h.len() != n) || h_d.iter().any(|h| h.len() != m) {
            return Err(Error::Dimension(format!("links inconsistent with G of shape {n}x{m}")));
        }
        if alpha.iter().any(|&a| !(a >= 0.0)) || sigma2.iter().any(|&s| !(s > 0.0)) {
            return Err(Error::InvalidParameter("alpha must be >= 0 and sigma2 > 0".into()));
        }
        let h_cas = h_r.iter().map(|hr| cascade(hr, &g)).collect();
        Ok(ChannelSet {
            g,
            h_r,
            h_d,
            h_cas,
            alpha,
            sigma2,
            user_pos: vec![[0.0, 0.0]; k],
            parts: None,
        })
    }

    pub fn m(&self) -> usize {
        self.g.ncols()
    }

    pub fn n(&self) -> usize {
        self.g.nrows()
    }

    pub fn k(&self) -> usize {
        self.h_d.len()
    }

    /// Largest `‖H_r,k − diag(h_r,k) G‖_F` over users.
    pub fn cascade_defect(&self) -> f64 {
        self.h_r
            .iter()
            .zip(&self.h_cas)
            .map(|(hr, hc)| crate::linalg::frobenius(&(hc - cascade(hr, &self.g))))
            .fold(0.0, f64::max)
    }

    /// The same channels with users reordered by `perm` (`new[i] = old[perm[i]]`).
    pub fn permuted(&self, perm: &[usize]) -> ChannelSet {
        let pick = |v: &Vec<CVec>| perm.iter().map(|&i| v[i].clone()).collect::<Vec<_>>();
        ChannelSet {
            g: self.g.clone(),
            h_r: pick(&self.h_r),
            h_d: pick(&self.h_d),
            h_cas: perm.iter().map(|&i| self.h_cas[i].clone()).collect(),
            alpha: perm.iter().map(|&i| self.alpha[i]).collect(),
            sigma2: perm.iter().map(|&i| self.sigma2[i]).collect(),
            user_pos: perm.iter().map(|&i| self.user_pos[i]).collect(),
            parts: None,
        }
    }
}

/// A channel set seen through imperfect CSI.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelEstimate {
    pub channels: ChannelSet,
    pub varrho: f64,
}

/// `diag(h_r) G`.
pub fn cascade(h_r: &CVec, g: &CMat) -> CMat {
    let mut out = g.clone();
    for (mut row, &s) in out.row_iter_mut().zip(h_r.iter()) {
        row *= s;
    }
    out
}

/// Half-wavelength array response `exp(jπ i s)` for `len` elements, where
/// `s` is the direction sine along the array axis.
fn array_response(len: usize, s: f64) -> CVec {
    CVec::from_fn(len, |i, _| C64::from_polar(1.0, PI * i as f64 * s))
}

/// Horizontal extent of the RIS planar array.
pub fn ris_dims(n: usize) -> (usize, usize) {
    if n == 0 {
        return (0, 0);
    }
    let mut n1 = 1;
    let mut d = 1;
    while d * d <= n {
        if n.is_multiple_of(d) {
            n1 = d;
        }
        d += 1;
    }
    (n1, n / n1)
}

/// RIS response; the element index is `a * n2 + b` with `a` horizontal.
fn ris_response(n: usize, s: f64) -> CVec {
    let (_, n2) = ris_dims(n);
    CVec::from_fn(n, |i, _| {
        let a = (i / n2.max(1)) as f64;
        C64::from_polar(1.0, PI * a * s)
    })
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Sine of the direction from `from` to `to` along the y-axis.
fn y_sine(from: [f64; 2], to: [f64; 2]) -> f64 {
    let d = dist(from, to);
    if d == 0.0 {
        0.0
    } else {
        (to[1] - from[1]) / d
    }
}

/// Draws user positions and builds the line-of-sight components.
pub fn sample_los<R: Rng + ?Sized>(config: &SystemConfig, rng: &mut R) -> Result<LosComponents> {
    let (m, n, k) = (config.m, config.n, config.k);
    let user_pos: Vec<[f64; 2]> = (0..k)
        .map(|_| {
            let r = config.user_radius * rng.random::<f64>().sqrt();
            let phi = rng.random::<f64>() * std::f64::consts::TAU;
            [config.user_center[0] + r * phi.cos(), config.user_center[1] + r * phi.sin()]
        })
        .collect();

    let d_ap_ris = dist(config.ap_pos, config.ris_pos);
    if n > 0 && d_ap_ris <= 0.0 {
        return Err(Error::DegenerateGeometry("AP and RIS coincide".into()));
    }
    let l1 = if n > 0 { db_to_amplitude(ris_path_loss_db(d_ap_ris)) } else { 0.0 };
    let a_dep = array_response(m, y_sine(config.ap_pos, config.ris_pos));
    let a_arr = ris_response(n, y_sine(config.ris_pos, config.ap_pos));
    let g_los = &a_arr * a_dep.adjoint();

    let mut h_los_r = Vec::with_capacity(k);
    let mut l2 = Vec::with_capacity(k);
    let mut ld = Vec::with_capacity(k);
    let mut direct_pl_db = Vec::with_capacity(k);
    for &pos in &user_pos {
        let d_ris = dist(config.ris_pos, pos);
        let d_ap = dist(config.ap_pos, pos);
        if d_ap <= 0.0 || (n > 0 && d_ris <= 0.0) {
            return Err(Error::DegenerateGeometry(format!("user at {pos:?} coincides with AP or RIS")));
        }
        h_los_r.push(ris_response(n, y_sine(config.ris_pos, pos)).conjugate());
        l2.push(if n > 0 { db_to_amplitude(ris_path_loss_db(d_ris)) } else { 0.0 });
        let pl = direct_path_loss_db(d_ap);
        ld.push(db_to_amplitude(pl));
        direct_pl_db.push(pl);
    }
    Ok(LosComponents {
        user_pos,
        g_los,
        h_los_r,
        l1,
        l2,
        ld,
        direct_pl_db,
    })
}

/// Mixing weights `(√(κ/(κ+1)), √(1/(κ+1)))`.
pub fn rician_weights(kappa: f64) -> (f64, f64) {
    if kappa.is_infinite() {
        (1.0, 0.0)
    } else {
        ((kappa / (kappa + 1.0)).sqrt(), (1.0 / (kappa + 1.0)).sqrt())
    }
}

fn compose(parts: FadingParts, alpha: Vec<f64>, sigma2: Vec<f64>, user_pos: Vec<[f64; 2]>) -> ChannelSet {
    let (wl, wn) = rician_weights(parts.kappa);
    let g = (&parts.g_los * C64::from(wl) + &parts.g_nlos * C64::from(wn)) * C64::from(parts.l1);
    let h_r: Vec<CVec> = parts
        .h_los_r
        .iter()
        .zip(&parts.h_nlos_r)
        .zip(&parts.l2)
        .map(|((los, nlos), &l)| (los * C64::from(wl) + nlos * C64::from(wn)) * C64::from(l))
        .collect();
    let h_d: Vec<CVec> = parts
        .h_d_fading
        .iter()
        .zip(&parts.ld)
        .map(|(h, &l)| h * C64::from(l))
        .collect();
    let h_cas = h_r.iter().map(|hr| cascade(hr, &g)).collect();
    ChannelSet {
        g,
        h_r,
        h_d,
        h_cas,
        alpha,
        sigma2,
        user_pos,
        parts: Some(parts),
    }
}

/// Draws the Rayleigh components for one realisation of `los`.
///
/// Draw order: `G_NLOS` row-major, then each user's `h_NLOS,r`, then each
/// user's direct-link fading.
pub fn sample_channels<R: Rng + ?Sized>(los: &LosComponents, config: &SystemConfig, rng: &mut R) -> Result<ChannelSet> {
    let (m, n, k) = (los.m(), los.n(), los.k());
    if m != config.m || n != config.n || k != config.k {
        return Err(Error::Dimension(format!(
            "LOS sample is {m}x{k}x{n} (M,K,N) but config is {}x{}x{}",
            config.m, config.k, config.n
        )));
    }
    let g_nlos = gaussian_matrix(rng, n, m);
    let h_nlos_r: Vec<CVec> = (0..k).map(|_| gaussian_vector(rng, n)).collect();
    let h_d_fading: Vec<CVec> = (0..k).map(|_| gaussian_vector(rng, m)).collect();
    let alpha = priorities_from_path_loss(&los.direct_pl_db)?;
    let sigma2 = vec![config.noise_power_w(); k];
    let parts = FadingParts {
        g_los: los.g_los.clone(),
        h_los_r: los.h_los_r.clone(),
        g_nlos,
        h_nlos_r,
        h_d_fading,
        l1: los.l1,
        l2: los.l2.clone(),
        ld: los.ld.clone(),
        kappa: config.kappa,
    };
    Ok(compose(parts, alpha, sigma2, los.user_pos.clone()))
}

/// Priorities proportional to the inverse linear path loss of the direct
/// links, normalised to sum to `K`.
pub fn priorities_from_path_loss(pl_db: &[f64]) -> Result<Vec<f64>> {
    if pl_db.is_empty() {
        return Ok(Vec::new());
    }
    if pl_db.iter().any(|p| !p.is_finite()) {
        return Err(Error::DegenerateGeometry("non-finite path loss".into()));
    }
    let min = pl_db.iter().copied().fold(f64::INFINITY, f64::min);
    let w: Vec<f64> = pl_db.iter().map(|p| 10f64.powf(-(p - min) / 10.0)).collect();
    let total: f64 = w.iter().sum();
    let k = pl_db.len() as f64;
    Ok(w.iter().map(|x| x * k / total).collect())
}

/// Priorities from AP–user distances in metres.
pub fn compute_priorities(distances: &[f64]) -> Result<Vec<f64>> {
    if let Some(d) = distances.iter().find(|d| !(**d > 0.0)) {
        return Err(Error::DegenerateGeometry(format!("user distance {d}")));
    }
    let pl: Vec<f64> = distances.iter().map(|&d| direct_path_loss_db(d)).collect();
    priorities_from_path_loss(&pl)
}

fn mix<R: Rng + ?Sized>(v: &CVec, keep: f64, noise: f64, rng: &mut R) -> CVec {
    v.map(|z| z * keep + complex_gaussian(rng) * noise)
}

/// Estimated channels under NMSE `varrho`: each Rayleigh component becomes
/// `√(1/(ϱ+1))·true + √(ϱ/(ϱ+1))·Z`; line-of-sight parts are exact.
///
/// The noise is drawn even when `varrho == 0` so downstream draws from `rng`
/// do not depend on `varrho`.
pub fn corrupt_channels<R: Rng + ?Sized>(truth: &ChannelSet, varrho: f64, rng: &mut R) -> Result<ChannelEstimate> {
    if !(varrho >= 0.0) || !varrho.is_finite() {
        return Err(Error::InvalidParameter(format!("varrho must be finite and >= 0, got {varrho}")));
    }
    let keep = (1.0 / (varrho + 1.0)).sqrt();
    let noise = (varrho / (varrho + 1.0)).sqrt();
    let corrupted = match &truth.parts {
        Some(p) => {
            let g_nlos = p.g_nlos.map(|z| z * keep + complex_gaussian(rng) * noise);
            let h_nlos_r: Vec<CVec> = p.h_nlos_r.iter().map(|h| mix(h, keep, noise, rng)).collect();
            let h_d_fading: Vec<CVec> = p.h_d_fading.iter().map(|h| mix(h, keep, noise, rng)).collect();
            let parts = FadingParts {
                g_nlos,
                h_nlos_r,
                h_d_fading,
                ..p.clone()
            };
            compose(parts, truth.alpha.clone(), truth.sigma2.clone(), truth.user_pos.clone())
        }
        None => {
            let g = truth.g.map(|z| z * keep + complex_gaussian(rng) * noise);
            let h_r: Vec<CVec> = truth.h_r.iter().map(|h| mix(h, keep, noise, rng)).collect();
            let h_d: Vec<CVec> = truth.h_d.iter().map(|h| mix(h, keep, noise, rng)).collect();
            let mut set = ChannelSet::from_links(g, h_r, h_d, truth.alpha.clone(), truth.sigma2.clone())?;
            set.user_pos = truth.user_pos.clone();
            set
        }
    };
    let channels = if varrho == 0.0 { truth.clone() } else { corrupted };
    Ok(ChannelEstimate { channels, varrho })
}

/// Combined channels `h_k = h_d,k + θᴴ H_r,k`.
pub fn combined_channel(channels: &ChannelSet, theta: &CVec) -> Result<Vec<CVec>> {
    if theta.len() != channels.n() {
        return Err(Error::Dimension(format!(
            "theta has {} entries, RIS has {}",
            theta.len(),
            channels.n()
        )));
    }
    let theta_conj = theta.conjugate();
    Ok(channels
        .h_d
        .iter()
        .zip(&channels.h_cas)
        .map(|(hd, hc)| hd + hc.tr_mul(&theta_conj))
        .collect())
}
