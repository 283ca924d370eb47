//! End-to-end solvers: alternating WMMSE-PI, its unfolded forward passes,
//! the two-timescale imperfect-CSI variant, and evaluation helpers.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;

use crate::channel::{combined_channel, corrupt_channels, sample_channels, ChannelEstimate, ChannelSet, LosComponents};
use crate::config::{PhaseResolution, SystemConfig};
use crate::learn::gnn::{gnn_features, gnn_forward, GnnParams};
use crate::learn::TrainableParams;
use crate::linalg::{frobenius, unit_phase, CMat, CVec, ONE};
use crate::pi::{self, build_quadratic, extract_theta, loaded, pi_solve, pi_step, quantize_hard, quantize_soft_theta};
use crate::rng::{random_phases, split};
use crate::wmmse::{
    lift, scale_power, structured_w, sweep, update_lambda, update_u, update_w, wmmse_fixed_theta, wsr, zf_init,
    BeamformerState,
};
use crate::{Error, Result, C64};

/// Sweep budget and stopping tolerance used when evaluating a fixed `θ`.
pub const EVAL_SWEEPS: usize = 20;
pub const EVAL_TOL: f64 = 1e-6;
/// Sweeps used by the random-phase baseline.
pub const BASELINE_SWEEPS: usize = 50;
/// Soft-quantization sharpness during training.
pub const TRAIN_ETA: f64 = 100.0;

/// Scenario-level knobs the solvers need.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    /// Power budget in watts.
    pub pt: f64,
    pub phase: PhaseResolution,
    pub pi_tol: f64,
    pub pi_max_iter: usize,
}

impl SolveOptions {
    pub fn from_config(config: &SystemConfig) -> Self {
        SolveOptions {
            pt: config.pt_w(),
            phase: config.phase_bits,
            pi_tol: pi::DEFAULT_TOL,
            pi_max_iter: pi::DEFAULT_MAX_ITER,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub final_state: BeamformerState,
    /// Weighted sum rate of the returned `(W, θ)`.
    pub wsr: f64,
    /// WSR after each outer iteration, before quantization.
    pub wsr_trace: Vec<f64>,
    /// Power-iteration steps per outer iteration.
    pub inner_iterations: Vec<usize>,
    pub wall_time: f64,
}

/// Which unfolded network to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnfoldMode {
    /// Learned `γ⁽ⁱ⁾`, conventional initialisation only.
    Pinet,
    /// Adds the `γ⁽⁰⁾` passive step and GNN active initialisation.
    PinetPlus,
}

/// Final phase quantizer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum QuantMode {
    /// Nearest grid point (inference).
    Hard,
    /// Smooth staircase of sharpness `eta` (training).
    Soft { eta: f64 },
}

impl QuantMode {
    fn apply(self, theta: &CVec, res: PhaseResolution) -> CVec {
        match (res, self) {
            (PhaseResolution::Continuous, _) => theta.clone(),
            (PhaseResolution::Bits(b), QuantMode::Hard) => quantize_hard(theta, b),
            (PhaseResolution::Bits(b), QuantMode::Soft { eta }) => quantize_soft_theta(theta, b, eta),
        }
    }
}

/// Algorithms selectable from the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Algo {
    WmmsePi,
    Pinet,
    PinetPlus,
    PinetImcsi,
    RandomPhase,
}

impl Algo {
    pub const ALL: [Algo; 5] = [Algo::WmmsePi, Algo::Pinet, Algo::PinetPlus, Algo::PinetImcsi, Algo::RandomPhase];

    pub fn name(self) -> &'static str {
        match self {
            Algo::WmmsePi => "wmmse-pi",
            Algo::Pinet => "pinet",
            Algo::PinetPlus => "pinet-plus",
            Algo::PinetImcsi => "pinet-imcsi",
            Algo::RandomPhase => "random-phase",
        }
    }

    pub fn is_learned(self) -> bool {
        matches!(self, Algo::Pinet | Algo::PinetPlus | Algo::PinetImcsi)
    }
}

impl fmt::Display for Algo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algo {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algo::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown algorithm `{s}`")))
    }
}

fn check_channels(channels: &ChannelSet) -> Result<()> {
    if channels.k() == 0 {
        return Err(Error::Empty("user set"));
    }
    if channels.m() == 0 {
        return Err(Error::Dimension("no transmit antennas".into()));
    }
    Ok(())
}

fn finish(
    channels: &ChannelSet,
    state: BeamformerState,
    wsr_trace: Vec<f64>,
    inner_iterations: Vec<usize>,
    start: Instant,
) -> Result<SolveReport> {
    let wsr = wsr(channels, &state.w, &state.theta)?;
    Ok(SolveReport {
        final_state: state,
        wsr,
        wsr_trace,
        inner_iterations,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

/// Quantizes `theta`, then one `(u, λ) → W` update with power scaling.
fn quantize_and_polish(
    channels: &ChannelSet,
    mut state: BeamformerState,
    res: PhaseResolution,
    quant: QuantMode,
    pt: f64,
) -> Result<BeamformerState> {
    state.theta = quant.apply(&state.theta, res);
    state.x = lift(&state.theta);
    let h = combined_channel(channels, &state.theta)?;
    let (u, lambda, w) = sweep(&h, &state.w, &channels.alpha, &channels.sigma2, pt)?;
    state.u = u;
    state.lambda = lambda;
    state.w = scale_power(&w, pt)?;
    Ok(state)
}

/// Random `θ`, ZF `W`, then one unscaled `(u, λ) → W` update.
fn conventional_init<R: Rng + ?Sized>(channels: &ChannelSet, pt: f64, rng: &mut R) -> Result<(BeamformerState, Vec<CVec>)> {
    let theta = random_phases(rng, channels.n());
    let h = combined_channel(channels, &theta)?;
    let w0 = zf_init(&h, pt);
    let (u, lambda, w) = sweep(&h, &w0, &channels.alpha, &channels.sigma2, pt)?;
    let mut state = BeamformerState::new(w, theta);
    state.u = u;
    state.lambda = lambda;
    Ok((state, h))
}

/// Alternating WMMSE-PI: `i_o` outer iterations of `(u, λ)`, a power
/// iteration run to convergence for `θ`, and a scaled `W` update, followed by
/// hard quantization and one polishing update.
pub fn wmmse_pi<R: Rng + ?Sized>(channels: &ChannelSet, opts: &SolveOptions, i_o: usize, rng: &mut R) -> Result<SolveReport> {
    check_channels(channels)?;
    let start = Instant::now();
    let pt = opts.pt;
    let (mut state, _) = conventional_init(channels, pt, rng)?;
    let mut trace = Vec::with_capacity(i_o);
    let mut inner = Vec::with_capacity(i_o);
    for _ in 0..i_o {
        let h = combined_channel(channels, &state.theta)?;
        state.u = update_u(&h, &state.w, &channels.sigma2, pt)?;
        state.lambda = update_lambda(&state.u, &h, &state.w)?;
        let quad = build_quadratic(channels, &state.w, &state.u, &state.lambda)?;
        let out = pi_solve(&quad, &lift(&state.theta), opts.pi_max_iter, opts.pi_tol)?;
        inner.push(out.iterations);
        state.theta = extract_theta(&out.x);
        state.x = out.x;
        let h = combined_channel(channels, &state.theta)?;
        let w = update_w(&state.u, &state.lambda, &h, &channels.alpha, &channels.sigma2, pt)?;
        state.w = scale_power(&w, pt)?;
        trace.push(wsr(channels, &state.w, &state.theta)?);
    }
    let state = quantize_and_polish(channels, state, opts.phase, QuantMode::Hard, pt)?;
    finish(channels, state, trace, inner, start)
}

/// WMMSE on the direct link structure with `θ` held at `theta`: the same
/// initialisation and update schedule as [`wmmse_pi`] without the passive
/// step, `i_o + 2` sweeps after ZF in total.
pub fn wmmse_plain(channels: &ChannelSet, theta: &CVec, opts: &SolveOptions, i_o: usize) -> Result<SolveReport> {
    check_channels(channels)?;
    let start = Instant::now();
    let pt = opts.pt;
    let h = combined_channel(channels, theta)?;
    let w0 = zf_init(&h, pt);
    let (_, _, mut w) = sweep(&h, &w0, &channels.alpha, &channels.sigma2, pt)?;
    let mut trace = Vec::with_capacity(i_o);
    for _ in 0..=i_o {
        let (_, _, w1) = sweep(&h, &w, &channels.alpha, &channels.sigma2, pt)?;
        w = scale_power(&w1, pt)?;
        if trace.len() < i_o {
            trace.push(wsr(channels, &w, theta)?);
        }
    }
    let state = BeamformerState::new(w, theta.clone());
    finish(channels, state, trace, vec![0; i_o], start)
}

/// One power-iteration step on `B/‖B‖_F + γI`. A vanishing `B` leaves `x`
/// unchanged.
pub fn learned_pi_step(b: &CMat, x: &CVec, gamma: f64) -> CVec {
    let f = frobenius(b);
    if !(f > 0.0) || !f.is_finite() {
        return x.clone();
    }
    let r = loaded(&(b * C64::from(1.0 / f)), gamma);
    pi_step(x, &r)
}

/// Learned passive update from the current iterate.
fn learned_theta(channels: &ChannelSet, state: &BeamformerState, gamma: f64) -> Result<CVec> {
    let quad = build_quadratic(channels, &state.w, &state.u, &state.lambda)?;
    let x = learned_pi_step(&quad.b, &lift(&state.theta), gamma);
    Ok(extract_theta(&x))
}

/// Active beamformers from the GNN's power and regularisation split.
pub fn gnn_init_w(channels: &ChannelSet, state: &BeamformerState, gnn: &GnnParams, pt: f64) -> Result<CMat> {
    let theta_conj = state.theta.conjugate();
    let h_ris: Vec<CVec> = channels.h_cas.iter().map(|hc| hc.tr_mul(&theta_conj)).collect();
    let sigma2 = channels.sigma2[0];
    let feats = gnn_features(&channels.h_d, &h_ris, &state.u, &state.lambda, &channels.alpha, sigma2, pt);
    let (p, zeta) = gnn_forward(gnn, &feats, pt)?;
    let h: Vec<CVec> = channels.h_d.iter().zip(&h_ris).map(|(d, r)| d + r).collect();
    structured_w(&p, &zeta, &h, sigma2)
}

/// Conventional initialisation, and for PINet⁺ also the `γ⁽⁰⁾` passive
/// step and GNN beamformers.
fn unfolded_init<R: Rng + ?Sized>(
    channels: &ChannelSet,
    params: &TrainableParams,
    mode: UnfoldMode,
    pt: f64,
    rng: &mut R,
) -> Result<BeamformerState> {
    let (mut state, _) = conventional_init(channels, pt, rng)?;
    if mode == UnfoldMode::PinetPlus {
        state.theta = learned_theta(channels, &state, params.gammas[0])?;
        state.x = lift(&state.theta);
        state.w = gnn_init_w(channels, &state, &params.gnn, pt)?;
    }
    Ok(state)
}

fn check_params(channels: &ChannelSet, params: &TrainableParams, i_o: usize) -> Result<()> {
    if params.m() != channels.m() {
        return Err(Error::Dimension(format!(
            "parameters are for M = {}, channels have M = {}",
            params.m(),
            channels.m()
        )));
    }
    if params.i_o() != i_o {
        return Err(Error::Dimension(format!(
            "parameters unroll {} iterations, {} requested",
            params.i_o(),
            i_o
        )));
    }
    Ok(())
}

/// Forward pass of the unfolded network: one learned power-iteration step per
/// outer iteration.
pub fn wmmse_pinet_forward<R: Rng + ?Sized>(
    channels: &ChannelSet,
    params: &TrainableParams,
    opts: &SolveOptions,
    i_o: usize,
    mode: UnfoldMode,
    quant: QuantMode,
    rng: &mut R,
) -> Result<SolveReport> {
    check_channels(channels)?;
    check_params(channels, params, i_o)?;
    let start = Instant::now();
    let pt = opts.pt;
    let mut state = unfolded_init(channels, params, mode, pt, rng)?;
    let mut trace = Vec::with_capacity(i_o);
    for i in 1..=i_o {
        let h = combined_channel(channels, &state.theta)?;
        state.u = update_u(&h, &state.w, &channels.sigma2, pt)?;
        state.lambda = update_lambda(&state.u, &h, &state.w)?;
        state.theta = learned_theta(channels, &state, params.gammas[i])?;
        state.x = lift(&state.theta);
        let h = combined_channel(channels, &state.theta)?;
        let w = update_w(&state.u, &state.lambda, &h, &channels.alpha, &channels.sigma2, pt)?;
        state.w = scale_power(&w, pt)?;
        trace.push(wsr(channels, &state.w, &state.theta)?);
    }
    let state = quantize_and_polish(channels, state, opts.phase, quant, pt)?;
    finish(channels, state, trace, vec![1; i_o], start)
}

/// Running state of the two-timescale passive update.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoTimescaleState {
    /// Recursive surrogate of the lifted matrix, zero initially.
    pub b_tilde: CMat,
    pub theta: CVec,
    pub i: usize,
}

impl TwoTimescaleState {
    pub fn new(theta: CVec) -> Self {
        let n = theta.len();
        TwoTimescaleState {
            b_tilde: CMat::zeros(n + 1, n + 1),
            theta,
            i: 0,
        }
    }

    /// `B̃ ← (1 − ρ) B̃ + ρ B`.
    pub fn absorb(&mut self, b: &CMat, rho: f64) {
        self.b_tilde = &self.b_tilde * C64::from(1.0 - rho) + b * C64::from(rho);
    }

    /// `θ ← (1 − δ) θ + δ θ̄`, projected back to unit modulus (zero entries
    /// take phase 0).
    pub fn blend(&mut self, theta_bar: &CVec, delta: f64) {
        let mixed = &self.theta * C64::from(1.0 - delta) + theta_bar * C64::from(delta);
        self.theta = mixed.map(|z| unit_phase(z, ONE));
        self.i += 1;
    }
}

/// Output of the imperfect-CSI network.
#[derive(Debug, Clone, PartialEq)]
pub struct ImcsiReport {
    pub theta: CVec,
    /// Passive iterate after initialisation and each outer iteration.
    pub theta_trace: Vec<CVec>,
    pub wall_time: f64,
}

/// Two-timescale forward pass over `stream` (`I_O + 1` estimated channel
/// groups): initialise as PINet⁺ on the first group, then per group update
/// `W` on the combined channel through the current `θ`, fold the new lifted
/// matrix into `B̃`, take one learned power-iteration step and blend.
pub fn wmmse_pinet_imcsi<R: Rng + ?Sized>(
    stream: &[ChannelEstimate],
    params: &TrainableParams,
    opts: &SolveOptions,
    quant: QuantMode,
    rng: &mut R,
) -> Result<ImcsiReport> {
    let first = stream.first().ok_or(Error::Empty("channel stream"))?;
    let i_o = stream.len() - 1;
    check_channels(&first.channels)?;
    check_params(&first.channels, params, i_o)?;
    if params.rhos.len() != i_o || params.deltas.len() != i_o {
        return Err(Error::Dimension(format!(
            "{} rho / {} delta values for {i_o} iterations",
            params.rhos.len(),
            params.deltas.len()
        )));
    }
    let start = Instant::now();
    let pt = opts.pt;
    let mut state = unfolded_init(&first.channels, params, UnfoldMode::PinetPlus, pt, rng)?;
    let mut tts = TwoTimescaleState::new(state.theta.clone());
    let mut trace = vec![tts.theta.clone()];
    for (i, est) in stream.iter().enumerate().skip(1) {
        let ch = &est.channels;
        let h = combined_channel(ch, &tts.theta)?;
        state.u = update_u(&h, &state.w, &ch.sigma2, pt)?;
        state.lambda = update_lambda(&state.u, &h, &state.w)?;
        let w = update_w(&state.u, &state.lambda, &h, &ch.alpha, &ch.sigma2, pt)?;
        state.w = scale_power(&w, pt)?;
        let b = build_quadratic(ch, &state.w, &state.u, &state.lambda)?.b;
        tts.absorb(&b, params.rhos[i - 1]);
        let x_bar = learned_pi_step(&tts.b_tilde, &lift(&tts.theta), params.gammas[i]);
        tts.blend(&extract_theta(&x_bar), params.deltas[i - 1]);
        trace.push(tts.theta.clone());
    }
    Ok(ImcsiReport {
        theta: quant.apply(&tts.theta, opts.phase),
        theta_trace: trace,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

/// True channel groups and their estimates for one imperfect-CSI episode.
#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    pub truths: Vec<ChannelSet>,
    pub stream: Vec<ChannelEstimate>,
}

/// Draws `len` true channel groups on `los`, then their estimates under NMSE
/// `varrho`. All truths are drawn before any estimation noise, so episodes
/// sharing a seed share their truths across `varrho`.
pub fn draw_episode<R: Rng + ?Sized>(
    los: &LosComponents,
    config: &SystemConfig,
    len: usize,
    varrho: f64,
    rng: &mut R,
) -> Result<Episode> {
    let truths = (0..len)
        .map(|_| sample_channels(los, config, rng))
        .collect::<Result<Vec<_>>>()?;
    let stream = truths
        .iter()
        .map(|t| corrupt_channels(t, varrho, rng))
        .collect::<Result<Vec<_>>>()?;
    Ok(Episode { truths, stream })
}

/// WSR of `theta` on one channel group with `W` from WMMSE sweeps.
pub fn wsr_fixed_theta(channels: &ChannelSet, theta: &CVec, pt: f64, sweeps: usize, tol: f64) -> Result<f64> {
    let h = combined_channel(channels, theta)?;
    let w0 = zf_init(&h, pt);
    let (_, _, w) = wmmse_fixed_theta(&h, &w0, &channels.alpha, &channels.sigma2, pt, sweeps, tol)?;
    wsr(channels, &w, theta)
}

/// Mean WSR of `theta` over `pool`, evaluated in parallel and summed in
/// order.
pub fn avg_wsr_on(theta: &CVec, pool: &[ChannelSet], pt: f64, sweeps: usize) -> Result<f64> {
    if pool.is_empty() {
        return Err(Error::Empty("evaluation pool"));
    }
    let vals = pool
        .par_iter()
        .map(|ch| wsr_fixed_theta(ch, theta, pt, sweeps, EVAL_TOL))
        .collect::<Result<Vec<_>>>()?;
    Ok(vals.iter().sum::<f64>() / vals.len() as f64)
}

/// Mean WSR of `theta` over `n_samples` fresh fading draws on `los`. Sample
/// `i` uses the stream `split(seed, i)`.
pub fn avg_wsr(
    theta: &CVec,
    los: &LosComponents,
    config: &SystemConfig,
    n_samples: usize,
    sweeps: usize,
    seed: u64,
) -> Result<f64> {
    let pool = (0..n_samples as u64)
        .map(|i| sample_channels(los, config, &mut split(seed, i)))
        .collect::<Result<Vec<_>>>()?;
    avg_wsr_on(theta, &pool, config.pt_w(), sweeps)
}

/// Uniformly random phases (quantized when the RIS is discrete) with `W`
/// from [`BASELINE_SWEEPS`] WMMSE sweeps.
pub fn random_phase_baseline<R: Rng + ?Sized>(channels: &ChannelSet, opts: &SolveOptions, rng: &mut R) -> Result<SolveReport> {
    check_channels(channels)?;
    let start = Instant::now();
    let theta = pi::quantize(&random_phases(rng, channels.n()), opts.phase);
    let h = combined_channel(channels, &theta)?;
    let w0 = zf_init(&h, opts.pt);
    let (u, lambda, w) = wmmse_fixed_theta(&h, &w0, &channels.alpha, &channels.sigma2, opts.pt, BASELINE_SWEEPS, 0.0)?;
    let mut state = BeamformerState::new(w, theta);
    state.u = u;
    state.lambda = lambda;
    finish(channels, state, Vec::new(), Vec::new(), start)
}
