//! The five verbs as library functions, so they can be driven from tests.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use risbeam::channel::{sample_channels, LosComponents};
use risbeam::dataset::Dataset;
use risbeam::learn::{train, Hyper, TrainOutcome};
use risbeam::linalg::{CMat, CVec};
use risbeam::rng::split;
use risbeam::solvers::{
    avg_wsr_on, draw_episode, random_phase_baseline, wmmse_pi, wmmse_pinet_forward, wmmse_pinet_imcsi, Algo,
    QuantMode, SolveOptions, EVAL_SWEEPS,
};
use risbeam::{PhaseResolution, SystemConfig, TrainableParams, UnfoldMode, Variant};

use crate::error::{CliError, CliResult};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Trained parameters per learned algorithm.
pub type Checkpoints = BTreeMap<Algo, TrainableParams>;

pub fn variant_of(algo: Algo) -> Option<Variant> {
    match algo {
        Algo::Pinet => Some(Variant::Pinet),
        Algo::PinetPlus => Some(Variant::PinetPlus),
        Algo::PinetImcsi => Some(Variant::PinetImcsi),
        _ => None,
    }
}

/// Parameters for `algo` unrolled to `i_o` iterations.
fn params_for(algo: Algo, ckpts: &Checkpoints, m: usize, i_o: usize) -> CliResult<Option<TrainableParams>> {
    let Some(variant) = variant_of(algo) else {
        return Ok(None);
    };
    let p = ckpts
        .get(&algo)
        .ok_or_else(|| CliError::Usage(format!("{algo} needs a checkpoint (--checkpoint {algo}=<path>)")))?;
    if p.variant != variant {
        return Err(CliError::Usage(format!("checkpoint for {algo} holds {} parameters", p.variant)));
    }
    if p.m() != m {
        return Err(CliError::Data(format!("checkpoint is for M = {}, scenario has M = {m}", p.m())));
    }
    Ok(Some(if p.i_o() == i_o { p.clone() } else { p.resized(i_o) }))
}

/// Everything one solve on one sample produces.
#[derive(Debug, Clone)]
pub struct SampleOutcome {
    pub wsr: f64,
    pub wall_time: f64,
    pub theta: CVec,
    /// Beamformers, absent for the imperfect-CSI algorithm (which returns
    /// only phases).
    pub w: Option<CMat>,
    pub wsr_trace: Vec<f64>,
}

/// Solves sample `index` of a dataset. Fading (and, under imperfect CSI, the
/// estimation noise) and the solver's random initialisation come from
/// `split(seed, index)` in that order.
#[allow(clippy::too_many_arguments)]
pub fn solve_sample(
    los: &LosComponents,
    config: &SystemConfig,
    algo: Algo,
    i_o: usize,
    seed: u64,
    index: usize,
    params: Option<&TrainableParams>,
    varrho: f64,
) -> CliResult<SampleOutcome> {
    let opts = SolveOptions::from_config(config);
    let mut rng = split(seed, index as u64);
    let imperfect = algo == Algo::PinetImcsi || varrho > 0.0;
    if imperfect {
        // long-term design on estimates, judged on the true channels
        let ep = draw_episode(los, config, i_o + 1, varrho, &mut rng)?;
        let start = Instant::now();
        let theta = match algo {
            Algo::PinetImcsi => {
                let p = params.ok_or_else(|| CliError::Usage("pinet-imcsi needs parameters".into()))?;
                wmmse_pinet_imcsi(&ep.stream, p, &opts, QuantMode::Hard, &mut rng)?.theta
            }
            _ => solve_perfect(&ep.stream[0].channels, &opts, algo, i_o, params, &mut rng)?.0,
        };
        let wall_time = start.elapsed().as_secs_f64();
        let wsr = avg_wsr_on(&theta, &ep.truths, opts.pt, EVAL_SWEEPS)?;
        return Ok(SampleOutcome {
            wsr,
            wall_time,
            theta,
            w: None,
            wsr_trace: Vec::new(),
        });
    }
    let channels = sample_channels(los, config, &mut rng)?;
    let start = Instant::now();
    let (theta, report) = solve_perfect(&channels, &opts, algo, i_o, params, &mut rng)?;
    let wall_time = start.elapsed().as_secs_f64();
    Ok(SampleOutcome {
        wsr: report.wsr,
        wall_time,
        theta,
        w: Some(report.final_state.w),
        wsr_trace: report.wsr_trace,
    })
}

fn solve_perfect(
    channels: &risbeam::ChannelSet,
    opts: &SolveOptions,
    algo: Algo,
    i_o: usize,
    params: Option<&TrainableParams>,
    rng: &mut risbeam::rng::SimRng,
) -> CliResult<(CVec, risbeam::SolveReport)> {
    let need = || CliError::Usage(format!("{algo} needs parameters"));
    let report = match algo {
        Algo::WmmsePi => wmmse_pi(channels, opts, i_o, rng)?,
        Algo::RandomPhase => random_phase_baseline(channels, opts, rng)?,
        Algo::Pinet => wmmse_pinet_forward(channels, params.ok_or_else(need)?, opts, i_o, UnfoldMode::Pinet, QuantMode::Hard, rng)?,
        Algo::PinetPlus => {
            wmmse_pinet_forward(channels, params.ok_or_else(need)?, opts, i_o, UnfoldMode::PinetPlus, QuantMode::Hard, rng)?
        }
        Algo::PinetImcsi => return Err(CliError::Usage("pinet-imcsi solves from estimated channel streams".into())),
    };
    Ok((report.final_state.theta.clone(), report))
}

// ---------------------------------------------------------------- gen

pub fn cmd_gen(config: &SystemConfig, count: usize, seed: u64, out: &Path) -> CliResult<Dataset> {
    let data = Dataset::generate(config, count, seed)?;
    data.save(out)?;
    Ok(data)
}

// ---------------------------------------------------------------- solve

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveRow {
    pub sample: usize,
    pub algo: String,
    pub i_o: usize,
    pub varrho: f64,
    pub wsr: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_time_s: Option<f64>,
    pub seed: u64,
    pub dataset_seed: u64,
    pub config: String,
}

#[derive(Debug, Clone, Serialize)]
struct ReportRecord<'a> {
    sample: usize,
    algo: &'a str,
    wsr: f64,
    wsr_trace: &'a [f64],
    /// `[re, im]` pairs.
    theta: Vec<[f64; 2]>,
    /// `M × K`, row-major `[re, im]` pairs.
    w: Option<Vec<[f64; 2]>>,
}

#[derive(Debug, Clone)]
pub struct SolveSpec {
    pub algo: Algo,
    pub i_o: usize,
    pub seed: u64,
    pub varrho: f64,
    /// Include wall-clock columns (makes output run-dependent).
    pub timing: bool,
}

/// One solve per dataset sample; rows come back in sample order.
pub fn cmd_solve(
    data: &Dataset,
    spec: &SolveSpec,
    ckpts: &Checkpoints,
    csv_out: Option<&Path>,
    report_out: Option<&Path>,
) -> CliResult<(Vec<SolveRow>, Vec<SampleOutcome>)> {
    if data.is_empty() {
        return Err(CliError::Data("dataset has no samples".into()));
    }
    let params = params_for(spec.algo, ckpts, data.config.m, spec.i_o)?;
    let outcomes = data
        .samples
        .par_iter()
        .enumerate()
        .map(|(i, los)| solve_sample(los, &data.config, spec.algo, spec.i_o, spec.seed, i, params.as_ref(), spec.varrho))
        .collect::<CliResult<Vec<_>>>()?;
    let config = serde_json::to_string(&data.config)?;
    let rows: Vec<SolveRow> = outcomes
        .iter()
        .enumerate()
        .map(|(i, o)| SolveRow {
            sample: i,
            algo: spec.algo.to_string(),
            i_o: spec.i_o,
            varrho: spec.varrho,
            wsr: o.wsr,
            wall_time_s: spec.timing.then_some(o.wall_time),
            seed: spec.seed,
            dataset_seed: data.seed,
            config: config.clone(),
        })
        .collect();
    if let Some(path) = csv_out {
        write_csv(path, &rows)?;
    }
    if let Some(path) = report_out {
        let recs: Vec<ReportRecord> = outcomes
            .iter()
            .enumerate()
            .map(|(i, o)| ReportRecord {
                sample: i,
                algo: spec.algo.name(),
                wsr: o.wsr,
                wsr_trace: &o.wsr_trace,
                theta: o.theta.iter().map(|z| [z.re, z.im]).collect(),
                w: o.w.as_ref().map(|w| {
                    (0..w.nrows())
                        .flat_map(|r| (0..w.ncols()).map(move |c| (r, c)))
                        .map(|rc| [w[rc].re, w[rc].im])
                        .collect()
                }),
            })
            .collect();
        std::fs::write(path, serde_json::to_string_pretty(&recs)?)?;
    }
    Ok((rows, outcomes))
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

// ---------------------------------------------------------------- train

#[derive(Debug, Clone, Serialize)]
struct TraceRow {
    step: usize,
    epoch: usize,
    loss: f64,
    heldout: Option<f64>,
    variant: String,
    seed: u64,
    dataset_seed: u64,
    config: String,
}

/// Trains `variant`, writes the best parameters to `checkpoint_out` and the
/// per-step loss trace to `trace_out`.
pub fn cmd_train(
    data: &Dataset,
    heldout: Option<&Dataset>,
    variant: Variant,
    hyper: &Hyper,
    init: Option<TrainableParams>,
    checkpoint_out: &Path,
    trace_out: Option<&Path>,
) -> CliResult<TrainOutcome> {
    let out = train(data, heldout, variant, hyper, init)?;
    out.params.save(checkpoint_out)?;
    if let Some(path) = trace_out {
        let config = serde_json::to_string(&data.config)?;
        let rows: Vec<TraceRow> = out
            .trace
            .iter()
            .map(|r| TraceRow {
                step: r.step,
                epoch: r.epoch,
                loss: r.loss,
                heldout: r.heldout,
                variant: variant.to_string(),
                seed: hyper.seed,
                dataset_seed: data.seed,
                config: config.clone(),
            })
            .collect();
        write_csv(path, &rows)?;
    }
    Ok(out)
}

// ---------------------------------------------------------------- sweep

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Iterations,
    Power,
    Users,
    Elements,
    Rician,
    Bits,
    Nmse,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::Iterations => "iterations",
            Axis::Power => "power",
            Axis::Users => "users",
            Axis::Elements => "elements",
            Axis::Rician => "rician",
            Axis::Bits => "bits",
            Axis::Nmse => "nmse",
        }
    }

    /// Whether `algo` can be run along this axis.
    pub fn supports(self, algo: Algo) -> bool {
        match self {
            Axis::Nmse => matches!(algo, Algo::PinetImcsi | Algo::WmmsePi | Algo::RandomPhase),
            _ => algo != Algo::PinetImcsi,
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Axis {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        Ok(match s {
            "iterations" => Axis::Iterations,
            "power" => Axis::Power,
            "users" => Axis::Users,
            "elements" => Axis::Elements,
            "rician" => Axis::Rician,
            "bits" => Axis::Bits,
            "nmse" => Axis::Nmse,
            other => return Err(CliError::Usage(format!("unknown sweep axis `{other}`"))),
        })
    }
}

/// A sweep point as written, e.g. `3`, `12.5` or `inf`.
#[derive(Debug, Clone, PartialEq)]
pub struct AxisValue {
    pub label: String,
    pub value: f64,
}

impl FromStr for AxisValue {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        let s = s.trim();
        let value = if s.eq_ignore_ascii_case("inf") {
            f64::INFINITY
        } else {
            s.parse::<f64>().map_err(|_| CliError::Usage(format!("bad sweep value `{s}`")))?
        };
        Ok(AxisValue {
            label: s.to_string(),
            value,
        })
    }
}

fn as_count(v: &AxisValue, axis: Axis) -> CliResult<usize> {
    if v.value.is_finite() && v.value >= 0.0 && v.value.fract() == 0.0 {
        Ok(v.value as usize)
    } else {
        Err(CliError::Usage(format!("{axis} needs whole numbers, got `{}`", v.label)))
    }
}

/// The scenario, unroll depth and CSI error at one sweep point.
pub fn apply_axis(
    base: &SystemConfig,
    i_o: usize,
    varrho: f64,
    axis: Axis,
    v: &AxisValue,
) -> CliResult<(SystemConfig, usize, f64)> {
    let mut cfg = base.clone();
    let mut i_o = i_o;
    let mut varrho = varrho;
    match axis {
        Axis::Iterations => i_o = as_count(v, axis)?,
        Axis::Power => cfg = cfg.with_pt_dbm(v.value),
        Axis::Users => cfg.k = as_count(v, axis)?,
        Axis::Elements => cfg.n = as_count(v, axis)?,
        Axis::Rician => cfg.kappa = v.value,
        Axis::Bits => {
            cfg.phase_bits = if v.value.is_infinite() {
                PhaseResolution::Continuous
            } else {
                PhaseResolution::Bits(as_count(v, axis)? as u32)
            }
        }
        Axis::Nmse => varrho = v.value,
    }
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    if axis == Axis::Bits {
        if let PhaseResolution::Bits(b) = cfg.phase_bits {
            if !(1..=16).contains(&b) {
                return Err(CliError::Usage(format!("bits must lie in 1..=16, got {b}")));
            }
        }
    }
    Ok((cfg, i_o, varrho))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub axis: String,
    pub value: String,
    pub algo: String,
    pub i_o: usize,
    pub mean_wsr: f64,
    pub std_wsr: f64,
    pub median_wsr: f64,
    pub n_samples: usize,
    pub mean_time_s: f64,
    pub seed: u64,
    pub dataset_seed: u64,
    pub version: &'static str,
    pub config: String,
}

/// Tabular sweep output.
#[derive(Debug, Clone)]
pub struct SweepResult {
    pub axis: Axis,
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    pub fn get(&self, value: &str, algo: Algo) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.value == value && r.algo == algo.name())
    }
}

/// Sample mean, standard deviation (n − 1) and median.
pub fn summarize(xs: &[f64]) -> (f64, f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    let var = if n > 1 {
        xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64
    } else {
        0.0
    };
    (mean, var.sqrt(), quantile(xs, 0.5))
}

/// Linear-interpolated quantile.
pub fn quantile(xs: &[f64], q: f64) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    if v.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub axis: Axis,
    pub values: Vec<AxisValue>,
    pub algos: Vec<Algo>,
    pub i_o: usize,
    pub seed: u64,
    pub varrho: f64,
}

/// Runs every `(value, algo)` pair on `data`'s samples. Scenario axes
/// regenerate the LOS set from the dataset's seed with the modified
/// configuration, so geometry stays paired across points.
pub fn cmd_sweep(data: &Dataset, spec: &SweepSpec, ckpts: &Checkpoints, out: Option<&Path>) -> CliResult<SweepResult> {
    if let Some(a) = spec.algos.iter().find(|a| !spec.axis.supports(**a)) {
        return Err(CliError::Usage(format!("{a} cannot be swept along {}", spec.axis)));
    }
    if spec.values.is_empty() || spec.algos.is_empty() {
        return Err(CliError::Usage("sweep needs at least one value and one algorithm".into()));
    }
    let mut rows = Vec::new();
    for v in &spec.values {
        let (cfg, i_o, varrho) = apply_axis(&data.config, spec.i_o, spec.varrho, spec.axis, v)?;
        let point = if cfg == data.config {
            data.clone()
        } else {
            Dataset::generate(&cfg, data.len(), data.seed)?
        };
        let config = serde_json::to_string(&cfg)?;
        for &algo in &spec.algos {
            let solve = SolveSpec {
                algo,
                i_o,
                seed: spec.seed,
                varrho,
                timing: true,
            };
            let (_, outcomes) = cmd_solve(&point, &solve, ckpts, None, None)?;
            let wsr: Vec<f64> = outcomes.iter().map(|o| o.wsr).collect();
            let (mean, std, median) = summarize(&wsr);
            let time = outcomes.iter().map(|o| o.wall_time).sum::<f64>() / outcomes.len() as f64;
            rows.push(SweepRow {
                axis: spec.axis.to_string(),
                value: v.label.clone(),
                algo: algo.to_string(),
                i_o,
                mean_wsr: mean,
                std_wsr: std,
                median_wsr: median,
                n_samples: wsr.len(),
                mean_time_s: time,
                seed: spec.seed,
                dataset_seed: data.seed,
                version: VERSION,
                config: config.clone(),
            });
        }
    }
    if let Some(path) = out {
        write_csv(path, &rows)?;
    }
    Ok(SweepResult { axis: spec.axis, rows })
}

// ---------------------------------------------------------------- bench

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub algo: String,
    pub i_o: usize,
    pub runs: usize,
    pub median_ms: f64,
    pub p90_ms: f64,
    pub mean_ms: f64,
    pub std_ms: f64,
    pub mean_wsr: f64,
    pub seed: u64,
    pub dataset_seed: u64,
    pub version: &'static str,
    pub config: String,
}

/// Sequential per-solve timings: one untimed warm-up, then `runs` solves
/// cycling through the dataset samples.
pub fn cmd_bench(
    data: &Dataset,
    algos: &[(Algo, usize)],
    runs: usize,
    seed: u64,
    ckpts: &Checkpoints,
    out: Option<&Path>,
) -> CliResult<Vec<BenchRow>> {
    if data.is_empty() {
        return Err(CliError::Data("dataset has no samples".into()));
    }
    let config = serde_json::to_string(&data.config)?;
    let mut rows = Vec::new();
    for &(algo, i_o) in algos {
        let params = params_for(algo, ckpts, data.config.m, i_o)?;
        let run = |r: usize| {
            let i = r % data.len();
            solve_sample(&data.samples[i], &data.config, algo, i_o, seed, r, params.as_ref(), 0.0)
        };
        run(0)?;
        let mut times = Vec::with_capacity(runs);
        let mut wsr = 0.0;
        for r in 0..runs {
            let o = run(r)?;
            times.push(o.wall_time * 1e3);
            wsr += o.wsr / runs as f64;
        }
        let (mean, std, median) = summarize(&times);
        rows.push(BenchRow {
            algo: algo.to_string(),
            i_o,
            runs,
            median_ms: median,
            p90_ms: quantile(&times, 0.9),
            mean_ms: mean,
            std_ms: std,
            mean_wsr: wsr,
            seed,
            dataset_seed: data.seed,
            version: VERSION,
            config: config.clone(),
        });
    }
    if let Some(path) = out {
        write_csv(path, &rows)?;
    }
    Ok(rows)
}
