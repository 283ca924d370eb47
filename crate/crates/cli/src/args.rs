use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use risbeam::dataset::Dataset;
use risbeam::learn::train::default_heldout;
use risbeam::learn::Hyper;
use risbeam::solvers::Algo;
use risbeam::{SystemConfig, TrainableParams, Variant};

use crate::commands::{self, AxisValue, Checkpoints, SolveSpec, SweepSpec};
use crate::error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "risbeam", version, about = "Joint beamforming for RIS-assisted MU-MISO downlink")]
pub struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw user drops and LOS components into a dataset file.
    Gen(GenArgs),
    /// Run one algorithm on every dataset sample.
    Solve(SolveArgs),
    /// Train the unfolded network.
    Train(TrainArgs),
    /// Sweep one scenario axis over several algorithms.
    Sweep(SweepArgs),
    /// Time per-solve latency.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// Scenario JSON; defaults to the built-in scenario.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CkptArgs {
    /// Trained parameters as `[algo=]path`; repeatable.
    #[arg(long = "checkpoint")]
    pub checkpoints: Vec<String>,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "wmmse-pi")]
    pub algo: String,
    /// Outer iterations.
    #[arg(long, default_value_t = 38)]
    pub iters: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// NMSE of the channel estimates the solver sees.
    #[arg(long, default_value_t = 0.0)]
    pub varrho: f64,
    #[command(flatten)]
    pub ckpt: CkptArgs,
    /// Per-sample CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON with the final beamformers and phases.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Add wall-clock columns (output is then not reproducible).
    #[arg(long)]
    pub timing: bool,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "pinet-plus")]
    pub variant: String,
    /// Hyper-parameter JSON; missing keys take defaults.
    #[arg(long)]
    pub hyper: Option<PathBuf>,
    /// Held-out dataset; otherwise a fresh one is drawn.
    #[arg(long)]
    pub heldout: Option<PathBuf>,
    /// Checkpoint to start from.
    #[arg(long)]
    pub init: Option<PathBuf>,
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Checkpoint to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Loss-trace CSV.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// iterations | power | users | elements | rician | bits | nmse
    #[arg(long)]
    pub axis: String,
    /// Comma-separated points; `inf` means continuous phases on `bits`.
    #[arg(long, value_delimiter = ',', required = true)]
    pub values: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "wmmse-pi,random-phase")]
    pub algos: Vec<String>,
    #[arg(long, default_value_t = 38)]
    pub iters: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.0)]
    pub varrho: f64,
    #[command(flatten)]
    pub ckpt: CkptArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// `algo[:iters]`, comma-separated.
    #[arg(long, value_delimiter = ',', default_value = "wmmse-pi:38,pinet-plus:3")]
    pub algos: Vec<String>,
    #[arg(long, default_value_t = 50)]
    pub runs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub ckpt: CkptArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn parse_algo(s: &str) -> CliResult<Algo> {
    s.trim().parse().map_err(|e: risbeam::Error| CliError::Usage(e.to_string()))
}

pub fn parse_variant(s: &str) -> CliResult<Variant> {
    s.trim().parse().map_err(|e: risbeam::Error| CliError::Usage(e.to_string()))
}

fn algo_of(v: Variant) -> Algo {
    match v {
        Variant::Pinet => Algo::Pinet,
        Variant::PinetPlus => Algo::PinetPlus,
        Variant::PinetImcsi => Algo::PinetImcsi,
    }
}

/// Loads `[algo=]path` specs; without a prefix the algorithm follows the
/// stored variant.
pub fn load_checkpoints(specs: &[String]) -> CliResult<Checkpoints> {
    let mut out = Checkpoints::new();
    for spec in specs {
        let (algo, path) = match spec.split_once('=') {
            Some((a, p)) => (Some(parse_algo(a)?), p),
            None => (None, spec.as_str()),
        };
        let params = TrainableParams::load(Path::new(path))?;
        let algo = algo.unwrap_or_else(|| algo_of(params.variant));
        if !algo.is_learned() {
            return Err(CliError::Usage(format!("{algo} takes no checkpoint")));
        }
        out.insert(algo, params);
    }
    Ok(out)
}

fn load_data(path: &Path) -> CliResult<Dataset> {
    Ok(Dataset::load(path)?)
}

fn parse_bench_algo(s: &str, default_iters: usize) -> CliResult<(Algo, usize)> {
    match s.split_once(':') {
        Some((a, n)) => {
            let n = n.trim().parse().map_err(|_| CliError::Usage(format!("bad iteration count in `{s}`")))?;
            Ok((parse_algo(a)?, n))
        }
        None => Ok((parse_algo(s)?, default_iters)),
    }
}

pub fn run(cli: Cli) -> CliResult<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    match cli.command {
        Command::Gen(a) => {
            let config = match &a.config {
                Some(p) => SystemConfig::from_json(&std::fs::read_to_string(p)?)?,
                None => SystemConfig::default(),
            };
            let data = commands::cmd_gen(&config, a.count, a.seed, &a.out)?;
            log::info!("wrote {} samples to {}", data.len(), a.out.display());
        }
        Command::Solve(a) => {
            let data = load_data(&a.data)?;
            let spec = SolveSpec {
                algo: parse_algo(&a.algo)?,
                i_o: a.iters,
                seed: a.seed,
                varrho: a.varrho,
                timing: a.timing,
            };
            let ckpts = load_checkpoints(&a.ckpt.checkpoints)?;
            let (rows, _) = commands::cmd_solve(&data, &spec, &ckpts, a.out.as_deref(), a.report.as_deref())?;
            let wsr: Vec<f64> = rows.iter().map(|r| r.wsr).collect();
            let (mean, std, median) = commands::summarize(&wsr);
            println!("{} I_O={} n={} mean={mean:.4} std={std:.4} median={median:.4}", spec.algo, spec.i_o, rows.len());
        }
        Command::Train(a) => {
            let data = load_data(&a.data)?;
            let variant = parse_variant(&a.variant)?;
            let mut hyper = match &a.hyper {
                Some(p) => Hyper::from_json(&std::fs::read_to_string(p)?)?,
                None => Hyper::default(),
            };
            if let Some(v) = a.iters {
                hyper.i_o = v;
            }
            if let Some(v) = a.epochs {
                hyper.epochs = v;
            }
            if let Some(v) = a.seed {
                hyper.seed = v;
            }
            let heldout = match &a.heldout {
                Some(p) => load_data(p)?,
                None => default_heldout(&data, hyper.heldout)?,
            };
            let init = a.init.as_deref().map(TrainableParams::load).transpose()?;
            let out = commands::cmd_train(&data, Some(&heldout), variant, &hyper, init, &a.out, a.trace.as_deref())?;
            println!(
                "{variant}: held-out loss {:.4} -> {:.4} over {} steps",
                out.initial_heldout,
                out.best_heldout,
                out.trace.len()
            );
        }
        Command::Sweep(a) => {
            let data = load_data(&a.data)?;
            let spec = SweepSpec {
                axis: a.axis.parse()?,
                values: a.values.iter().map(|v| v.parse()).collect::<CliResult<Vec<AxisValue>>>()?,
                algos: a.algos.iter().map(|s| parse_algo(s)).collect::<CliResult<_>>()?,
                i_o: a.iters,
                seed: a.seed,
                varrho: a.varrho,
            };
            let ckpts = load_checkpoints(&a.ckpt.checkpoints)?;
            let res = commands::cmd_sweep(&data, &spec, &ckpts, a.out.as_deref())?;
            for r in &res.rows {
                println!("{}={} {} mean={:.4} median={:.4}", r.axis, r.value, r.algo, r.mean_wsr, r.median_wsr);
            }
        }
        Command::Bench(a) => {
            let data = load_data(&a.data)?;
            if a.runs < 50 {
                return Err(CliError::Usage("bench needs at least 50 runs".into()));
            }
            let algos = a
                .algos
                .iter()
                .map(|s| parse_bench_algo(s, 38))
                .collect::<CliResult<Vec<_>>>()?;
            let ckpts = load_checkpoints(&a.ckpt.checkpoints)?;
            let rows = commands::cmd_bench(&data, &algos, a.runs, a.seed, &ckpts, a.out.as_deref())?;
            for r in &rows {
                println!(
                    "{} I_O={} runs={} median={:.3}ms p90={:.3}ms mean={:.3}ms",
                    r.algo, r.i_o, r.runs, r.median_ms, r.p90_ms, r.mean_ms
                );
            }
        }
    }
    Ok(())
}
