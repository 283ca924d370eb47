//! Python bindings: scenarios, datasets, channel draws, the solvers and the
//! trainer. Complex vectors cross the boundary as lists of Python `complex`.

use std::path::PathBuf;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use risbeam::channel::{corrupt_channels, sample_channels};
use risbeam::dataset::Dataset;
use risbeam::learn::{train as train_params, Hyper};
use risbeam::linalg::{CMat, CVec};
use risbeam::pi::{pi_solve_matrix, quantize};
use risbeam::rng::{from_seed, split};
use risbeam::solvers::{
    avg_wsr_on, random_phase_baseline, wmmse_pi as solve_wmmse_pi, wmmse_pinet_forward, wsr_fixed_theta, QuantMode,
    SolveOptions, EVAL_SWEEPS, EVAL_TOL,
};
use risbeam::{ChannelSet, PhaseResolution, SolveReport, SystemConfig, TrainableParams, UnfoldMode, Variant, C64};

fn err(e: risbeam::Error) -> PyErr {
    use risbeam::Error as E;
    match e {
        E::Singular { .. }
        | E::ZeroDenominator(_)
        | E::MonotonicityViolation { .. }
        | E::NonFiniteLoss { .. }
        | E::Diverged { .. } => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn to_list(v: &CVec) -> Vec<C64> {
    v.iter().copied().collect()
}

fn rows(m: &CMat) -> Vec<Vec<C64>> {
    (0..m.nrows()).map(|r| m.row(r).iter().copied().collect()).collect()
}

fn resolution(bits: Option<u32>) -> PhaseResolution {
    bits.map_or(PhaseResolution::Continuous, PhaseResolution::Bits)
}

#[pyclass(name = "SystemConfig", module = "risbeam", from_py_object)]
#[derive(Clone)]
pub struct PyConfig {
    inner: SystemConfig,
}

#[pymethods]
impl PyConfig {
    /// Default scenario with optional overrides; `bits=None` means
    /// continuous phases.
    #[new]
    #[pyo3(signature = (m=None, k=None, n=None, pt_dbm=None, kappa=None, bits=None, seed=None))]
    fn new(
        m: Option<usize>,
        k: Option<usize>,
        n: Option<usize>,
        pt_dbm: Option<f64>,
        kappa: Option<f64>,
        bits: Option<u32>,
        seed: Option<u64>,
    ) -> PyResult<Self> {
        let mut c = SystemConfig::default();
        c.m = m.unwrap_or(c.m);
        c.k = k.unwrap_or(c.k);
        c.n = n.unwrap_or(c.n);
        c.kappa = kappa.unwrap_or(c.kappa);
        c.seed = seed.unwrap_or(c.seed);
        if bits.is_some() {
            c.phase_bits = resolution(bits);
        }
        if let Some(p) = pt_dbm {
            c = c.with_pt_dbm(p);
        }
        c.validate().map_err(err)?;
        Ok(PyConfig { inner: c })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(PyConfig {
            inner: SystemConfig::from_json(text).map_err(err)?,
        })
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    #[getter]
    fn m(&self) -> usize {
        self.inner.m
    }

    #[getter]
    fn k(&self) -> usize {
        self.inner.k
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n
    }

    #[getter]
    fn pt_dbm(&self) -> f64 {
        self.inner.pt_dbm()
    }

    #[getter]
    fn noise_power_w(&self) -> f64 {
        self.inner.noise_power_w()
    }

    fn __repr__(&self) -> String {
        format!(
            "SystemConfig(m={}, k={}, n={}, pt_dbm={}, bits={})",
            self.inner.m,
            self.inner.k,
            self.inner.n,
            self.inner.pt_dbm(),
            self.inner.phase_bits
        )
    }
}

#[pyclass(name = "Dataset", module = "risbeam")]
pub struct PyDataset {
    inner: Dataset,
}

#[pymethods]
impl PyDataset {
    #[staticmethod]
    #[pyo3(signature = (config, count, seed=0))]
    fn generate(config: &PyConfig, count: usize, seed: u64) -> PyResult<Self> {
        Ok(PyDataset {
            inner: Dataset::generate(&config.inner, count, seed).map_err(err)?,
        })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(PyDataset {
            inner: Dataset::load(&path).map_err(err)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(&path).map_err(err)
    }

    #[getter]
    fn config(&self) -> PyConfig {
        PyConfig {
            inner: self.inner.config.clone(),
        }
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    /// Fading realisation of sample `index`, drawn from `split(seed, index)`.
    #[pyo3(signature = (index, seed=0))]
    fn channels(&self, index: usize, seed: u64) -> PyResult<PyChannels> {
        let los = self
            .inner
            .samples
            .get(index)
            .ok_or_else(|| PyValueError::new_err(format!("sample {index} out of range")))?;
        let mut rng = split(seed, index as u64);
        Ok(PyChannels {
            inner: sample_channels(los, &self.inner.config, &mut rng).map_err(err)?,
            config: self.inner.config.clone(),
        })
    }
}

#[pyclass(name = "Channels", module = "risbeam")]
pub struct PyChannels {
    inner: ChannelSet,
    config: SystemConfig,
}

#[pymethods]
impl PyChannels {
    #[getter]
    fn m(&self) -> usize {
        self.inner.m()
    }

    #[getter]
    fn k(&self) -> usize {
        self.inner.k()
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn alpha(&self) -> Vec<f64> {
        self.inner.alpha.clone()
    }

    /// `N × M` AP–RIS link, row by row.
    #[getter]
    fn g(&self) -> Vec<Vec<C64>> {
        rows(&self.inner.g)
    }

    #[getter]
    fn h_d(&self) -> Vec<Vec<C64>> {
        self.inner.h_d.iter().map(to_list).collect()
    }

    #[getter]
    fn h_r(&self) -> Vec<Vec<C64>> {
        self.inner.h_r.iter().map(to_list).collect()
    }

    /// Estimate with NMSE `varrho`.
    #[pyo3(signature = (varrho, seed=0))]
    fn corrupted(&self, varrho: f64, seed: u64) -> PyResult<PyChannels> {
        let est = corrupt_channels(&self.inner, varrho, &mut from_seed(seed)).map_err(err)?;
        Ok(PyChannels {
            inner: est.channels,
            config: self.config.clone(),
        })
    }

    /// WSR of fixed phases with beamformers from WMMSE sweeps.
    #[pyo3(signature = (theta, sweeps=EVAL_SWEEPS))]
    fn wsr_with_phases(&self, theta: Vec<C64>, sweeps: usize) -> PyResult<f64> {
        let theta = CVec::from_vec(theta);
        wsr_fixed_theta(&self.inner, &theta, self.config.pt_w(), sweeps, EVAL_TOL).map_err(err)
    }
}

#[pyclass(name = "SolveResult", module = "risbeam", get_all)]
pub struct PySolveResult {
    wsr: f64,
    wsr_trace: Vec<f64>,
    theta: Vec<C64>,
    /// `M × K`, row by row.
    w: Vec<Vec<C64>>,
    inner_iterations: Vec<usize>,
    wall_time: f64,
}

#[pymethods]
impl PySolveResult {
    fn __repr__(&self) -> String {
        format!("SolveResult(wsr={:.4}, iterations={})", self.wsr, self.wsr_trace.len())
    }
}

impl From<SolveReport> for PySolveResult {
    fn from(r: SolveReport) -> Self {
        PySolveResult {
            wsr: r.wsr,
            wsr_trace: r.wsr_trace,
            theta: to_list(&r.final_state.theta),
            w: rows(&r.final_state.w),
            inner_iterations: r.inner_iterations,
            wall_time: r.wall_time,
        }
    }
}

#[pyclass(name = "TrainableParams", module = "risbeam")]
pub struct PyParams {
    inner: TrainableParams,
}

fn parse_variant(s: &str) -> PyResult<Variant> {
    s.parse().map_err(err)
}

#[pymethods]
impl PyParams {
    /// Fresh parameters; `variant` is `pinet`, `pinet-plus` or `pinet-imcsi`.
    #[staticmethod]
    #[pyo3(signature = (m, i_o, variant="pinet-plus", seed=0))]
    fn init(m: usize, i_o: usize, variant: &str, seed: u64) -> PyResult<Self> {
        Ok(PyParams {
            inner: TrainableParams::init(m, i_o, parse_variant(variant)?, &mut from_seed(seed)),
        })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(PyParams {
            inner: TrainableParams::load(&path).map_err(err)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(&path).map_err(err)
    }

    #[getter]
    fn variant(&self) -> String {
        self.inner.variant.to_string()
    }

    #[getter]
    fn gammas(&self) -> Vec<f64> {
        self.inner.gammas.clone()
    }

    #[getter]
    fn rhos(&self) -> Vec<f64> {
        self.inner.rhos.clone()
    }

    #[getter]
    fn deltas(&self) -> Vec<f64> {
        self.inner.deltas.clone()
    }

    #[getter]
    fn i_o(&self) -> usize {
        self.inner.i_o()
    }

    fn flatten(&self) -> Vec<f64> {
        self.inner.flatten()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

/// Alternating WMMSE / power-iteration solve.
#[pyfunction]
#[pyo3(signature = (channels, i_o=38, seed=0))]
fn wmmse_pi(channels: &PyChannels, i_o: usize, seed: u64) -> PyResult<PySolveResult> {
    let opts = SolveOptions::from_config(&channels.config);
    Ok(solve_wmmse_pi(&channels.inner, &opts, i_o, &mut from_seed(seed)).map_err(err)?.into())
}

/// Unfolded solve with learned parameters (inference: hard quantization).
#[pyfunction]
#[pyo3(signature = (channels, params, i_o=None, seed=0))]
fn pinet(channels: &PyChannels, params: &PyParams, i_o: Option<usize>, seed: u64) -> PyResult<PySolveResult> {
    let opts = SolveOptions::from_config(&channels.config);
    let mode = match params.inner.variant {
        Variant::Pinet => UnfoldMode::Pinet,
        Variant::PinetPlus => UnfoldMode::PinetPlus,
        Variant::PinetImcsi => return Err(PyValueError::new_err("imperfect-CSI parameters need a channel stream")),
    };
    let i_o = i_o.unwrap_or(params.inner.i_o());
    let p = if i_o == params.inner.i_o() {
        params.inner.clone()
    } else {
        params.inner.resized(i_o)
    };
    let r = wmmse_pinet_forward(&channels.inner, &p, &opts, i_o, mode, QuantMode::Hard, &mut from_seed(seed));
    Ok(r.map_err(err)?.into())
}

#[pyfunction]
#[pyo3(signature = (channels, seed=0))]
fn random_phase(channels: &PyChannels, seed: u64) -> PyResult<PySolveResult> {
    let opts = SolveOptions::from_config(&channels.config);
    Ok(random_phase_baseline(&channels.inner, &opts, &mut from_seed(seed)).map_err(err)?.into())
}

/// Mean WSR of fixed phases over several channel groups.
#[pyfunction]
#[pyo3(signature = (theta, pool, sweeps=EVAL_SWEEPS))]
fn average_wsr(theta: Vec<C64>, pool: Vec<PyRef<'_, PyChannels>>, sweeps: usize) -> PyResult<f64> {
    let first = pool.first().ok_or_else(|| PyValueError::new_err("empty pool"))?;
    let pt = first.config.pt_w();
    let sets: Vec<ChannelSet> = pool.iter().map(|c| c.inner.clone()).collect();
    avg_wsr_on(&CVec::from_vec(theta), &sets, pt, sweeps).map_err(err)
}

/// Power iteration on a Hermitian matrix given row by row. Returns
/// `(x, objective, iterations)`.
#[pyfunction]
#[pyo3(signature = (r, x0, max_iter=200, tol=1e-8))]
fn power_iteration(r: Vec<Vec<C64>>, x0: Vec<C64>, max_iter: usize, tol: f64) -> PyResult<(Vec<C64>, f64, usize)> {
    let n = r.len();
    if r.iter().any(|row| row.len() != n) {
        return Err(PyValueError::new_err("R must be square"));
    }
    let mat = CMat::from_fn(n, n, |i, j| r[i][j]);
    let out = pi_solve_matrix(&mat, &CVec::from_vec(x0), max_iter, tol).map_err(err)?;
    Ok((to_list(&out.x), out.certificate.objective, out.iterations))
}

/// Nearest point of the `2^bits` phase grid; `bits=None` is the identity.
#[pyfunction]
#[pyo3(signature = (theta, bits=None))]
fn quantize_phases(theta: Vec<C64>, bits: Option<u32>) -> Vec<C64> {
    to_list(&quantize(&CVec::from_vec(theta), resolution(bits)))
}

/// Trains `variant` on `dataset`; `hyper` is a JSON object whose missing
/// keys take defaults. Returns `(params, held-out loss trace)`.
#[pyfunction]
#[pyo3(signature = (dataset, variant="pinet-plus", hyper=None))]
fn train(py: Python<'_>, dataset: &PyDataset, variant: &str, hyper: Option<&str>) -> PyResult<(PyParams, Vec<f64>)> {
    let variant = parse_variant(variant)?;
    let hyper = match hyper {
        Some(text) => Hyper::from_json(text).map_err(err)?,
        None => Hyper::default(),
    };
    let data = &dataset.inner;
    let out = py.detach(|| train_params(data, None, variant, &hyper, None)).map_err(err)?;
    let trace = out.trace.iter().filter_map(|r| r.heldout).collect();
    Ok((PyParams { inner: out.params }, trace))
}

#[pymodule]
#[pyo3(name = "risbeam")]
fn risbeam_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyConfig>()?;
    m.add_class::<PyDataset>()?;
    m.add_class::<PyChannels>()?;
    m.add_class::<PySolveResult>()?;
    m.add_class::<PyParams>()?;
    m.add_function(wrap_pyfunction!(wmmse_pi, m)?)?;
    m.add_function(wrap_pyfunction!(pinet, m)?)?;
    m.add_function(wrap_pyfunction!(random_phase, m)?)?;
    m.add_function(wrap_pyfunction!(average_wsr, m)?)?;
    m.add_function(wrap_pyfunction!(power_iteration, m)?)?;
    m.add_function(wrap_pyfunction!(quantize_phases, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
