//! Python bindings. Matrices cross the boundary as lists of rows of Python
//! `complex` values.

use num_complex::Complex64;
use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use mimo_precoding::baselines::{precode, BaselineConfig, BaselineKind};
use mimo_precoding::detection::DetectionSet;
use mimo_precoding::harness::channels::{generate_channels, ChannelModel};
use mimo_precoding::harness::io::{read_channels, write_channels};
use mimo_precoding::harness::report::{render, Format};
use mimo_precoding::harness::scenario::{run_scenario as run_sweep, ScenarioConfig};
use mimo_precoding::model::noise_from_susinr;
use mimo_precoding::optimizer::{
    irc_se, lbfgs_maximize, project, softmax_maximize, LbfgsSettings, ObjectiveKind, ObjectiveSpec,
    OptimizerConfig, StartPoint,
};
use mimo_precoding::quality::{se_conjugate, spectral_efficiency, susinr};
use mimo_precoding::{CMatrix, ChannelSet, Error, SystemDims, SystemParams};

type Rows = Vec<Vec<Complex64>>;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyOSError::new_err(e.to_string()),
        Error::Dimension(_) | Error::Config(_) | Error::Format { .. } | Error::DegenerateChannel { .. } => {
            PyValueError::new_err(e.to_string())
        }
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn to_matrix(rows: &Rows) -> PyResult<CMatrix> {
    let cols = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || cols == 0 || rows.iter().any(|r| r.len() != cols) {
        return Err(PyValueError::new_err("matrix must be a non-empty list of equal-length rows"));
    }
    Ok(CMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

fn to_rows(m: &CMatrix) -> Rows {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn params(channels: &ChannelSet, noise: f64, power: f64) -> PyResult<SystemParams> {
    SystemParams::new(power, noise, channels.dims.total_layers()).map_err(to_py)
}

/// Per-user channels with their singular value decompositions.
#[pyclass(name = "Channels", frozen)]
struct PyChannels {
    inner: ChannelSet,
}

#[pymethods]
impl PyChannels {
    /// Builds a channel set from one `R_k × T` matrix per user.
    #[new]
    fn new(matrices: Vec<Rows>, layers: Vec<usize>) -> PyResult<Self> {
        let channels = matrices.iter().map(to_matrix).collect::<PyResult<Vec<_>>>()?;
        let inner = ChannelSet::from_channels(&channels, &layers).map_err(to_py)?;
        Ok(PyChannels { inner })
    }

    /// Draws a synthetic set; `rho` selects the exponentially correlated model.
    #[staticmethod]
    #[pyo3(signature = (antennas=64, users=8, rx=4, layers=2, seed=0, rho=None))]
    fn generate(antennas: usize, users: usize, rx: usize, layers: usize, seed: u64, rho: Option<f64>) -> PyResult<Self> {
        let dims = SystemDims::uniform(antennas, users, rx, layers).map_err(to_py)?;
        let model = match rho {
            None => ChannelModel::IidGaussian,
            Some(rho) if (0.0..1.0).contains(&rho) => ChannelModel::ExpCorrelated { rho },
            Some(rho) => return Err(PyValueError::new_err(format!("rho={rho} outside [0, 1)"))),
        };
        let inner = generate_channels(&dims, seed, model).map_err(to_py)?;
        Ok(PyChannels { inner })
    }

    #[staticmethod]
    fn read(path: &str) -> PyResult<Self> {
        Ok(PyChannels {
            inner: read_channels(path).map_err(to_py)?,
        })
    }

    fn write(&self, path: &str) -> PyResult<()> {
        write_channels(&self.inner, path).map_err(to_py)
    }

    #[getter]
    fn antennas(&self) -> usize {
        self.inner.dims.antennas
    }

    #[getter]
    fn rx(&self) -> Vec<usize> {
        self.inner.dims.rx.clone()
    }

    #[getter]
    fn layers(&self) -> Vec<usize> {
        self.inner.dims.layers.clone()
    }

    /// Leading singular values, one per transmitted symbol.
    #[getter]
    fn singular_values(&self) -> Vec<f64> {
        self.inner.s_trunc.clone()
    }

    fn matrix(&self, user: usize) -> PyResult<Rows> {
        let u = self
            .inner
            .users
            .get(user)
            .ok_or_else(|| PyValueError::new_err(format!("no user {user}")))?;
        Ok(to_rows(&u.h))
    }

    /// Noise power that puts the set at `susinr_db`.
    #[pyo3(signature = (susinr_db, power=1.0))]
    fn noise_for_susinr(&self, susinr_db: f64, power: f64) -> PyResult<f64> {
        noise_from_susinr(&self.inner, power, susinr_db).map_err(to_py)
    }

    #[pyo3(signature = (noise, power=1.0))]
    fn susinr(&self, noise: f64, power: f64) -> PyResult<f64> {
        susinr(&self.inner, noise, power).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        let d = &self.inner.dims;
        format!("Channels(antennas={}, rx={:?}, layers={:?})", d.antennas, d.rx, d.layers)
    }
}

/// Closed-form precoder: "mrt", "zf", "rzf" or "arzf".
#[pyfunction]
#[pyo3(signature = (channels, kind, noise, power=1.0))]
fn baseline(channels: &PyChannels, kind: &str, noise: f64, power: f64) -> PyResult<Rows> {
    let kind = match kind.to_ascii_lowercase().as_str() {
        "mrt" => BaselineKind::Mrt,
        "zf" => BaselineKind::Zf,
        "rzf" => BaselineKind::Rzf,
        "arzf" => BaselineKind::Arzf,
        other => return Err(PyValueError::new_err(format!("unknown baseline {other:?}"))),
    };
    let cfg = BaselineConfig::new(kind, params(&channels.inner, noise, power)?);
    Ok(to_rows(&precode(&channels.inner, &cfg).map_err(to_py)?.w))
}

/// Spectral efficiency in bit/s/Hz with "mmse-irc", "mmse" or "conjugate" detection.
#[pyfunction]
#[pyo3(signature = (channels, w, noise, power=1.0, detection="mmse-irc"))]
fn spectral_efficiency_bits(channels: &PyChannels, w: Rows, noise: f64, power: f64, detection: &str) -> PyResult<f64> {
    let set = &channels.inner;
    let w = to_matrix(&w)?;
    let ratio = noise / power;
    let g = match detection.to_ascii_lowercase().as_str() {
        "mmse-irc" => DetectionSet::mmse_irc(set, &w, ratio),
        "mmse" => DetectionSet::mmse(set, &w, ratio),
        "conjugate" => DetectionSet::conjugate(set),
        other => return Err(PyValueError::new_err(format!("unknown detection {other:?}"))),
    }
    .map_err(to_py)?;
    Ok(spectral_efficiency(&w, set, &g, noise, power).map_err(to_py)?.se_bits)
}

/// The conjugate-detection objective `SE^C`.
#[pyfunction]
#[pyo3(signature = (channels, w, noise, power=1.0))]
fn objective_cd(channels: &PyChannels, w: Rows, noise: f64, power: f64) -> PyResult<f64> {
    let set = &channels.inner;
    Ok(se_conjugate(&to_matrix(&w)?, &set.v_trunc, &set.s_trunc, noise, power))
}

/// Ascent gradient `2·∂S/∂W̄` of the projected objective "cd" or "irc".
#[pyfunction]
#[pyo3(signature = (channels, w, noise, power=1.0, objective="irc"))]
fn gradient(channels: &PyChannels, w: Rows, noise: f64, power: f64, objective: &str) -> PyResult<Rows> {
    let kind = objective_kind(objective)?;
    let spec = ObjectiveSpec::new(kind, &channels.inner, params(&channels.inner, noise, power)?);
    Ok(to_rows(&spec.gradient(&to_matrix(&w)?).map_err(to_py)?))
}

/// Row-wise projection onto the per-antenna power constraint.
#[pyfunction]
#[pyo3(signature = (w, power=1.0))]
fn project_rows(w: Rows, power: f64) -> PyResult<Rows> {
    Ok(to_rows(&project(&to_matrix(&w)?, power)))
}

fn objective_kind(name: &str) -> PyResult<ObjectiveKind> {
    match name.to_ascii_lowercase().as_str() {
        "cd" => Ok(ObjectiveKind::Cd),
        "irc" => Ok(ObjectiveKind::Irc),
        other => Err(PyValueError::new_err(format!("unknown objective {other:?}"))),
    }
}

/// Quasi-Newton precoder optimization. Returns the precoder, its MMSE-IRC
/// spectral efficiency and the per-iteration trace.
#[pyfunction]
#[pyo3(signature = (
    channels, noise, power=1.0, objective="irc", start="arzf", method="projection",
    max_iters=200, tol_grad=1e-5, tol_change=1e-9
))]
#[allow(clippy::too_many_arguments)]
fn optimize<'py>(
    py: Python<'py>,
    channels: &PyChannels,
    noise: f64,
    power: f64,
    objective: &str,
    start: &str,
    method: &str,
    max_iters: usize,
    tol_grad: f64,
    tol_change: f64,
) -> PyResult<(Rows, f64, Bound<'py, PyDict>)> {
    let set = &channels.inner;
    let params = params(set, noise, power)?;
    let spec = ObjectiveSpec::new(objective_kind(objective)?, set, params);
    let start = match start.to_ascii_lowercase().as_str() {
        "rzf" => StartPoint::Rzf,
        "arzf" => StartPoint::Arzf,
        other => return Err(PyValueError::new_err(format!("unknown start {other:?}"))),
    };
    let cfg = OptimizerConfig {
        lbfgs: LbfgsSettings {
            max_iters,
            tol_grad,
            tol_change,
            ..LbfgsSettings::default()
        },
        start,
        record_irc: false,
    };
    let (w, trace) = match method {
        "projection" => lbfgs_maximize(&spec, &cfg),
        "softmax" => softmax_maximize(&spec, &cfg),
        other => return Err(PyValueError::new_err(format!("unknown method {other:?}"))),
    }
    .map_err(to_py)?;
    let se = irc_se(&w.w, set, &params).map_err(to_py)?;

    let info = PyDict::new(py);
    info.set_item("iterations", trace.iterations())?;
    info.set_item("evaluations", trace.evaluations)?;
    info.set_item("termination", format!("{:?}", trace.termination))?;
    info.set_item("objective", trace.records.iter().map(|r| r.objective).collect::<Vec<_>>())?;
    info.set_item("grad_norm", trace.records.iter().map(|r| r.grad_norm).collect::<Vec<_>>())?;
    info.set_item("step", trace.records.iter().map(|r| r.step).collect::<Vec<_>>())?;
    Ok((to_rows(&w.w), se, info))
}

/// Runs a sweep from a JSON configuration and renders it as "csv" or "json".
#[pyfunction]
#[pyo3(signature = (config_json="{}", format="csv"))]
fn run_scenario(config_json: &str, format: &str) -> PyResult<String> {
    let cfg = ScenarioConfig::from_json(config_json).map_err(to_py)?;
    let format = match format {
        "csv" => Format::Csv,
        "json" => Format::Json,
        other => return Err(PyValueError::new_err(format!("unknown format {other:?}"))),
    };
    let report = run_sweep(&cfg).map_err(to_py)?;
    Ok(render(&report, format))
}

#[pymodule]
fn pyprecoding(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyChannels>()?;
    m.add_function(wrap_pyfunction!(baseline, m)?)?;
    m.add_function(wrap_pyfunction!(spectral_efficiency_bits, m)?)?;
    m.add_function(wrap_pyfunction!(objective_cd, m)?)?;
    m.add_function(wrap_pyfunction!(gradient, m)?)?;
    m.add_function(wrap_pyfunction!(project_rows, m)?)?;
    m.add_function(wrap_pyfunction!(optimize, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    Ok(())
}
