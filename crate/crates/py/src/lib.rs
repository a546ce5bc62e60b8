//! Python bindings for the `hst_ofdm` simulator.

use nalgebra::DMatrix;
use num_complex::Complex64;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use hst_ofdm::config::{kmh_to_mps, load_config, Config};
use hst_ofdm::experiment::{run, write_csv, ExperimentKind, ExperimentSpec, CSV_HEADER};
use hst_ofdm::ici::{build_measurement, PilotPattern};
use hst_ofdm::phy::PILOT_SYMBOL;
use hst_ofdm::{geometry, pilot, sparse};

fn py_err(e: hst_ofdm::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Derived system parameters.
#[pyclass(name = "SystemParams", module = "hst_ofdm", from_py_object)]
#[derive(Clone)]
pub struct PySystemParams {
    inner: hst_ofdm::config::SystemParams,
}

#[pymethods]
impl PySystemParams {
    #[new]
    #[pyo3(signature = (k=512, p=40, l=64, s=5, speed_kmh=500.0, antennas=2, carrier_hz=2.35e9, packet_duration_s=1.2e-3, d_max_m=1000.0, d_min_m=40.0))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        k: usize,
        p: usize,
        l: usize,
        s: usize,
        speed_kmh: f64,
        antennas: usize,
        carrier_hz: f64,
        packet_duration_s: f64,
        d_max_m: f64,
        d_min_m: f64,
    ) -> PyResult<Self> {
        let inner = hst_ofdm::config::SystemParams {
            k,
            p,
            l,
            s,
            speed_mps: kmh_to_mps(speed_kmh),
            antennas,
            carrier_hz,
            packet_duration_s,
            d_max_m,
            d_min_m,
            ..Default::default()
        }
        .derive()
        .map_err(py_err)?;
        Ok(PySystemParams { inner })
    }

    /// Parameters from the `[system]`, `[radio]` and `[geometry]` sections of a TOML config.
    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        Ok(PySystemParams { inner: load_config(text).map_err(py_err)?.system })
    }

    #[getter]
    fn k(&self) -> usize {
        self.inner.k
    }
    #[getter]
    fn p(&self) -> usize {
        self.inner.p
    }
    #[getter]
    fn l(&self) -> usize {
        self.inner.l
    }
    #[getter]
    fn s(&self) -> usize {
        self.inner.s
    }
    #[getter]
    fn antennas(&self) -> usize {
        self.inner.antennas
    }
    #[getter]
    fn f_max(&self) -> f64 {
        self.inner.f_max
    }
    #[getter]
    fn q_order(&self) -> usize {
        self.inner.q_order
    }
    #[getter]
    fn f_norm(&self) -> f64 {
        self.inner.f_norm
    }
    #[getter]
    fn half_span_m(&self) -> f64 {
        self.inner.half_span_m
    }

    fn __repr__(&self) -> String {
        let p = &self.inner;
        format!(
            "SystemParams(k={}, p={}, l={}, s={}, antennas={}, f_max={:.3}, q_order={})",
            p.k, p.p, p.l, p.s, p.antennas, p.f_max, p.q_order
        )
    }
}

fn params_or_default(params: Option<PySystemParams>) -> hst_ofdm::config::SystemParams {
    params.map(|p| p.inner).unwrap_or_default()
}

/// Doppler shift (Hz) seen at position `alpha` (m from point A).
#[pyfunction]
#[pyo3(signature = (alpha, params=None))]
fn doppler_at_position(alpha: f64, params: Option<PySystemParams>) -> PyResult<f64> {
    geometry::doppler_at_position(alpha, &params_or_default(params)).map_err(py_err)
}

/// Dominant CE-BEM index q* at position `alpha`.
#[pyfunction]
#[pyo3(signature = (alpha, params=None))]
fn dominant_index(alpha: f64, params: Option<PySystemParams>) -> PyResult<usize> {
    geometry::dominant_index_from_position(alpha, &params_or_default(params)).map_err(py_err)
}

#[pyfunction]
fn equidistant_pattern(k: usize, p: usize) -> PyResult<Vec<usize>> {
    Ok(pilot::equidistant_pattern(k, p).map_err(py_err)?.into_indices())
}

/// Average coherence of the partial Fourier matrix on `pattern`.
#[pyfunction]
#[pyo3(signature = (pattern, k, l, delta=pilot::DEFAULT_DELTA))]
fn pattern_coherence(pattern: Vec<usize>, k: usize, l: usize, delta: f64) -> PyResult<f64> {
    let pattern = PilotPattern::new(k, pattern).map_err(py_err)?;
    Ok(pilot::pattern_coherence(&pattern, l, delta))
}

type Design = (Vec<usize>, f64, Vec<(usize, f64, bool)>);

/// Low-coherence pilot search from the equidistant pattern.
///
/// Returns `(pattern, mu, trace)` with `trace` a list of `(m, mu, accepted)`.
#[pyfunction]
#[pyo3(signature = (params=None, delta=pilot::DEFAULT_DELTA, iterations=200, seed=1))]
fn design_pilot(
    params: Option<PySystemParams>,
    delta: f64,
    iterations: usize,
    seed: u64,
) -> PyResult<Design> {
    let p = params_or_default(params);
    let start = pilot::equidistant_pattern(p.k, p.p).map_err(py_err)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let out = pilot::design_low_coherence(&start, p.l, delta, iterations, &mut rng).map_err(py_err)?;
    let trace = out.trace.iter().map(|t| (t.m, t.mu, t.accepted)).collect();
    Ok((out.pattern.into_indices(), out.mu, trace))
}

/// `A[p, l] = exp(-j 2π w_p l / K)` for unit pilots, as a list of rows.
#[pyfunction]
#[pyo3(signature = (pattern, params=None))]
fn sensing_matrix(pattern: Vec<usize>, params: Option<PySystemParams>) -> PyResult<Vec<Vec<Complex64>>> {
    let p = params_or_default(params);
    let pattern = PilotPattern::new(p.k, pattern).map_err(py_err)?;
    let m = build_measurement(&pattern, &vec![PILOT_SYMBOL; pattern.len()], &p).map_err(py_err)?;
    Ok(m.a.row_iter().map(|r| r.iter().copied().collect()).collect())
}

fn to_matrix(rows: &[Vec<Complex64>]) -> PyResult<DMatrix<Complex64>> {
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || ncols == 0 || rows.iter().any(|r| r.len() != ncols) {
        return Err(PyValueError::new_err("matrix rows must be non-empty and of equal length"));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

/// Orthogonal matching pursuit with a fixed atom count.
#[pyfunction]
fn omp(a: Vec<Vec<Complex64>>, y: Vec<Complex64>, sparsity: usize) -> PyResult<Vec<Complex64>> {
    let a = to_matrix(&a)?;
    Ok(sparse::omp(&a, &y, sparse::OmpStop::Sparsity(sparsity)).map_err(py_err)?.c_hat)
}

/// Basis pursuit denoising, `min ‖c‖₁` s.t. `‖A c − y‖ ≤ noise_level`.
#[pyfunction]
#[pyo3(signature = (a, y, noise_level=0.0))]
fn bp(a: Vec<Vec<Complex64>>, y: Vec<Complex64>, noise_level: f64) -> PyResult<Vec<Complex64>> {
    let a = to_matrix(&a)?;
    Ok(sparse::bp(&a, &y, noise_level).map_err(py_err)?.c_hat)
}

#[pyfunction]
fn nmse(c_hat: Vec<Complex64>, c_true: Vec<Complex64>) -> PyResult<f64> {
    sparse::nmse(&c_hat, &c_true).map_err(py_err)
}

/// Runs an experiment and returns the results CSV as text.
///
/// `kind` is one of mse-sweep, ber-sweep, position-sweep, ici-compare,
/// design-pilot; `config` is optional TOML text.
#[pyfunction]
#[pyo3(signature = (kind, config=None, seed=None, trials=None, snr_db=None))]
fn run_experiment(
    kind: &str,
    config: Option<&str>,
    seed: Option<u64>,
    trials: Option<usize>,
    snr_db: Option<Vec<f64>>,
) -> PyResult<String> {
    let kind: ExperimentKind = kind.parse().map_err(py_err)?;
    let config = match config {
        Some(text) => load_config(text).map_err(py_err)?,
        None => Config::default(),
    };
    let mut spec = ExperimentSpec::from_config(kind, &config).map_err(py_err)?;
    if let Some(seed) = seed {
        spec.seed = seed;
    }
    if let Some(trials) = trials {
        spec.trials = trials;
    }
    if let Some(snr) = snr_db {
        spec.snr_grid = snr;
    }
    spec.validate().map_err(py_err)?;
    let out = run(&spec).map_err(py_err)?;
    let mut buf = Vec::new();
    write_csv(&out.rows, &mut buf).map_err(py_err)?;
    String::from_utf8(buf).map_err(|e| PyValueError::new_err(e.to_string()))
}

#[pymodule]
#[pyo3(name = "hst_ofdm")]
fn hst_ofdm_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySystemParams>()?;
    m.add("CSV_HEADER", CSV_HEADER)?;
    m.add_function(wrap_pyfunction!(doppler_at_position, m)?)?;
    m.add_function(wrap_pyfunction!(dominant_index, m)?)?;
    m.add_function(wrap_pyfunction!(equidistant_pattern, m)?)?;
    m.add_function(wrap_pyfunction!(pattern_coherence, m)?)?;
    m.add_function(wrap_pyfunction!(design_pilot, m)?)?;
    m.add_function(wrap_pyfunction!(sensing_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(omp, m)?)?;
    m.add_function(wrap_pyfunction!(bp, m)?)?;
    m.add_function(wrap_pyfunction!(nmse, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
