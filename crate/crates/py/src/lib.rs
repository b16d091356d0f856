//! Python bindings for the `ris-crn` optimizer.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use ris_crn::alt_optimizer::{run_algorithm1 as run_alg, OptimizerParams, OptimizerResult};
use ris_crn::antenna_pattern::{vertical_attenuation_db as vertical_db, PatternParams};
use ris_crn::channel_model::{generate_channels, pbs_beamformer, ChannelGeneration, ChannelSet};
use ris_crn::experiments::{run_sweep as sweep, run_trial as trial, Method, SweepSpec};
use ris_crn::linalg::{CVector, C64 as Complex64};
use ris_crn::link_metrics::{pu_interference, se_su, sinr_su, DesignState};
use ris_crn::scenario::Scenario;

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

#[pyclass(name = "Scenario", module = "ris_crn", skip_from_py_object)]
#[derive(Clone)]
pub struct PyScenario {
    inner: Scenario,
}

#[pymethods]
impl PyScenario {
    /// Parses a scenario JSON document; the reference default when omitted.
    #[new]
    #[pyo3(signature = (json = None))]
    fn new(json: Option<&str>) -> PyResult<Self> {
        let inner = match json {
            Some(text) => Scenario::from_json_str(text).map_err(err)?,
            None => Scenario::reference_default(),
        };
        Ok(Self { inner })
    }

    #[staticmethod]
    fn reference_default() -> Self {
        Self { inner: Scenario::reference_default() }
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner).map_err(err)
    }

    #[getter]
    fn n_ris(&self) -> usize {
        self.inner.n_ris
    }

    #[setter]
    fn set_n_ris(&mut self, n: usize) {
        self.inner.n_ris = n;
    }

    #[getter]
    fn n_s(&self) -> usize {
        self.inner.n_s
    }

    #[setter]
    fn set_n_s(&mut self, n: usize) -> PyResult<()> {
        if n == 0 {
            return Err(err("n_s must be at least 1"));
        }
        self.inner.n_s = n;
        Ok(())
    }

    #[getter]
    fn p_max_dbw(&self) -> f64 {
        self.inner.p_max_dbw
    }

    #[setter]
    fn set_p_max_dbw(&mut self, p: f64) {
        self.inner.p_max_dbw = p;
    }

    #[getter]
    fn gamma_w(&self) -> f64 {
        self.inner.gamma_w
    }

    #[setter]
    fn set_gamma_w(&mut self, g: f64) {
        self.inner.gamma_w = g;
    }

    /// `"path_loss_rician"` or `"iid"`.
    #[getter]
    fn generation(&self) -> PyResult<String> {
        match serde_json::to_value(self.inner.channel.generation).map_err(err)? {
            serde_json::Value::String(s) => Ok(s),
            other => Err(err(format!("unexpected generation {other}"))),
        }
    }

    #[setter]
    fn set_generation(&mut self, g: &str) -> PyResult<()> {
        let g: ChannelGeneration = serde_json::from_value(serde_json::Value::from(g)).map_err(err)?;
        self.inner.channel.generation = g;
        Ok(())
    }

    /// `(theta_d, theta_r, theta_i)` in degrees.
    fn sbs_angles(&self) -> PyResult<(f64, f64, f64)> {
        let a = self.inner.sbs_angles().map_err(err)?;
        Ok((a.theta_d_deg, a.theta_r_deg, a.theta_i_deg))
    }

    fn __repr__(&self) -> String {
        format!(
            "Scenario(n_ris={}, n_s={}, p_max_dbw={}, gamma_w={})",
            self.inner.n_ris, self.inner.n_s, self.inner.p_max_dbw, self.inner.gamma_w
        )
    }
}

#[pyclass(name = "Channels", module = "ris_crn", skip_from_py_object)]
#[derive(Clone)]
pub struct PyChannels {
    inner: ChannelSet,
}

#[pymethods]
impl PyChannels {
    #[staticmethod]
    fn generate(scenario: &PyScenario, seed: u64) -> PyResult<Self> {
        let s = &scenario.inner;
        let geometry = s.derive_geometry().map_err(err)?;
        Ok(Self { inner: generate_channels(s, &geometry, seed).map_err(err)? })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self { inner: ChannelSet::from_json(text).map_err(err)? })
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().map_err(err)
    }

    /// `(N, N_s, N_p)`.
    #[getter]
    fn dims(&self) -> (usize, usize, usize) {
        (self.inner.n_ris(), self.inner.n_s(), self.inner.n_p())
    }

    #[getter]
    fn h_s(&self) -> Vec<Complex64> {
        self.inner.h_s.iter().copied().collect()
    }
}

#[pyclass(name = "OptimizerParams", module = "ris_crn", skip_from_py_object)]
#[derive(Clone, Default)]
pub struct PyOptimizerParams {
    inner: OptimizerParams,
}

#[pymethods]
impl PyOptimizerParams {
    #[new]
    #[pyo3(signature = (json = None))]
    fn new(json: Option<&str>) -> PyResult<Self> {
        let inner: OptimizerParams = match json {
            Some(text) => serde_json::from_str(text).map_err(err)?,
            None => OptimizerParams::default(),
        };
        inner.validate().map_err(err)?;
        Ok(Self { inner })
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner).map_err(err)
    }

    #[getter]
    fn epsilon(&self) -> f64 {
        self.inner.epsilon
    }

    #[setter]
    fn set_epsilon(&mut self, e: f64) -> PyResult<()> {
        let mut p = self.inner.clone();
        p.epsilon = e;
        p.validate().map_err(err)?;
        self.inner = p;
        Ok(())
    }

    #[getter]
    fn max_outer_iters(&self) -> usize {
        self.inner.max_outer_iters
    }

    #[setter]
    fn set_max_outer_iters(&mut self, n: usize) -> PyResult<()> {
        let mut p = self.inner.clone();
        p.max_outer_iters = n;
        p.validate().map_err(err)?;
        self.inner = p;
        Ok(())
    }
}

#[pyclass(name = "OptimizerResult", module = "ris_crn")]
pub struct PyOptimizerResult {
    inner: OptimizerResult,
}

#[pymethods]
impl PyOptimizerResult {
    #[getter]
    fn se(&self) -> f64 {
        self.inner.se
    }

    #[getter]
    fn se_trace(&self) -> Vec<f64> {
        self.inner.se_trace.clone()
    }

    #[getter]
    fn outer_iterations(&self) -> usize {
        self.inner.outer_iterations
    }

    /// RIS phase shifts in radians.
    #[getter]
    fn phases(&self) -> Vec<f64> {
        self.inner.state.phases.clone()
    }

    #[getter]
    fn w_s(&self) -> Vec<Complex64> {
        self.inner.state.w_s.iter().copied().collect()
    }

    #[getter]
    fn tilt_deg(&self) -> f64 {
        self.inner.state.theta_tilt_deg
    }

    #[getter]
    fn feasible(&self) -> bool {
        self.inner.feasibility.is_feasible()
    }

    #[getter]
    fn pu_interference_w(&self) -> f64 {
        self.inner.feasibility.pu_interference_w
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!(
            "OptimizerResult(se={}, outer_iterations={}, tilt_deg={})",
            self.inner.se, self.inner.outer_iterations, self.inner.state.theta_tilt_deg
        )
    }
}

fn params_or_default(params: Option<&PyOptimizerParams>) -> OptimizerParams {
    params.map(|p| p.inner.clone()).unwrap_or_default()
}

/// Runs the alternating optimizer on one channel draw.
#[pyfunction]
#[pyo3(signature = (channels, scenario, params = None, seed = 0))]
fn run_algorithm1(
    py: Python<'_>,
    channels: &PyChannels,
    scenario: &PyScenario,
    params: Option<&PyOptimizerParams>,
    seed: u64,
) -> PyResult<PyOptimizerResult> {
    let params = params_or_default(params);
    let (ch, s) = (&channels.inner, &scenario.inner);
    let inner = py.detach(|| run_alg(ch, s, &params, seed)).map_err(err)?;
    Ok(PyOptimizerResult { inner })
}

/// One Monte Carlo trial; returns `(se, outer_iterations, feasible, tilt_deg)`.
#[pyfunction]
#[pyo3(signature = (scenario, method, seed, fixed_tilt_deg = None, params = None))]
fn run_trial(
    py: Python<'_>,
    scenario: &PyScenario,
    method: &str,
    seed: u64,
    fixed_tilt_deg: Option<f64>,
    params: Option<&PyOptimizerParams>,
) -> PyResult<(f64, usize, bool, f64)> {
    let method: Method = serde_json::from_value(serde_json::Value::from(method)).map_err(err)?;
    let params = params_or_default(params);
    let s = &scenario.inner;
    let o = py.detach(|| trial(s, method, seed, fixed_tilt_deg, &params)).map_err(err)?;
    Ok((o.se, o.outer_iterations, o.feasible, o.theta_tilt_deg))
}

/// Runs a sweep described by a JSON spec and returns the summary CSV.
#[pyfunction]
#[pyo3(signature = (spec_json, scenario = None, workers = 1))]
fn run_sweep(py: Python<'_>, spec_json: &str, scenario: Option<&PyScenario>, workers: usize) -> PyResult<String> {
    let spec = SweepSpec::from_json_str(spec_json).map_err(err)?;
    let base = scenario.map(|s| s.inner.clone()).unwrap_or_else(Scenario::reference_default);
    py.detach(|| sweep(&spec, &base, workers).and_then(|r| r.to_csv_string())).map_err(err)
}

/// Secondary SE and PU interference of an explicit design.
#[pyfunction]
fn evaluate(
    channels: &PyChannels,
    scenario: &PyScenario,
    w_s: Vec<Complex64>,
    phases: Vec<f64>,
    tilt_deg: f64,
) -> PyResult<(f64, f64)> {
    let (ch, s) = (&channels.inner, &scenario.inner);
    let state = DesignState::new(CVector::from_vec(w_s), phases, tilt_deg);
    let w_p = pbs_beamformer(&ch.h_p, s.pp_dbw).map_err(err)?.w_p;
    let se = se_su(sinr_su(&state, ch, &w_p, s).map_err(err)?);
    Ok((se, pu_interference(&state, ch, s).map_err(err)?))
}

/// Vertical pattern attenuation in dB.
#[pyfunction]
#[pyo3(signature = (theta_tilt_deg, theta_x_deg, theta_3db_deg = 10.0, sla_v_db = None))]
fn vertical_attenuation_db(theta_tilt_deg: f64, theta_x_deg: f64, theta_3db_deg: f64, sla_v_db: Option<f64>) -> PyResult<f64> {
    let params = PatternParams { theta_3db_deg, sla_v_db, ..Default::default() };
    params.validate(false).map_err(err)?;
    Ok(vertical_db(theta_tilt_deg, theta_x_deg, &params))
}

#[pymodule]
#[pyo3(name = "ris_crn")]
pub fn ris_crn_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyScenario>()?;
    m.add_class::<PyChannels>()?;
    m.add_class::<PyOptimizerParams>()?;
    m.add_class::<PyOptimizerResult>()?;
    m.add_function(wrap_pyfunction!(run_algorithm1, m)?)?;
    m.add_function(wrap_pyfunction!(run_trial, m)?)?;
    m.add_function(wrap_pyfunction!(run_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(vertical_attenuation_db, m)?)?;
    Ok(())
}
