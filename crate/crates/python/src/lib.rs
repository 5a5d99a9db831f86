//! Python bindings: parameters and scaling, the delay models, the PDE solver,
//! memory kernels and Hopf curves.

use std::str::FromStr;

use ::enso_mz::bif;
use ::enso_mz::dde::{self, DelayModel, History, ModelKind};
use ::enso_mz::kernel::{self, RossbyJacobian};
use ::enso_mz::pde::{InitialBump, PdeModel, RunOptions, WindForcing};
use ::enso_mz::pod::{self, KernelProbe};
use ::enso_mz::Error;
use pyo3::exceptions::{PyKeyError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::InvalidParameter { .. } | Error::ParamFile(_) | Error::OutsideDomain { .. } | Error::Dimension(_) => {
            PyValueError::new_err(e.to_string())
        }
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn model_kind(name: &str) -> PyResult<ModelKind> {
    ModelKind::from_str(name).map_err(to_py)
}

fn overrides(base: &::enso_mz::PhysicalParams, kwargs: Option<&Bound<'_, PyDict>>) -> PyResult<::enso_mz::PhysicalParams> {
    let Some(kw) = kwargs else { return Ok(*base) };
    let mut pairs = Vec::new();
    for (k, v) in kw.iter() {
        pairs.push((k.extract::<String>()?, v.extract::<f64>()?));
    }
    base.with_overrides(pairs.iter().map(|(k, v)| (k.as_str(), *v))).map_err(to_py)
}

/// Physical constants and model tunables. Keyword arguments override defaults.
#[pyclass(name = "PhysicalParams", module = "enso_mz")]
#[derive(Clone)]
struct PyParams {
    inner: ::enso_mz::PhysicalParams,
}

#[pymethods]
impl PyParams {
    #[new]
    #[pyo3(signature = (**kwargs))]
    fn new(kwargs: Option<&Bound<'_, PyDict>>) -> PyResult<Self> {
        Ok(Self { inner: overrides(&::enso_mz::PhysicalParams::default(), kwargs)? })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self { inner: ::enso_mz::PhysicalParams::from_json_str(text).map_err(to_py)? })
    }

    fn to_json(&self) -> String {
        self.inner.to_json_pretty()
    }

    /// Copy with some values replaced.
    #[pyo3(signature = (**kwargs))]
    fn replace(&self, kwargs: Option<&Bound<'_, PyDict>>) -> PyResult<Self> {
        Ok(Self { inner: overrides(&self.inner, kwargs)? })
    }

    fn __getitem__(&self, key: &str) -> PyResult<f64> {
        let v = serde_json::to_value(self.inner).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
        v.get(key).and_then(|x| x.as_f64()).ok_or_else(|| PyKeyError::new_err(key.to_string()))
    }

    fn keys(&self) -> Vec<String> {
        match serde_json::to_value(self.inner) {
            Ok(serde_json::Value::Object(m)) => m.keys().cloned().collect(),
            _ => Vec::new(),
        }
    }

    #[getter]
    fn beta(&self) -> f64 {
        self.inner.beta()
    }

    fn scale(&self) -> PyResult<PyScaled> {
        Ok(PyScaled { inner: self.inner.scale().map_err(to_py)? })
    }

    fn __repr__(&self) -> String {
        let p = &self.inner;
        format!("PhysicalParams(theta={}, A0={}, y_n={}, r_W={}, r_E={}, x_w={})", p.theta, p.a0, p.y_n, p.r_w, p.r_e, p.x_w)
    }
}

#[pyclass(name = "ScaledParams", module = "enso_mz", frozen)]
struct PyScaled {
    inner: ::enso_mz::ScaledParams,
}

#[pymethods]
impl PyScaled {
    #[getter]
    fn alpha(&self) -> f64 {
        self.inner.alpha
    }
    #[getter]
    fn gamma(&self) -> f64 {
        self.inner.gamma
    }
    #[getter]
    fn delta(&self) -> f64 {
        self.inner.delta
    }
    #[getter]
    fn cs_star(&self) -> f64 {
        self.inner.cs_star
    }
    #[getter]
    fn cl_star(&self) -> f64 {
        self.inner.cl_star
    }
    #[getter]
    fn d(&self) -> f64 {
        self.inner.d
    }
    #[getter]
    fn d_short(&self) -> f64 {
        self.inner.d_short
    }

    /// Scaled time converted to years.
    fn years(&self, t: f64) -> f64 {
        self.inner.dimensionalize_years(t)
    }

    fn __repr__(&self) -> String {
        format!("ScaledParams(alpha={:.6}, gamma={:.6}, delta={:.6})", self.inner.alpha, self.inner.gamma, self.inner.delta)
    }
}

/// Delay-model solution on a uniform grid.
#[pyclass(name = "Trajectory", module = "enso_mz", frozen)]
struct PyTrajectory {
    inner: dde::Trajectory,
}

#[pymethods]
impl PyTrajectory {
    #[getter]
    fn dt(&self) -> f64 {
        self.inner.dt
    }
    #[getter]
    fn times(&self) -> Vec<f64> {
        self.inner.times().collect()
    }
    #[getter]
    fn values(&self) -> Vec<f64> {
        self.inner.values.clone()
    }

    /// Dense-output value at `t`.
    fn __call__(&self, t: f64) -> f64 {
        self.inner.eval(t)
    }

    fn __len__(&self) -> usize {
        self.inner.values.len()
    }

    /// Classification, period and amplitude after the leading transient.
    #[pyo3(signature = (transient_fraction = 0.5))]
    fn period<'py>(&self, py: Python<'py>, transient_fraction: f64) -> PyResult<Bound<'py, PyDict>> {
        let est = dde::measure_period(&self.inner, transient_fraction);
        let d = PyDict::new_bound(py);
        d.set_item("classification", est.classification.to_string())?;
        d.set_item("period", est.period())?;
        d.set_item("amplitude", est.amplitude)?;
        d.set_item("crossings", est.crossings)?;
        Ok(d)
    }
}

/// Integrates `ss`, `voc` or `mz` from a constant history.
#[pyfunction]
#[pyo3(signature = (model, alpha, gamma, delta, t_end, dt = 0.01, history = 0.1))]
fn simulate_dde(model: &str, alpha: f64, gamma: f64, delta: f64, t_end: f64, dt: f64, history: f64) -> PyResult<PyTrajectory> {
    let m = DelayModel::scaled(model_kind(model)?, alpha, gamma, delta).map_err(to_py)?;
    Ok(PyTrajectory { inner: dde::integrate(&m, &History::Constant(history), t_end, dt).map_err(to_py)? })
}

/// Two-strip PDE run; returns `(times, T_e(x_E))`.
#[pyfunction]
#[pyo3(signature = (params, t_end, n = 1024, sigma_w = 0.01, nonlinear = true, bump = 0.1))]
fn simulate_pde(params: &PyParams, t_end: f64, n: usize, sigma_w: f64, nonlinear: bool, bump: f64) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let p = &params.inner;
    let model = PdeModel::new(p, WindForcing::from_params(p, sigma_w).map_err(to_py)?, n, nonlinear).map_err(to_py)?;
    let init = model.initial_state(InitialBump { amplitude: bump, ..Default::default() });
    let run = model.run(init, t_end, &RunOptions::default()).map_err(to_py)?;
    Ok((run.times().collect(), run.te_east))
}

/// Linear memory kernel at the given lags.
#[pyfunction]
#[pyo3(signature = (params, taus, sigma_w = 0.01, k_max = None, probe = 1.0))]
fn memory_kernel(params: &PyParams, taus: Vec<f64>, sigma_w: f64, k_max: Option<usize>, probe: f64) -> PyResult<Vec<f64>> {
    let p = &params.inner;
    let g = WindForcing::from_params(p, sigma_w).map_err(to_py)?;
    let k_max = k_max.unwrap_or_else(|| kernel::default_k_max(p, 1e-10));
    kernel::kernel_series(&taus, &g, p, k_max, probe).map_err(to_py)
}

/// Collapsed delays as `(branch, k, lag, coefficient)` tuples.
#[pyfunction]
#[pyo3(signature = (params, k_max = None, include_jacobian = false, probe = 1.0))]
fn discrete_delays(params: &PyParams, k_max: Option<usize>, include_jacobian: bool, probe: f64) -> PyResult<Vec<(String, usize, f64, f64)>> {
    let p = &params.inner;
    let g = WindForcing::from_params(p, 0.01).map_err(to_py)?;
    let k_max = k_max.unwrap_or_else(|| kernel::default_k_max(p, 1e-10));
    let jac = if include_jacobian { RossbyJacobian::Included } else { RossbyJacobian::Omitted };
    let d = kernel::discrete_delays(&g, p, k_max, jac, probe).map_err(to_py)?;
    Ok(d.entries
        .iter()
        .map(|e| {
            let b = match e.branch {
                kernel::KernelBranch::KelvinFirst => "kelvin_first",
                kernel::KernelBranch::RossbyFirst => "rossby_first",
            };
            (b.to_string(), e.k, e.lag, e.coefficient)
        })
        .collect())
}

/// Finite-difference kernel of the nonlinear model; returns `(lags, kernel)`
/// with the kernel divided by the resolved SST.
#[pyfunction]
#[pyo3(signature = (params, beta = None, n = 1024, t_end = 8.0, sigma_w = 0.04, epsilon = 1e-5))]
fn pod_kernel(params: &PyParams, beta: Option<f64>, n: usize, t_end: f64, sigma_w: f64, epsilon: f64) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let p = &params.inner;
    let g = WindForcing::from_params(p, sigma_w).map_err(to_py)?;
    let probe = KernelProbe { n, t_end, epsilon_fd: epsilon, ..Default::default() };
    let k = pod::kernel_fd(p, &g, beta.unwrap_or_else(|| p.beta()), &probe).map_err(to_py)?;
    let vals = k.extrapolated.iter().map(|v| v / k.t_hat).collect();
    Ok((k.lags, vals))
}

/// Hopf points `(alpha, delta, omega, residual)` over a frequency range.
#[pyfunction]
#[pyo3(signature = (model, gamma, omega_min, omega_max, n = 100, nontrivial = false))]
fn hopf_curve(model: &str, gamma: f64, omega_min: f64, omega_max: f64, n: usize, nontrivial: bool) -> PyResult<Vec<(f64, f64, f64, f64)>> {
    let branch = if nontrivial { bif::Branch::Nontrivial } else { bif::Branch::Trivial };
    let c = bif::hopf_curve(model_kind(model)?, gamma, branch, (omega_min, omega_max), n);
    Ok(c.points.iter().map(|h| (h.alpha, h.delta, h.omega, h.residual)).collect())
}

#[pyfunction]
fn equilibria(alpha: f64, gamma: f64) -> PyResult<Vec<f64>> {
    Ok(bif::equilibria(alpha, gamma).map_err(to_py)?.values)
}

#[pymodule]
#[pyo3(name = "enso_mz")]
fn py_enso_mz(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyParams>()?;
    m.add_class::<PyScaled>()?;
    m.add_class::<PyTrajectory>()?;
    m.add_function(wrap_pyfunction!(simulate_dde, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_pde, m)?)?;
    m.add_function(wrap_pyfunction!(memory_kernel, m)?)?;
    m.add_function(wrap_pyfunction!(discrete_delays, m)?)?;
    m.add_function(wrap_pyfunction!(pod_kernel, m)?)?;
    m.add_function(wrap_pyfunction!(hopf_curve, m)?)?;
    m.add_function(wrap_pyfunction!(equilibria, m)?)?;
    Ok(())
}
