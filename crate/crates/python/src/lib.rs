//! Python bindings. Matrices cross the boundary as lists of rows; reports
//! come back as plain dicts.

use nalgebra::DMatrix;
use nlirf::diagnostics::{self, Resampling};
use nlirf::identified_set::{self as idset, AngleFn, GridSpace, RadialRotationSpec};
use nlirf::innovations::{self, InnovationMatrix};
use nlirf::irf::{self, ShockSpec};
use nlirf::model::{self, zoo};
use nlirf::{bss, transforms, ModelSpec, Trajectory};
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

create_exception!(pynlirf, NlirfError, PyException);

type Rows = Vec<Vec<f64>>;

fn err(e: nlirf::Error) -> PyErr {
    NlirfError::new_err(e.to_string())
}

fn to_matrix(rows: &Rows) -> PyResult<DMatrix<f64>> {
    model::matrix_from_rows(rows).map_err(err)
}

fn to_rows(m: &DMatrix<f64>) -> Rows {
    model::matrix_to_rows(m)
}

fn to_dict<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn angle(kind: &str, value: f64) -> PyResult<AngleFn> {
    match kind {
        "constant" => Ok(AngleFn::Constant(value)),
        "linear" => Ok(AngleFn::Linear(value)),
        other => Err(PyValueError::new_err(format!("angle kind must be 'constant' or 'linear', got {other:?}"))),
    }
}

#[pyclass(name = "Model", frozen)]
struct PyModel {
    inner: ModelSpec,
}

#[pymethods]
impl PyModel {
    /// Builds a model from its JSON document `{"family", "n", "params"}`.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let inner = serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))?;
        Ok(Self { inner })
    }

    /// One of the ready-made instances: gaussian_var1, dar1, vector_dar,
    /// threshold_ar1, cond_gaussian, euler_diffusion.
    #[staticmethod]
    fn zoo(name: &str) -> PyResult<Self> {
        let inner = match name {
            "gaussian_var1" => zoo::gaussian_var1(),
            "dar1" => zoo::dar1(),
            "vector_dar" => zoo::vector_dar(),
            "threshold_ar1" => zoo::threshold_ar1(),
            "cond_gaussian" => zoo::cond_gaussian(),
            "euler_diffusion" => zoo::euler_diffusion(1),
            other => return Err(PyValueError::new_err(format!("no zoo model named {other:?}"))),
        };
        Ok(Self { inner })
    }

    fn to_json(&self) -> String {
        serde_json::to_string(&self.inner).expect("models serialize")
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn family(&self) -> &'static str {
        self.inner.tag()
    }

    fn __repr__(&self) -> String {
        format!("Model({}, n={})", self.inner.tag(), self.inner.n())
    }

    fn transition_step(&self, y_prev: Vec<f64>, eps: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.transition_step(&y_prev, &eps).map_err(err)
    }

    /// Returns `(states, innovations)`, both `T x n`.
    fn simulate(&self, y0: Vec<f64>, length: usize, seed: u64) -> PyResult<(Rows, Rows)> {
        let traj = self.inner.simulate_path(&y0, length, seed).map_err(err)?;
        let eps = traj.innovations.as_ref().map(to_rows).unwrap_or_default();
        Ok((to_rows(&traj.states), eps))
    }

    fn extract_innovations(&self, y0: Vec<f64>, states: Rows) -> PyResult<Rows> {
        let traj = Trajectory::from_states(y0, to_matrix(&states)?);
        let eps = innovations::extract_gaussian_innovations(&self.inner, &traj).map_err(err)?;
        Ok(to_rows(&eps.values))
    }

    fn extract_uniform_innovations(&self, y0: Vec<f64>, states: Rows) -> PyResult<Rows> {
        let traj = Trajectory::from_states(y0, to_matrix(&states)?);
        let u = innovations::extract_uniform_innovations(&self.inner, &traj).map_err(err)?;
        Ok(to_rows(&u.values))
    }

    fn reconstruct(&self, y0: Vec<f64>, eps: Rows) -> PyResult<Rows> {
        let m = InnovationMatrix::gaussian(to_matrix(&eps)?, self.inner.tag());
        let traj = innovations::reconstruct_path(&self.inner, &y0, &m).map_err(err)?;
        Ok(to_rows(&traj.states))
    }

    /// IRF along one innovation stream `eps` of `H + 1` rows.
    fn irf_single(&self, y_prev: Vec<f64>, delta: Vec<f64>, eps: Rows) -> PyResult<Rows> {
        let eps = to_matrix(&eps)?;
        let horizon = eps.nrows().saturating_sub(1);
        let shock = ShockSpec::innovation(delta, horizon).map_err(err)?;
        let r = irf::irf_single(&self.inner, &y_prev, &eps, &shock).map_err(err)?;
        Ok(to_rows(&r.per_horizon))
    }

    /// Monte Carlo EIRF: dict with `mean` and `stderr`, `(H + 1) x n` each.
    fn eirf(
        &self,
        py: Python<'_>,
        y_prev: Vec<f64>,
        delta: Vec<f64>,
        horizon: usize,
        replicates: usize,
        seed: u64,
    ) -> PyResult<Py<PyAny>> {
        let shock = ShockSpec::innovation(delta, horizon).map_err(err)?;
        let r = irf::eirf(&self.inner, &y_prev, &shock, replicates, seed).map_err(err)?;
        mc_dict(py, &r)
    }

    fn pirf(
        &self,
        py: Python<'_>,
        y_t: Vec<f64>,
        delta: Vec<f64>,
        horizon: usize,
        replicates: usize,
        seed: u64,
    ) -> PyResult<Py<PyAny>> {
        let shock = ShockSpec::observable(delta, horizon).map_err(err)?;
        let r = irf::pirf_expectation(&self.inner, &y_t, &shock, replicates, seed).map_err(err)?;
        mc_dict(py, &r)
    }
}

fn mc_dict(py: Python<'_>, r: &irf::IrfResult) -> PyResult<Py<PyAny>> {
    #[derive(Serialize)]
    struct Out {
        mean: Rows,
        stderr: Option<Rows>,
        replicates: usize,
    }
    to_dict(
        py,
        &Out {
            mean: to_rows(&r.per_horizon),
            stderr: r.mc_stderr.as_ref().map(to_rows),
            replicates: r.n_replicates,
        },
    )
}

#[pyfunction]
fn var1_irf_closed_form(phi: Rows, d: Rows, delta: Vec<f64>, horizon: usize) -> PyResult<Rows> {
    let m = irf::var1_irf_closed_form(&to_matrix(&phi)?, &to_matrix(&d)?, &delta, horizon).map_err(err)?;
    Ok(to_rows(&m))
}

/// Returns `(value, delta_star)`.
#[pyfunction]
fn max_irf(phi: Rows, d: Rows, a: Vec<f64>, h: usize) -> PyResult<(f64, Vec<f64>)> {
    let m = irf::max_irf(&to_matrix(&phi)?, &to_matrix(&d)?, &a, h).map_err(err)?;
    Ok((m.value, m.delta_star))
}

#[pyfunction]
fn skew_exp(b: Rows) -> PyResult<Rows> {
    Ok(to_rows(&idset::skew_exp(&to_matrix(&b)?).map_err(err)?))
}

/// Returns `(lambda, Q, Omega)` with `A = lambda Q Omega`.
#[pyfunction]
fn polar_decompose(a: Rows) -> PyResult<(f64, Rows, Rows)> {
    let p = idset::polar_decompose(&to_matrix(&a)?).map_err(err)?;
    Ok((p.lambda, to_rows(&p.q), to_rows(&p.omega)))
}

#[pyfunction]
#[pyo3(signature = (eps, kind = "linear", value = 0.2))]
fn radial_rotation(eps: Vec<f64>, kind: &str, value: f64) -> PyResult<Vec<f64>> {
    let spec = RadialRotationSpec::planar(angle(kind, value)?);
    idset::radial_rotation_gauss(&eps, &spec).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (u, kind = "linear", value = 0.2))]
fn radial_rotation_uniform(u: Vec<f64>, kind: &str, value: f64) -> PyResult<Vec<f64>> {
    let spec = RadialRotationSpec::planar(angle(kind, value)?);
    idset::radial_rotation_uniform(&u, &spec).map_err(err)
}

/// SVG of the deformed grid in `"uniform"` or `"gaussian"` space.
#[pyfunction]
#[pyo3(signature = (kind = "linear", value = 0.2, space = "uniform", segments = 75))]
fn grid_svg(kind: &str, value: f64, space: &str, segments: usize) -> PyResult<String> {
    let space = match space {
        "uniform" => GridSpace::Uniform,
        "gaussian" => GridSpace::Gaussian,
        other => return Err(PyValueError::new_err(format!("space must be 'uniform' or 'gaussian', got {other:?}"))),
    };
    let spec = RadialRotationSpec::planar(angle(kind, value)?);
    let g = idset::grid_deformation(&spec, segments, idset::DEFAULT_SAMPLES).map_err(err)?;
    Ok(g.to_svg(space))
}

#[pyfunction]
#[pyo3(signature = (series, lags = vec![1, 2, 3, 4, 5]))]
fn estimate_mixing(py: Python<'_>, series: Rows, lags: Vec<usize>) -> PyResult<Py<PyAny>> {
    let acs = bss::sample_autocov(&to_matrix(&series)?, &lags).map_err(err)?;
    let est = bss::estimate_mixing(&acs).map_err(err)?;
    to_dict(py, &est)
}

#[pyfunction]
#[pyo3(signature = (series, seed, level = 0.05, resamples = 199))]
fn markov_test(py: Python<'_>, series: Rows, seed: u64, level: f64, resamples: usize) -> PyResult<Py<PyAny>> {
    let x = to_matrix(&series)?;
    let dict = diagnostics::default_markov_dictionary(x.ncols());
    let r = diagnostics::markov_test(&x, &dict, level, Resampling::new(resamples, seed)).map_err(err)?;
    to_dict(py, &r)
}

#[pyfunction]
#[pyo3(signature = (eps, seed, transforms = vec!["x".to_string(), "x^2".to_string(), "x^3".to_string()], max_lag = 3, level = 0.05, resamples = 199))]
fn strong_white_noise_test(
    py: Python<'_>,
    eps: Rows,
    seed: u64,
    transforms: Vec<String>,
    max_lag: usize,
    level: f64,
    resamples: usize,
) -> PyResult<Py<PyAny>> {
    let tr = transforms
        .iter()
        .map(|l| transforms::by_label(l).ok_or_else(|| PyValueError::new_err(format!("unknown transform {l:?}"))))
        .collect::<PyResult<Vec<_>>>()?;
    let r = diagnostics::strong_white_noise_test(&to_matrix(&eps)?, &tr, max_lag, level, Resampling::new(resamples, seed))
        .map_err(err)?;
    to_dict(py, &r)
}

#[pyfunction]
fn lyapunov_check(py: Python<'_>, gamma: f64, beta: f64, n_draws: usize, seed: u64) -> PyResult<Py<PyAny>> {
    let r = model::lyapunov_check(gamma, beta, n_draws, seed).map_err(err)?;
    to_dict(py, &r)
}

#[pymodule]
fn pynlirf(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", nlirf::VERSION)?;
    m.add("NlirfError", m.py().get_type::<NlirfError>())?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(var1_irf_closed_form, m)?)?;
    m.add_function(wrap_pyfunction!(max_irf, m)?)?;
    m.add_function(wrap_pyfunction!(skew_exp, m)?)?;
    m.add_function(wrap_pyfunction!(polar_decompose, m)?)?;
    m.add_function(wrap_pyfunction!(radial_rotation, m)?)?;
    m.add_function(wrap_pyfunction!(radial_rotation_uniform, m)?)?;
    m.add_function(wrap_pyfunction!(grid_svg, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_mixing, m)?)?;
    m.add_function(wrap_pyfunction!(markov_test, m)?)?;
    m.add_function(wrap_pyfunction!(strong_white_noise_test, m)?)?;
    m.add_function(wrap_pyfunction!(lyapunov_check, m)?)?;
    Ok(())
}
