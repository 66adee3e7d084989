//! Python module `volcap`.
//!
//! Matrix functions are a native class; analysis results come back as plain
//! dicts parsed from the same JSON the command-line tool writes.

use nalgebra::DMatrix;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use serde::Serialize;

use volterra_capacity::asympt::{fit_capacity, Window};
use volterra_capacity::galerkin::{self, QuadraticFormSpec, SubspaceSelector};
use volterra_capacity::modelbvp::{ModelSpectrum, Parity};
use volterra_capacity::{capacity, control, Error};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Parse { .. } | Error::Domain { .. } | Error::Shape { .. } => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn to_dict<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn from_dict<T: serde::de::DeserializeOwned>(py: Python<'_>, value: &Bound<'_, PyAny>) -> PyResult<T> {
    let text: String = py.import("json")?.call_method1("dumps", (value,))?.extract()?;
    serde_json::from_str(&text).map_err(|e| PyValueError::new_err(e.to_string()))
}

/// Piecewise-polynomial matrix function on [0, 1].
#[pyclass(name = "MatrixFunction", module = "volcap", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyMatrixFunction {
    inner: volterra_capacity::MatrixFunction,
}

#[pymethods]
impl PyMatrixFunction {
    /// Monomial coefficients per entry, row-major: `entries[r * cols + c][p]` multiplies t^p.
    #[staticmethod]
    fn from_monomials(rows: usize, cols: usize, entries: Vec<Vec<f64>>) -> PyResult<Self> {
        let inner = volterra_capacity::MatrixFunction::from_monomials(rows, cols, &entries).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn constant(rows: Vec<Vec<f64>>) -> PyResult<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if r == 0 || c == 0 || rows.iter().any(|row| row.len() != c) {
            return Err(PyValueError::new_err("constant matrix must be non-empty and rectangular"));
        }
        let flat: Vec<f64> = rows.concat();
        Ok(Self { inner: volterra_capacity::MatrixFunction::constant(&DMatrix::from_row_slice(r, c, &flat)) })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let inner = serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))?;
        Ok(Self { inner })
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner).map_err(|e| PyRuntimeError::new_err(e.to_string()))
    }

    #[getter]
    fn shape(&self) -> (usize, usize) {
        (self.inner.rows(), self.inner.cols())
    }

    #[getter]
    fn breakpoints(&self) -> Vec<f64> {
        self.inner.breakpoints().to_vec()
    }

    fn eval(&self, t: f64) -> PyResult<Vec<Vec<f64>>> {
        let m = self.inner.eval(t).map_err(to_py)?;
        Ok(m.row_iter().map(|row| row.iter().copied().collect()).collect())
    }

    #[pyo3(signature = (order = 1))]
    fn derivative(&self, order: usize) -> Self {
        Self { inner: self.inner.derivative(order) }
    }

    fn integrate(&self, a: f64, b: f64) -> PyResult<Vec<Vec<f64>>> {
        let m = self.inner.integrate(a, b).map_err(to_py)?;
        Ok(m.row_iter().map(|row| row.iter().copied().collect()).collect())
    }

    fn __repr__(&self) -> String {
        format!(
            "MatrixFunction(shape=({}, {}), degree={}, pieces={})",
            self.inner.rows(),
            self.inner.cols(),
            self.inner.degree(),
            self.inner.pieces().len()
        )
    }
}

fn volterra_spec(z: &PyMatrixFunction, selector: Option<SubspaceSelector>) -> PyResult<QuadraticFormSpec> {
    let spec = QuadraticFormSpec::volterra(z.inner.clone()).map_err(to_py)?;
    Ok(match selector {
        Some(s) => spec.with_selector(s),
        None => spec,
    })
}

fn selector_arg(py: Python<'_>, selector: Option<&Bound<'_, PyAny>>) -> PyResult<Option<SubspaceSelector>> {
    selector.map(|s| from_dict(py, s)).transpose()
}

fn spectrum_of(
    z: &PyMatrixFunction,
    n: usize,
    selector: Option<SubspaceSelector>,
) -> PyResult<galerkin::SpectrumResult> {
    let spec = volterra_spec(z, selector)?;
    let m = galerkin::assemble(&spec, n).map_err(to_py)?;
    let restricted = galerkin::restrict(&m, &spec.selector, n).map_err(to_py)?;
    galerkin::spectrum(&restricted, n).map_err(to_py)
}

/// Predicted order and capacity from the skew jets of `z`.
#[pyfunction]
#[pyo3(signature = (z, j_max = 8, tol = 1e-10))]
fn predict_capacity<'py>(py: Python<'py>, z: &PyMatrixFunction, j_max: usize, tol: f64) -> PyResult<Bound<'py, PyAny>> {
    let form = volterra_capacity::SymplecticForm::new(z.inner.rows()).map_err(to_py)?;
    let result = capacity::predict_capacity(&z.inner, &form, j_max, tol).map_err(to_py)?;
    to_dict(py, &result)
}

/// Galerkin spectrum of the Volterra form. `selector` is a dict such as
/// `{"kind": "moment_constraints", "count": 1}`.
#[pyfunction]
#[pyo3(signature = (z, n = 256, selector = None))]
fn spectrum<'py>(
    py: Python<'py>,
    z: &PyMatrixFunction,
    n: usize,
    selector: Option<&Bound<'py, PyAny>>,
) -> PyResult<Bound<'py, PyAny>> {
    let s = spectrum_of(z, n, selector_arg(py, selector)?)?;
    to_dict(py, &s)
}

/// Fitted order and capacity from a window of the Galerkin spectrum.
#[pyfunction]
#[pyo3(signature = (z, n = 256, selector = None, window = None, j_max = 8))]
fn fit<'py>(
    py: Python<'py>,
    z: &PyMatrixFunction,
    n: usize,
    selector: Option<&Bound<'py, PyAny>>,
    window: Option<(usize, usize)>,
    j_max: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let s = spectrum_of(z, n, selector_arg(py, selector)?)?;
    let window = window.map_or_else(|| Window::default_for(n), |(a, b)| Window::new(a, b));
    let result = fit_capacity(&s, window, j_max).map_err(to_py)?;
    to_dict(py, &result)
}

/// Finite-rank factorization of the skew part, with the capacity bound it implies.
#[pyfunction]
#[pyo3(signature = (z, n = 128, tol = galerkin::DEFAULT_RANK_TOL))]
fn skew_factorize<'py>(py: Python<'py>, z: &PyMatrixFunction, n: usize, tol: f64) -> PyResult<Bound<'py, PyAny>> {
    let spec = volterra_spec(z, None)?;
    let f = galerkin::skew_factorize(&spec, n, tol).map_err(to_py)?;
    let dict = to_dict(py, &f)?;
    dict.set_item("capacity_bound", galerkin::capacity_bound(&f))?;
    Ok(dict)
}

/// Closed-form spectrum of the constant-coefficient model problem.
#[pyfunction]
#[pyo3(signature = (mu, k, length = 1.0, parity = "even", count = 100))]
fn model_spectrum<'py>(
    py: Python<'py>,
    mu: f64,
    k: usize,
    length: f64,
    parity: &str,
    count: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let parity: Parity = serde_json::from_value(serde_json::Value::String(parity.to_owned()))
        .map_err(|e| PyValueError::new_err(e.to_string()))?;
    let model = ModelSpectrum::new(mu, k, length, parity).map_err(to_py)?;
    let dict = PyDict::new(py);
    dict.set_item("order", model.order())?;
    dict.set_item("capacity", model.capacity())?;
    dict.set_item("spectrum", to_dict(py, &model.spectrum(count))?)?;
    Ok(dict.into_any())
}

/// Goh condition (A1 = 0) on a sample grid.
#[pyfunction]
#[pyo3(signature = (z, tol = 1e-10))]
fn goh_check<'py>(py: Python<'py>, z: &PyMatrixFunction, tol: f64) -> PyResult<Bound<'py, PyAny>> {
    to_dict(py, &control::goh_check(&z.inner, tol).map_err(to_py)?)
}

/// Generalized Legendre condition; requires Goh to hold.
#[pyfunction]
#[pyo3(signature = (z, tol = 1e-10))]
fn glc_check<'py>(py: Python<'py>, z: &PyMatrixFunction, tol: f64) -> PyResult<Bound<'py, PyAny>> {
    to_dict(py, &control::glc_check(&z.inner, tol).map_err(to_py)?)
}

/// Bound on the 1-capacity of a second variation with negative definite Hessian `h`.
#[pyfunction]
fn hessian_bound<'py>(py: Python<'py>, z: &PyMatrixFunction, h: &PyMatrixFunction) -> PyResult<Bound<'py, PyAny>> {
    to_dict(py, &control::hessian_bound(&z.inner, &h.inner).map_err(to_py)?)
}

/// Linear-quadratic control problem whose second variation has kernel `z`.
#[pyfunction]
fn realize<'py>(py: Python<'py>, z: &PyMatrixFunction) -> PyResult<Bound<'py, PyAny>> {
    let triple = control::TripleSpec::new(z.inner.clone()).map_err(to_py)?;
    to_dict(py, &control::realize_lq(&triple).map_err(to_py)?)
}

#[pymodule]
fn volcap(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyMatrixFunction>()?;
    m.add_function(wrap_pyfunction!(predict_capacity, m)?)?;
    m.add_function(wrap_pyfunction!(spectrum, m)?)?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add_function(wrap_pyfunction!(skew_factorize, m)?)?;
    m.add_function(wrap_pyfunction!(model_spectrum, m)?)?;
    m.add_function(wrap_pyfunction!(goh_check, m)?)?;
    m.add_function(wrap_pyfunction!(glc_check, m)?)?;
    m.add_function(wrap_pyfunction!(hessian_bound, m)?)?;
    m.add_function(wrap_pyfunction!(realize, m)?)?;
    Ok(())
}
