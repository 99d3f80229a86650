use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;

use ballsaddle::catalog::{make_affine, make_constant, make_quadratic};
use ballsaddle::certificate::Certificate;
use ballsaddle::config::parse_config;
use ballsaddle::constants::{self, ConstantsReport, EstimateOptions};
use ballsaddle::saddle::SolveOptions;
use ballsaddle::{Error, Matrix, Vector};

create_exception!(ballsaddle_py, BallsaddleError, PyException);
create_exception!(ballsaddle_py, HypothesisError, BallsaddleError);
create_exception!(ballsaddle_py, NonConvergenceError, BallsaddleError);
create_exception!(ballsaddle_py, ConfigError, BallsaddleError);

fn py_err(e: Error) -> PyErr {
    let msg = e.to_string();
    match e {
        Error::Hypothesis(_) | Error::Certification(_) => HypothesisError::new_err(msg),
        Error::NonConvergence { .. } => NonConvergenceError::new_err(msg),
        Error::Config { .. } => ConfigError::new_err(msg),
        _ => BallsaddleError::new_err(msg),
    }
}

fn matrix(rows: Vec<Vec<f64>>) -> PyResult<Matrix> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != m) {
        return Err(BallsaddleError::new_err("ragged matrix"));
    }
    Ok(Matrix::from_fn(n, m, |i, j| rows[i][j]))
}

fn rows(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

/// Serialize through JSON into plain Python objects.
fn to_py<T: serde::Serialize>(py: Python<'_>, v: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(v).map_err(|e| BallsaddleError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn solve_options(heuristic: bool, seed: u64) -> SolveOptions {
    SolveOptions {
        heuristic,
        seed,
        ..SolveOptions::default()
    }
}

/// A C^{1,1} map on the ball of radius `rho`.
#[pyclass(name = "SmoothMap", frozen)]
struct PySmoothMap {
    inner: ballsaddle::catalog::SmoothMap,
}

#[pymethods]
impl PySmoothMap {
    #[staticmethod]
    fn constant(c: Vec<f64>, rho: f64) -> PyResult<Self> {
        let inner = make_constant(Vector::from_vec(c), rho).map_err(py_err)?;
        Ok(PySmoothMap { inner })
    }

    #[staticmethod]
    fn affine(a: Vec<Vec<f64>>, b: Vec<f64>, rho: f64) -> PyResult<Self> {
        let inner = make_affine(matrix(a)?, Vector::from_vec(b), rho).map_err(py_err)?;
        Ok(PySmoothMap { inner })
    }

    /// `F(x)_k = b_k + (A x)_k + xᵀ Q_k x`.
    #[staticmethod]
    fn quadratic(a: Vec<Vec<f64>>, b: Vec<f64>, q: Vec<Vec<Vec<f64>>>, rho: f64) -> PyResult<Self> {
        let q = q.into_iter().map(matrix).collect::<PyResult<Vec<_>>>()?;
        let inner = make_quadratic(matrix(a)?, Vector::from_vec(b), q, rho).map_err(py_err)?;
        Ok(PySmoothMap { inner })
    }

    #[getter]
    fn dimension(&self) -> usize {
        self.inner.dimension()
    }

    #[getter]
    fn rho(&self) -> f64 {
        self.inner.rho()
    }

    fn value(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        let v = self.inner.try_value(&Vector::from_vec(x)).map_err(py_err)?;
        Ok(v.iter().copied().collect())
    }

    fn jacobian(&self, x: Vec<f64>) -> PyResult<Vec<Vec<f64>>> {
        let j = self.inner.try_jacobian(&Vector::from_vec(x)).map_err(py_err)?;
        Ok(rows(&j))
    }

    fn shifted(&self, w: Vec<f64>) -> PyResult<Self> {
        let inner = self.inner.shifted(&Vector::from_vec(w)).map_err(py_err)?;
        Ok(PySmoothMap { inner })
    }

    fn __repr__(&self) -> String {
        format!("SmoothMap(dimension={}, rho={})", self.inner.dimension(), self.inner.rho())
    }
}

/// Closed convex set: a centered ball or a box.
#[pyclass(name = "ConvexSet", frozen)]
struct PyConvexSet {
    inner: ballsaddle::ConvexSet,
}

#[pymethods]
impl PyConvexSet {
    #[staticmethod]
    fn ball(radius: f64) -> PyResult<Self> {
        let inner = ballsaddle::ConvexSet::ball(radius).map_err(py_err)?;
        Ok(PyConvexSet { inner })
    }

    #[staticmethod]
    #[pyo3(name = "box")]
    fn boxed(lower: Vec<f64>, upper: Vec<f64>) -> PyResult<Self> {
        let inner =
            ballsaddle::ConvexSet::boxed(Vector::from_vec(lower), Vector::from_vec(upper)).map_err(py_err)?;
        Ok(PyConvexSet { inner })
    }

    fn project(&self, z: Vec<f64>) -> PyResult<Vec<f64>> {
        let p = self.inner.project(&Vector::from_vec(z)).map_err(py_err)?;
        Ok(p.iter().copied().collect())
    }

    #[pyo3(signature = (z, tol = 1e-12))]
    fn contains(&self, z: Vec<f64>, tol: f64) -> bool {
        self.inner.contains(&Vector::from_vec(z), tol)
    }
}

/// Spectral norm of a dense matrix.
#[pyfunction]
fn op_norm(a: Vec<Vec<f64>>) -> PyResult<f64> {
    constants::op_norm(&matrix(a)?).map_err(py_err)
}

/// `min over ‖y‖ ≤ rho of ‖Φ(0) − Φ′(0)ᵀ y‖`.
#[pyfunction]
fn sigma_vi(phi0: Vec<f64>, jac0: Vec<Vec<f64>>, rho: f64) -> PyResult<f64> {
    constants::sigma_vi(&Vector::from_vec(phi0), &matrix(jac0)?, rho).map_err(py_err)
}

/// `min over y ∈ Y of ‖f′(0)ᵀ y − f(0)‖`.
#[pyfunction]
fn sigma_ba(f0: Vec<f64>, jac0: Vec<Vec<f64>>, y_set: &PyConvexSet) -> PyResult<f64> {
    constants::sigma_ba(&Vector::from_vec(f0), &matrix(jac0)?, &y_set.inner).map_err(py_err)
}

/// Constants report for the VI posed by `phi`.
#[pyfunction]
#[pyo3(signature = (phi, samples = 1000, seed = 0))]
fn vi_constants(py: Python<'_>, phi: &PySmoothMap, samples: usize, seed: u64) -> PyResult<Py<PyAny>> {
    let report = ConstantsReport::vi(&phi.inner, EstimateOptions { samples, seed }).map_err(py_err)?;
    to_py(py, &report)
}

/// Solve the VI on `B_r`; `r` defaults to the admissible radius.
#[pyfunction]
#[pyo3(signature = (phi, r = None, seed = 0, heuristic = false))]
fn solve_vi(py: Python<'_>, phi: &PySmoothMap, r: Option<f64>, seed: u64, heuristic: bool) -> PyResult<Py<PyAny>> {
    let report = ConstantsReport::vi(&phi.inner, EstimateOptions { seed, ..Default::default() }).map_err(py_err)?;
    let r = r.unwrap_or(report.r_max);
    let cert = py
        .detach(|| ballsaddle::vi::solve_vi(&phi.inner, r, &report, &solve_options(heuristic, seed)))
        .map_err(py_err)?;
    to_py(py, &cert)
}

/// Best approximation of `f(x)` from `B_r`; `r` defaults to the admissible radius.
#[pyfunction]
#[pyo3(signature = (f, r = None, seed = 0, heuristic = false))]
fn solve_best_approx(py: Python<'_>, f: &PySmoothMap, r: Option<f64>, seed: u64, heuristic: bool) -> PyResult<Py<PyAny>> {
    let y_set = ballsaddle::ConvexSet::ball(f.inner.rho()).map_err(py_err)?;
    let report = ConstantsReport::ba(&f.inner, &y_set, EstimateOptions { seed, ..Default::default() }).map_err(py_err)?;
    let r = r.unwrap_or(report.r_max);
    let cert = py
        .detach(|| ballsaddle::ba::solve_best_approx(&f.inner, r, &report, &solve_options(heuristic, seed)))
        .map_err(py_err)?;
    to_py(py, &cert)
}

/// Run a JSON config and return the certificate as JSON text.
#[pyfunction]
fn run(py: Python<'_>, config_json: &str) -> PyResult<String> {
    let cfg = parse_config(config_json).map_err(py_err)?;
    py.detach(|| ballsaddle::runner::run(&cfg).and_then(|c| c.to_json()))
        .map_err(py_err)
}

/// Audit a certificate; returns the verification as JSON text.
#[pyfunction]
fn verify(py: Python<'_>, certificate_json: &str) -> PyResult<String> {
    let cert = Certificate::from_json(certificate_json).map_err(py_err)?;
    py.detach(|| ballsaddle::runner::verify(&cert).and_then(|v| v.to_json()))
        .map_err(py_err)
}

#[pymodule]
fn ballsaddle_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySmoothMap>()?;
    m.add_class::<PyConvexSet>()?;
    m.add_function(wrap_pyfunction!(op_norm, m)?)?;
    m.add_function(wrap_pyfunction!(sigma_vi, m)?)?;
    m.add_function(wrap_pyfunction!(sigma_ba, m)?)?;
    m.add_function(wrap_pyfunction!(vi_constants, m)?)?;
    m.add_function(wrap_pyfunction!(solve_vi, m)?)?;
    m.add_function(wrap_pyfunction!(solve_best_approx, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    let py = m.py();
    m.add("BallsaddleError", py.get_type::<BallsaddleError>())?;
    m.add("HypothesisError", py.get_type::<HypothesisError>())?;
    m.add("NonConvergenceError", py.get_type::<NonConvergenceError>())?;
    m.add("ConfigError", py.get_type::<ConfigError>())?;
    Ok(())
}
