//! Python bindings for `steenlab`.
//!
//! Functions accept a coefficient as a number (constant), a list of
//! `(k, c)` Fourier pairs, or a JSON string in the config format.

use std::f64::consts::PI;

use num_complex::Complex64;
use pyo3::exceptions::{PyArithmeticError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyString;

use steenlab::deform::{integrate_deformed, verify_theorem1, CMatrix, DeformSettings, DeformationState, Theorem1Tolerances};
use steenlab::dirac::{fundamental_solution, invariants as invariant_set, lambda_scan as scan, monodromy as monodromy_of, monodromy_at};
use steenlab::numkit::IntegratorSettings;
use steenlab::potentials::{FunctionSpec, ScalarCoefficient};
use steenlab::scenario::{run_scenarios, RunConfig, RunOptions};
use steenlab::steen::{solve_oscillator, verify_superposition_identity, Convention, SuperpositionCoeffs};
use steenlab::Error;

const TWO_PI: f64 = 2.0 * PI;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Singularity { .. } | Error::BranchAmbiguity { .. } => PyArithmeticError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn function_spec(obj: &Bound<'_, PyAny>) -> PyResult<FunctionSpec> {
    if let Ok(s) = obj.cast::<PyString>() {
        let text = s.to_str()?;
        return serde_json::from_str(text).map_err(|e| PyValueError::new_err(format!("bad function spec: {e}")));
    }
    if let Ok(v) = obj.extract::<Complex64>() {
        return Ok(if v == Complex64::default() {
            FunctionSpec::Zero
        } else {
            FunctionSpec::constant(v)
        });
    }
    if let Ok(terms) = obj.extract::<Vec<(i64, Complex64)>>() {
        return Ok(FunctionSpec::Fourier { terms });
    }
    Err(PyValueError::new_err("expected a number, a list of (k, coefficient) pairs or a JSON spec"))
}

fn to_python_json(py: Python<'_>, value: &impl serde::Serialize) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn integrator(rtol: f64) -> IntegratorSettings {
    IntegratorSettings {
        abs_tol: rtol,
        rel_tol: rtol,
        ..IntegratorSettings::default()
    }
}

/// Periodic potential `(q1, q2)`.
#[pyclass(name = "Potential", frozen)]
struct PyPotential {
    inner: steenlab::potentials::Potential,
}

#[pymethods]
impl PyPotential {
    #[new]
    #[pyo3(signature = (q1, q2, period = TWO_PI))]
    fn new(q1: &Bound<'_, PyAny>, q2: &Bound<'_, PyAny>, period: f64) -> PyResult<Self> {
        let inner = steenlab::potentials::Potential::new(function_spec(q1)?, function_spec(q2)?, period).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[getter]
    fn period(&self) -> f64 {
        self.inner.period()
    }

    fn __call__(&self, x: f64) -> (Complex64, Complex64) {
        steenlab::potentials::eval_potential(&self.inner, x)
    }

    fn __repr__(&self) -> String {
        let cfg = serde_json::to_string(&self.inner.to_config()).unwrap_or_default();
        format!("Potential({cfg})")
    }
}

/// `S(x0)` as a nested list.
#[pyfunction]
#[pyo3(signature = (potential, lam, x0 = 0.0, cells = 2048, rtol = 1e-10))]
fn monodromy(potential: &PyPotential, lam: Complex64, x0: f64, cells: usize, rtol: f64) -> PyResult<Vec<Vec<Complex64>>> {
    let s = monodromy_at(&potential.inner, lam, x0, cells, &integrator(rtol)).map_err(to_py)?;
    Ok(vec![vec![s.m11, s.m12], vec![s.m21, s.m22]])
}

/// `[tr S, tr S², ...]`.
#[pyfunction]
#[pyo3(signature = (potential, lam, count = 4, cells = 2048, rtol = 1e-10))]
fn invariants(potential: &PyPotential, lam: Complex64, count: usize, cells: usize, rtol: f64) -> PyResult<Vec<Complex64>> {
    let q = &potential.inner;
    let f = fundamental_solution(q, lam, 0.0, 2.0 * q.period(), cells, &integrator(rtol)).map_err(to_py)?;
    let s = monodromy_of(&f).map_err(to_py)?;
    Ok(invariant_set(&s, count).map_err(to_py)?.gamma)
}

/// Rows `(λ, γ₁, det defect, Novikov residual)`.
#[pyfunction]
#[pyo3(signature = (potential, lambdas, cells = 2048, rtol = 1e-10))]
fn lambda_scan(
    py: Python<'_>,
    potential: &PyPotential,
    lambdas: Vec<Complex64>,
    cells: usize,
    rtol: f64,
) -> PyResult<Vec<(Complex64, Complex64, f64, f64)>> {
    let rows = py
        .detach(|| scan(&potential.inner, &lambdas, cells, &integrator(rtol)))
        .map_err(to_py)?;
    Ok(rows
        .into_iter()
        .map(|r| (r.lambda, r.gamma1, r.det_defect, r.novikov_residual))
        .collect())
}

/// Samples `(x, y, y')` of `y'' = ω y` on a uniform grid.
#[pyfunction]
#[pyo3(signature = (omega, y0, dy0, x0 = 0.0, x1 = TWO_PI, cells = 2048, period = TWO_PI, convention = "omega"))]
#[allow(clippy::too_many_arguments)]
fn oscillator(
    omega: &Bound<'_, PyAny>,
    y0: Complex64,
    dy0: Complex64,
    x0: f64,
    x1: f64,
    cells: usize,
    period: f64,
    convention: &str,
) -> PyResult<(Vec<f64>, Vec<Complex64>, Vec<Complex64>)> {
    let coeff = ScalarCoefficient::new(function_spec(omega)?, period).map_err(to_py)?;
    let sol = solve_oscillator(&coeff, parse_convention(convention)?, y0, dy0, x0, x1, cells, &IntegratorSettings::default())
        .map_err(to_py)?;
    let ys = sol.path.values().iter().map(|v| v.v1).collect();
    let dys = sol.path.values().iter().map(|v| v.v2).collect();
    Ok((sol.path.grid().to_vec(), ys, dys))
}

fn parse_convention(s: &str) -> PyResult<Convention> {
    match s {
        "omega" => Ok(Convention::Omega),
        "steen" => Ok(Convention::Steen),
        _ => Err(PyValueError::new_err(format!("unknown convention {s:?}"))),
    }
}

/// Superposition checks for `z² = A u² + 2B u v + C v²` with `u(x0) = 1`,
/// `v'(x0) = 1`. Returns check records as dicts.
#[pyfunction]
#[pyo3(signature = (omega, a, b, c, x1 = TWO_PI, cells = 2048, period = TWO_PI, tolerance = 1e-6, convention = "omega"))]
#[allow(clippy::too_many_arguments)]
fn verify_superposition(
    py: Python<'_>,
    omega: &Bound<'_, PyAny>,
    a: Complex64,
    b: Complex64,
    c: Complex64,
    x1: f64,
    cells: usize,
    period: f64,
    tolerance: f64,
    convention: &str,
) -> PyResult<Py<PyAny>> {
    let coeff = ScalarCoefficient::new(function_spec(omega)?, period).map_err(to_py)?;
    let conv = parse_convention(convention)?;
    let s = IntegratorSettings::default();
    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::default();
    let u = solve_oscillator(&coeff, conv, one, zero, 0.0, x1, cells, &s).map_err(to_py)?;
    let v = solve_oscillator(&coeff, conv, zero, one, 0.0, x1, cells, &s).map_err(to_py)?;
    let coeffs = SuperpositionCoeffs { a, b, c, k: None };
    let records = verify_superposition_identity(&u, &v, &coeffs, tolerance, 1e-10).map_err(to_py)?;
    to_python_json(py, &records)
}

fn c_matrix(obj: &Bound<'_, PyAny>) -> PyResult<CMatrix> {
    if let Ok(name) = obj.extract::<String>() {
        return match name.as_str() {
            "symplectic" => Ok(CMatrix::symplectic()),
            "e12" => Ok(CMatrix::e12()),
            _ => Err(PyValueError::new_err(format!("unknown C {name:?}"))),
        };
    }
    let (c11, c12, c21, c22) = obj.extract::<(Complex64, Complex64, Complex64, Complex64)>()?;
    Ok(CMatrix { c11, c12, c21, c22 })
}

/// Partial-solution pipeline records for one `(q, λ, C)`.
#[pyfunction]
#[pyo3(signature = (potential, lam, c, cells = 2048, alpha_min = -1.0, alpha_max = 1.0, alpha_steps = 41))]
#[allow(clippy::too_many_arguments)]
fn theorem1(
    py: Python<'_>,
    potential: &PyPotential,
    lam: Complex64,
    c: &Bound<'_, PyAny>,
    cells: usize,
    alpha_min: f64,
    alpha_max: f64,
    alpha_steps: usize,
) -> PyResult<Py<PyAny>> {
    let cm = c_matrix(c)?;
    let settings = DeformSettings {
        cells_per_period: cells,
        ..DeformSettings::default()
    };
    let grid: Vec<Complex64> = (0..alpha_steps)
        .map(|i| {
            let t = if alpha_steps > 1 { i as f64 / (alpha_steps - 1) as f64 } else { 0.0 };
            Complex64::new(alpha_min + t * (alpha_max - alpha_min), 0.0)
        })
        .collect();
    let records = py
        .detach(|| verify_theorem1(&potential.inner, lam, &cm, &grid, &settings, &Theorem1Tolerances::default()))
        .map_err(to_py)?;
    to_python_json(py, &records)
}

/// Integrates the deformed flow; returns `(x, f1, f2, alpha)` samples.
/// Raises `ArithmeticError` at a zero crossing.
#[pyfunction]
#[pyo3(signature = (potential, lam, f1, f2, alpha, x0 = 0.0, x1 = TWO_PI, cells = 2048))]
#[allow(clippy::too_many_arguments)]
fn deformed_flow(
    potential: &PyPotential,
    lam: Complex64,
    f1: Complex64,
    f2: Complex64,
    alpha: Complex64,
    x0: f64,
    x1: f64,
    cells: usize,
) -> PyResult<Vec<(f64, Complex64, Complex64, Complex64)>> {
    let state = DeformationState::new(f1, f2, alpha);
    let path = integrate_deformed(&potential.inner, lam, state, x0, x1, cells, &DeformSettings::default()).map_err(to_py)?;
    Ok(path.iter().map(|(x, s)| (x, s.f1, s.f2, s.alpha)).collect())
}

/// Runs a config (JSON text) or the bundled suite and returns the report.
#[pyfunction]
#[pyo3(signature = (config = None, jobs = None))]
fn run(py: Python<'_>, config: Option<&str>, jobs: Option<usize>) -> PyResult<Py<PyAny>> {
    let cfg = match config {
        Some(text) => RunConfig::from_json(text).map_err(to_py)?,
        None => RunConfig::default_suite(),
    };
    let options = RunOptions { jobs, timings: false };
    let report = py.detach(|| run_scenarios(&cfg, &options)).map_err(to_py)?;
    to_python_json(py, &report)
}

#[pymodule]
fn pysteenlab(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyPotential>()?;
    m.add_function(wrap_pyfunction!(monodromy, m)?)?;
    m.add_function(wrap_pyfunction!(invariants, m)?)?;
    m.add_function(wrap_pyfunction!(lambda_scan, m)?)?;
    m.add_function(wrap_pyfunction!(oscillator, m)?)?;
    m.add_function(wrap_pyfunction!(verify_superposition, m)?)?;
    m.add_function(wrap_pyfunction!(theorem1, m)?)?;
    m.add_function(wrap_pyfunction!(deformed_flow, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    Ok(())
}
