//! Python bindings. Fields cross the boundary as plain lists of
//! coefficients in eigenvalue order; experiment summaries come back as
//! dicts with the same layout as the JSON files.

use num_complex::Complex64;
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};
use serde_json::Value;

use fracwave::harness::{self, ExperimentKind, ExperimentSpec, Setup};
use fracwave::mittag_leffler::{self as mlf};
use fracwave::operators::{self, FamilyKind};
use fracwave::solver::{self, InitialGuess, NonlinearitySpec, SolverConfig};
use fracwave::spectral::{self, DomainSpec, SpectralDomain, SpectralField};

create_exception!(fracwave, FracwaveError, PyException);

fn err(e: fracwave::Error) -> PyErr {
    FracwaveError::new_err(e.to_string())
}

fn family(name: &str) -> PyResult<FamilyKind> {
    name.parse().map_err(err)
}

fn to_py<'py>(py: Python<'py>, v: &Value) -> PyResult<Bound<'py, PyAny>> {
    Ok(match v {
        Value::Null => py.None().into_bound(py),
        Value::Bool(b) => b.into_pyobject(py)?.to_owned().into_any(),
        Value::Number(n) => match n.as_i64() {
            Some(i) => i.into_pyobject(py)?.into_any(),
            None => n.as_f64().unwrap_or(f64::NAN).into_pyobject(py)?.into_any(),
        },
        Value::String(s) => s.into_pyobject(py)?.into_any(),
        Value::Array(items) => {
            let list = PyList::empty(py);
            for item in items {
                list.append(to_py(py, item)?)?;
            }
            list.into_any()
        }
        Value::Object(map) => {
            let dict = PyDict::new(py);
            for (k, item) in map {
                dict.set_item(k, to_py(py, item)?)?;
            }
            dict.into_any()
        }
    })
}

/// E_{alpha,beta}(z).
#[pyfunction]
fn ml(alpha: f64, beta: f64, z: Complex64) -> PyResult<Complex64> {
    mlf::ml(alpha, beta, z).map_err(err)
}

/// (value, branch, disagreement) with disagreement None outside the
/// overlap band.
#[pyfunction]
fn ml_eval(alpha: f64, beta: f64, z: Complex64) -> PyResult<(Complex64, String, Option<f64>)> {
    let ev = mlf::ml_eval(alpha, beta, z).map_err(err)?;
    Ok((ev.value, ev.branch.to_string(), ev.disagreement))
}

/// Scalar multiplier of family "E", "S" or "R" on eigenvalue `lam`.
#[pyfunction]
fn multiplier(family_name: &str, alpha: f64, lam: f64, t: f64) -> PyResult<f64> {
    operators::multiplier(family(family_name)?, alpha, lam, t).map_err(err)
}

/// Admissibility arithmetic as a dict.
#[pyfunction]
fn admissibility<'py>(
    py: Python<'py>,
    n: usize,
    q: f64,
    rho: f64,
    alpha: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let a = spectral::admissibility(n, q, rho, alpha);
    let d = PyDict::new(py);
    d.set_item("beta_max", a.beta_max)?;
    d.set_item("theta_sup", a.theta_sup)?;
    d.set_item("beta_lower", a.beta_lower)?;
    d.set_item("ok", a.ok)?;
    Ok(d)
}

#[pyclass(name = "Domain", frozen)]
struct PyDomain {
    inner: SpectralDomain,
}

#[pymethods]
impl PyDomain {
    /// Box domain; `lengths` defaults to pi on every axis.
    #[new]
    #[pyo3(signature = (grid, modes, lengths=None))]
    fn new(grid: Vec<usize>, modes: Vec<usize>, lengths: Option<Vec<f64>>) -> PyResult<Self> {
        let spec = DomainSpec {
            dimension: grid.len(),
            lengths: lengths.unwrap_or_default(),
            grid,
            modes,
        };
        Ok(Self {
            inner: spectral::build_domain(&spec).map_err(err)?,
        })
    }

    #[staticmethod]
    fn interval(length: f64, grid: usize, modes: usize) -> PyResult<Self> {
        Self::new(vec![grid], vec![modes], Some(vec![length]))
    }

    #[getter]
    fn dimension(&self) -> usize {
        self.inner.dimension()
    }

    #[getter]
    fn mode_count(&self) -> usize {
        self.inner.mode_count()
    }

    fn eigenvalues(&self) -> Vec<f64> {
        self.inner.eigenvalues().to_vec()
    }

    fn grid_points(&self) -> Vec<Vec<f64>> {
        self.inner.grid_points()
    }

    /// Grid samples to coefficients.
    fn transform(&self, values: Vec<f64>) -> PyResult<Vec<f64>> {
        Ok(self.inner.transform(&values).map_err(err)?.into_coeffs())
    }

    fn inverse_transform(&self, coeffs: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner
            .inverse_transform(&SpectralField::new(coeffs))
            .map_err(err)
    }

    fn fractional_norm(&self, coeffs: Vec<f64>, theta: f64) -> PyResult<f64> {
        self.inner
            .fractional_norm(&SpectralField::new(coeffs), theta)
            .map_err(err)
    }

    /// Applies family "E", "S" or "R" at time t.
    fn apply(&self, family_name: &str, alpha: f64, t: f64, coeffs: Vec<f64>) -> PyResult<Vec<f64>> {
        let out = operators::apply(
            &self.inner,
            family(family_name)?,
            alpha,
            t,
            &SpectralField::new(coeffs),
        )
        .map_err(err)?;
        Ok(out.into_coeffs())
    }

    fn __repr__(&self) -> String {
        let s = self.inner.spec();
        format!(
            "Domain(grid={:?}, modes={:?}, lengths={:?})",
            s.grid,
            s.modes,
            s.side_lengths()
        )
    }
}

#[pyclass(name = "Nonlinearity", frozen)]
struct PyNonlinearity {
    inner: NonlinearitySpec,
}

#[pymethods]
impl PyNonlinearity {
    /// f(u) = c·u·|u|^{rho-1}
    #[staticmethod]
    fn power_abs(coefficient: f64, exponent: f64) -> PyResult<Self> {
        let inner = NonlinearitySpec::power_abs(coefficient, exponent);
        inner.validate().map_err(err)?;
        Ok(Self { inner })
    }

    /// f(u) = kappa·u
    #[staticmethod]
    fn linear(kappa: f64) -> Self {
        Self {
            inner: NonlinearitySpec::linear(kappa),
        }
    }

    #[staticmethod]
    fn zero() -> Self {
        Self {
            inner: NonlinearitySpec::zero(),
        }
    }

    /// Piecewise-linear f through the (u, f) points, scaled by `coefficient`.
    #[staticmethod]
    #[pyo3(signature = (points, coefficient=1.0))]
    fn table(points: Vec<(f64, f64)>, coefficient: f64) -> PyResult<Self> {
        let inner = NonlinearitySpec {
            kind: solver::NonlinearityKind::CustomTable,
            coefficient,
            exponent: None,
            table: points.into_iter().map(|(u, f)| [u, f]).collect(),
        };
        inner.validate().map_err(err)?;
        Ok(Self { inner })
    }

    fn __call__(&self, u: f64) -> f64 {
        self.inner.eval(u)
    }

    fn __repr__(&self) -> String {
        format!("{:?}", self.inner)
    }
}

#[pyclass(name = "SolverConfig", frozen)]
struct PySolverConfig {
    inner: SolverConfig,
}

#[pymethods]
impl PySolverConfig {
    #[new]
    #[pyo3(signature = (alpha, t_end, steps, picard_tol=1e-12, picard_max_iters=500, blowup_threshold=1e6, dealias=false, lq_exponent=2.0, theta=0.0, override_admissibility=false))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        alpha: f64,
        t_end: f64,
        steps: usize,
        picard_tol: f64,
        picard_max_iters: usize,
        blowup_threshold: f64,
        dealias: bool,
        lq_exponent: f64,
        theta: f64,
        override_admissibility: bool,
    ) -> PyResult<Self> {
        let inner = SolverConfig {
            alpha,
            t_end,
            steps,
            picard_tol,
            picard_max_iters,
            blowup_threshold,
            dealias,
            lq_exponent,
            theta,
            override_admissibility,
        };
        inner.validate().map_err(err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.inner.alpha
    }

    #[getter]
    fn t_end(&self) -> f64 {
        self.inner.t_end
    }

    #[getter]
    fn steps(&self) -> usize {
        self.inner.steps
    }

    fn __repr__(&self) -> String {
        format!("{:?}", self.inner)
    }
}

#[pyclass(name = "Trajectory", frozen)]
struct PyTrajectory {
    inner: solver::Trajectory,
}

#[pymethods]
impl PyTrajectory {
    #[getter]
    fn times(&self) -> Vec<f64> {
        self.inner.times.clone()
    }

    /// Coefficient lists, one per node.
    #[getter]
    fn fields(&self) -> Vec<Vec<f64>> {
        self.inner
            .fields
            .iter()
            .map(|f| f.coeffs().to_vec())
            .collect()
    }

    #[getter]
    fn final_field(&self) -> Vec<f64> {
        self.inner.final_field().coeffs().to_vec()
    }

    #[getter]
    fn l2_norms(&self) -> Vec<f64> {
        self.inner.diagnostics.iter().map(|d| d.l2_norm).collect()
    }

    #[getter]
    fn lq_norms(&self) -> Vec<f64> {
        self.inner.diagnostics.iter().map(|d| d.lq_norm).collect()
    }

    #[getter]
    fn picard_iters(&self) -> Vec<usize> {
        self.inner
            .diagnostics
            .iter()
            .map(|d| d.picard_iters)
            .collect()
    }

    #[getter]
    fn blown(&self) -> bool {
        self.inner.blown
    }

    #[getter]
    fn warnings(&self) -> Vec<String> {
        self.inner.warnings.clone()
    }

    /// (blown, t_flag) from the threshold test.
    fn blowup(&self) -> (bool, Option<f64>) {
        let r = solver::detect_blowup(&self.inner);
        (r.blown, r.t_flag)
    }

    fn __len__(&self) -> usize {
        self.inner.times.len()
    }
}

fn fields(
    domain: &PyDomain,
    u0: Vec<f64>,
    u1: Vec<f64>,
) -> PyResult<(SpectralField, SpectralField)> {
    let (a, b) = (SpectralField::new(u0), SpectralField::new(u1));
    domain.inner.check_field(&a).map_err(err)?;
    domain.inner.check_field(&b).map_err(err)?;
    Ok((a, b))
}

/// Time-stepped mild solution on a uniform grid.
#[pyfunction]
fn solve(
    py: Python<'_>,
    domain: &PyDomain,
    config: &PySolverConfig,
    nonlinearity: &PyNonlinearity,
    u0: Vec<f64>,
    u1: Vec<f64>,
) -> PyResult<PyTrajectory> {
    let (u0, u1) = fields(domain, u0, u1)?;
    let inner = py
        .detach(|| solver::solve(&domain.inner, &config.inner, &nonlinearity.inner, &u0, &u1))
        .map_err(err)?;
    Ok(PyTrajectory { inner })
}

/// Extends a trajectory by `extra_time` (a whole number of steps).
#[pyfunction]
fn continue_trajectory(
    py: Python<'_>,
    domain: &PyDomain,
    trajectory: &PyTrajectory,
    extra_time: f64,
    config: &PySolverConfig,
    nonlinearity: &PyNonlinearity,
) -> PyResult<PyTrajectory> {
    let inner = py
        .detach(|| {
            solver::continue_trajectory(
                &domain.inner,
                &trajectory.inner,
                extra_time,
                &config.inner,
                &nonlinearity.inner,
            )
        })
        .map_err(err)?;
    Ok(PyTrajectory { inner })
}

/// Whole-trajectory Picard iteration on [0, tau]; `guess` is "linear",
/// "zero" or "frozen". Returns (trajectory, iterations, diverged).
#[pyfunction]
#[pyo3(signature = (domain, config, nonlinearity, u0, u1, tau, guess="linear"))]
#[allow(clippy::too_many_arguments)]
fn solve_picard_global(
    py: Python<'_>,
    domain: &PyDomain,
    config: &PySolverConfig,
    nonlinearity: &PyNonlinearity,
    u0: Vec<f64>,
    u1: Vec<f64>,
    tau: f64,
    guess: &str,
) -> PyResult<(PyTrajectory, usize, bool)> {
    let guess = match guess {
        "linear" => InitialGuess::Linear,
        "zero" => InitialGuess::Zero,
        "frozen" => InitialGuess::Frozen,
        other => {
            return Err(FracwaveError::new_err(format!(
                "unknown initial guess {other:?}"
            )))
        }
    };
    let (u0, u1) = fields(domain, u0, u1)?;
    let g = py
        .detach(|| {
            solver::solve_picard_global(
                &domain.inner,
                &config.inner,
                &nonlinearity.inner,
                &u0,
                &u1,
                tau,
                guess,
            )
        })
        .map_err(err)?;
    Ok((
        PyTrajectory {
            inner: g.trajectory,
        },
        g.iterations,
        g.diverged,
    ))
}

/// Runs one experiment; `spec` is an optional dict of experiment settings
/// (same keys as the config file). Returns the summary dict.
#[pyfunction]
#[pyo3(signature = (kind, domain, config, nonlinearity, spec=None))]
fn run_experiment<'py>(
    py: Python<'py>,
    kind: &str,
    domain: &PyDomain,
    config: &PySolverConfig,
    nonlinearity: &PyNonlinearity,
    spec: Option<&Bound<'py, PyDict>>,
) -> PyResult<Bound<'py, PyAny>> {
    let kind: ExperimentKind = kind.parse().map_err(err)?;
    let spec: ExperimentSpec = match spec {
        None => ExperimentSpec::default(),
        Some(d) => {
            let text: String = py.import("json")?.call_method1("dumps", (d,))?.extract()?;
            serde_json::from_str(&text)
                .map_err(|e| FracwaveError::new_err(format!("bad experiment spec: {e}")))?
        }
    };
    let report = py
        .detach(|| {
            let setup = Setup {
                domain: &domain.inner,
                solver: &config.inner,
                nonlinearity: &nonlinearity.inner,
            };
            harness::run(kind, &spec, &setup)
        })
        .map_err(err)?;
    to_py(py, &report.summary())
}

#[pymodule]
#[pyo3(name = "fracwave")]
pub fn fracwave_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("FracwaveError", m.py().get_type::<FracwaveError>())?;
    m.add_function(wrap_pyfunction!(ml, m)?)?;
    m.add_function(wrap_pyfunction!(ml_eval, m)?)?;
    m.add_function(wrap_pyfunction!(multiplier, m)?)?;
    m.add_function(wrap_pyfunction!(admissibility, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(continue_trajectory, m)?)?;
    m.add_function(wrap_pyfunction!(solve_picard_global, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_class::<PyDomain>()?;
    m.add_class::<PyNonlinearity>()?;
    m.add_class::<PySolverConfig>()?;
    m.add_class::<PyTrajectory>()?;
    Ok(())
}
