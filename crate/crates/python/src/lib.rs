use parthines::harness::{
    convergence_study, mixed_error_norm as mixed_norm, model_reference, run_sweep, tolerance_grid,
    ReferenceOptions, SweepSpec,
};
use parthines::models::{parse_config, write_config};
use parthines::stability::{self, Boundary, RecursionMethod, TestSystemParams};
use parthines::{
    integrate_adaptive, integrate_constant, AdaptiveMethod, AdaptiveOptions, BlockAssignment,
    ConstantMethod, ModelKind, ModelSpec, StageSolveConfig, ToleranceSpec,
};
use pyo3::create_exception;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

create_exception!(parthines_py, NumericalError, PyRuntimeError);

fn to_py(e: parthines::Error) -> PyErr {
    match e {
        parthines::Error::Precondition(_)
        | parthines::Error::Config { .. }
        | parthines::Error::Dimension { .. } => PyValueError::new_err(e.to_string()),
        _ => NumericalError::new_err(e.to_string()),
    }
}

fn assignment(s: &str) -> PyResult<BlockAssignment> {
    BlockAssignment::parse(s)
        .ok_or_else(|| PyValueError::new_err(format!("unknown assignment '{s}'")))
}

fn adaptive(s: &str) -> PyResult<AdaptiveMethod> {
    AdaptiveMethod::parse(s)
        .ok_or_else(|| PyValueError::new_err(format!("unknown adaptive method '{s}'")))
}

fn recursion(s: &str) -> PyResult<RecursionMethod> {
    RecursionMethod::parse(s).ok_or_else(|| PyValueError::new_err(format!("unknown method '{s}'")))
}

/// Result of one integration. States are in canonical order (voltages first).
#[pyclass(name = "RunResult", frozen, get_all)]
struct PyRunResult {
    t: Vec<f64>,
    states: Vec<Vec<f64>>,
    final_state: Vec<f64>,
    fevals: f64,
    startup_fevals: f64,
    jacobian_evals: u64,
    accepted: u64,
    rejected: u64,
}

#[pymethods]
impl PyRunResult {
    fn __repr__(&self) -> String {
        format!(
            "RunResult(points={}, fevals={}, accepted={}, rejected={})",
            self.t.len(),
            self.fevals,
            self.accepted,
            self.rejected
        )
    }
}

/// One point of a tolerance sweep.
#[pyclass(name = "SweepPoint", frozen, get_all)]
struct PySweepPoint {
    method: String,
    tol: f64,
    fevals: f64,
    jacevals: u64,
    accepted: u64,
    rejected: u64,
    final_error: f64,
    failed: bool,
}

/// A benchmark model: `Model("hh")`, `Model("sds")` or `Model.from_config(text)`.
#[pyclass(name = "Model", frozen)]
struct PyModel {
    spec: ModelSpec,
}

#[pymethods]
impl PyModel {
    #[new]
    fn new(kind: &str) -> PyResult<Self> {
        let kind = ModelKind::parse(kind)
            .ok_or_else(|| PyValueError::new_err(format!("unknown model '{kind}'")))?;
        Ok(PyModel {
            spec: ModelSpec::standard(kind),
        })
    }

    #[staticmethod]
    fn from_config(text: &str) -> PyResult<Self> {
        Ok(PyModel {
            spec: parse_config(text).map_err(to_py)?,
        })
    }

    fn to_config(&self) -> String {
        write_config(&self.spec)
    }

    #[getter]
    fn kind(&self) -> &'static str {
        self.spec.kind().name()
    }

    #[getter]
    fn t_end(&self) -> f64 {
        self.spec.t_end()
    }

    #[getter]
    fn initial(&self) -> Vec<f64> {
        self.spec.initial().to_vec()
    }

    /// Typical component sizes in canonical order.
    fn typical_size(&self) -> Vec<f64> {
        self.spec
            .build(BlockAssignment::VoltagesAsX)
            .canonical_typical_size()
    }

    /// Certified reference end state and the disagreement of its two paths.
    fn reference(&self, py: Python<'_>) -> PyResult<(Vec<f64>, f64)> {
        let spec = self.spec.clone();
        py.detach(move || model_reference(&spec, &ReferenceOptions::for_model(spec.kind())))
            .map_err(to_py)
    }

    /// Integrates to `t_end`. Constant step methods (`hines`, `cmhines`)
    /// take `steps`; adaptive ones take `tol`.
    #[pyo3(signature = (method, tol = 1e-4, assignment = "voltages", steps = 1000))]
    fn integrate(
        &self,
        py: Python<'_>,
        method: &str,
        tol: f64,
        assignment: &str,
        steps: usize,
    ) -> PyResult<PyRunResult> {
        let problem = self.spec.build(self::assignment(assignment)?);
        let constant = ConstantMethod::parse(method);
        let adaptive = match constant {
            Some(_) => None,
            None => Some(adaptive(method)?),
        };
        let run = py.detach(|| -> parthines::Result<_> {
            let sys = problem.system.as_ref();
            if let Some(m) = constant {
                let r = integrate_constant(
                    sys,
                    &problem.initial,
                    problem.t_end,
                    steps,
                    m,
                    &StageSolveConfig::default(),
                    true,
                )?;
                Ok((r.samples, r.counter))
            } else {
                let tol = ToleranceSpec::from_typical(tol, &sys.typical_size())?;
                let r = integrate_adaptive(
                    sys,
                    &problem.initial,
                    problem.t_end,
                    &tol,
                    adaptive.unwrap(),
                    &AdaptiveOptions::default(),
                )?;
                Ok((r.samples, r.counter))
            }
        });
        let (samples, counter) = run.map_err(to_py)?;
        let states: Vec<Vec<f64>> = samples.iter().map(|s| problem.to_canonical(s)).collect();
        Ok(PyRunResult {
            t: samples.iter().map(|s| s.t).collect(),
            final_state: states.last().cloned().unwrap_or_default(),
            states,
            fevals: counter.fevals,
            startup_fevals: counter.startup_fevals,
            jacobian_evals: counter.jacobian_evals,
            accepted: counter.steps_accepted,
            rejected: counter.steps_rejected,
        })
    }

    /// Constant step errors against `reference` for the given step counts.
    /// Returns `([(h, error), ...], slope)`.
    #[pyo3(signature = (method, steps, reference, assignment = "voltages"))]
    fn convergence(
        &self,
        method: &str,
        steps: Vec<usize>,
        reference: Vec<f64>,
        assignment: &str,
    ) -> PyResult<(Vec<(f64, f64)>, f64)> {
        let m = ConstantMethod::parse(method).ok_or_else(|| {
            PyValueError::new_err(format!("unknown constant step method '{method}'"))
        })?;
        let t = convergence_study(
            &self.spec,
            self::assignment(assignment)?,
            m,
            &steps,
            &reference,
        )
        .map_err(to_py)?;
        Ok((
            t.rows.iter().map(|r| (r.h, r.final_error)).collect(),
            t.slope,
        ))
    }

    /// Tolerance sweep; `tols` defaults to the 49-point grid.
    #[pyo3(signature = (methods, reference, assignment = "voltages", tols = None, threads = 1))]
    fn sweep(
        &self,
        py: Python<'_>,
        methods: Vec<String>,
        reference: Vec<f64>,
        assignment: &str,
        tols: Option<Vec<f64>>,
        threads: usize,
    ) -> PyResult<Vec<PySweepPoint>> {
        let methods = methods
            .iter()
            .map(|m| adaptive(m))
            .collect::<PyResult<Vec<_>>>()?;
        let spec = SweepSpec {
            tol_list: tols.unwrap_or_else(tolerance_grid),
            ..SweepSpec::standard(self.spec.clone(), self::assignment(assignment)?, methods)
        };
        let points = py
            .detach(|| run_sweep(&spec, &reference, threads))
            .map_err(to_py)?;
        Ok(points
            .into_iter()
            .map(|p| PySweepPoint {
                method: p.method.name().to_string(),
                tol: p.tol,
                fevals: p.fevals,
                jacevals: p.jacevals,
                accepted: p.accepted,
                rejected: p.rejected,
                final_error: p.final_error,
                failed: p.failed,
            })
            .collect())
    }

    fn __repr__(&self) -> String {
        format!("Model('{}', t_end={})", self.kind(), self.t_end())
    }
}

/// `x / (e^x - 1)` with the removable singularity filled in.
#[pyfunction]
fn psi(x: f64) -> f64 {
    parthines::models::psi(x)
}

#[pyfunction]
fn mixed_error_norm(z: Vec<f64>, z_ref: Vec<f64>, typical: Vec<f64>) -> PyResult<f64> {
    if z.len() != z_ref.len() || z.len() != typical.len() {
        return Err(PyValueError::new_err("vectors differ in length"));
    }
    Ok(mixed_norm(&z, &z_ref, &typical))
}

/// Returns `(stable, margin, lower_bound)` for the stability functions
/// `alpha`, `beta` and coupling `gamma`.
#[pyfunction]
fn is_stable(alpha: f64, beta: f64, gamma: f64) -> PyResult<(bool, f64, f64)> {
    let v = stability::is_stable(alpha, beta, gamma).map_err(to_py)?;
    Ok((v.stable, v.margin, v.lower))
}

/// One-step matrix of `method` (`modified`, `hines` or `strang`) for the
/// test system `x' = mu x + a y, y' = b x + lambda y`.
#[pyfunction]
#[pyo3(name = "recursion_matrix", signature = (mu, lambda_, a, b, h, method = "modified"))]
fn recursion_matrix_py(
    mu: f64,
    lambda_: f64,
    a: f64,
    b: f64,
    h: f64,
    method: &str,
) -> PyResult<[[f64; 2]; 2]> {
    let p = TestSystemParams::new(mu, lambda_, a, b);
    stability::recursion_matrix(&p, h, recursion(method)?).map_err(to_py)
}

/// Largest stable step, or `None` when every step size is stable.
#[pyfunction]
#[pyo3(signature = (mu, lambda_, a, b, method = "modified"))]
fn stability_boundary_h(
    mu: f64,
    lambda_: f64,
    a: f64,
    b: f64,
    method: &str,
) -> PyResult<Option<f64>> {
    let p = TestSystemParams::new(mu, lambda_, a, b);
    Ok(
        match stability::stability_boundary_h(&p, recursion(method)?).map_err(to_py)? {
            Boundary::Unbounded => None,
            Boundary::Critical(h) => Some(h),
        },
    )
}

#[pyfunction]
#[pyo3(signature = (mu, lambda_, a, b))]
fn monotonicity_nu(mu: f64, lambda_: f64, a: f64, b: f64) -> (f64, f64) {
    stability::monotonicity_nu(&TestSystemParams::new(mu, lambda_, a, b))
}

#[pymodule]
fn parthines_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyModel>()?;
    m.add_class::<PyRunResult>()?;
    m.add_class::<PySweepPoint>()?;
    m.add_function(wrap_pyfunction!(psi, m)?)?;
    m.add_function(wrap_pyfunction!(mixed_error_norm, m)?)?;
    m.add_function(wrap_pyfunction!(is_stable, m)?)?;
    m.add_function(wrap_pyfunction!(recursion_matrix_py, m)?)?;
    m.add_function(wrap_pyfunction!(stability_boundary_h, m)?)?;
    m.add_function(wrap_pyfunction!(monotonicity_nu, m)?)?;
    m.add("NumericalError", m.py().get_type::<NumericalError>())?;
    Ok(())
}
