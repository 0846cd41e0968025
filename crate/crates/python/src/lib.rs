//! Python bindings. Reports cross the boundary as plain dicts and lists.

use std::path::PathBuf;

use ccid_core::counterexample::run_counterexample;
use ccid_core::estimate::{
    bootstrap_se_with, estimate_functional_with, fit_clr, ClrProblem, PropensityModel, DEFAULT_CLR_MAX_ITER,
    DEFAULT_CLR_TOL,
};
use ccid_core::identify::{verify_theorem, TheoremId};
use ccid_core::model::{validate_spec, DgpSpec};
use ccid_core::sampling::{draw_study, export_study, SamplingScheme};
use ccid_core::scenario::Scenario as CoreScenario;
use ccid_core::{fixtures, NumericMode};
use num_rational::BigRational;
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use serde::Serialize;

create_exception!(ccid, CcidError, PyException, "Raised for any error reported by the core library.");

fn err(e: impl std::fmt::Display) -> PyErr {
    CcidError::new_err(e.to_string())
}

/// Serialize to JSON and hand back the parsed Python object.
fn to_py<'py, T: Serialize>(py: Python<'py>, v: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(v).map_err(err)?;
    py.import("json")?.call_method1("loads", (text,))
}

fn theorem(id: &str) -> PyResult<TheoremId> {
    id.parse().map_err(err)
}

fn scheme(json: Option<&str>, id: TheoremId) -> PyResult<SamplingScheme> {
    match json {
        Some(s) => serde_json::from_str(s).map_err(err),
        None => Ok(id.default_scheme()),
    }
}

fn propensity(json: Option<&str>) -> PyResult<PropensityModel> {
    json.map_or(Ok(PropensityModel::Saturated), |s| serde_json::from_str(s).map_err(err))
}

fn numeric_mode(spec: &DgpSpec, exact: Option<bool>) -> PyResult<NumericMode> {
    match exact {
        Some(true) if !spec.is_exact() => Err(err("exact mode needs table kernels with rational entries")),
        Some(true) => Ok(NumericMode::Exact),
        Some(false) => Ok(NumericMode::Float),
        None if spec.is_exact() => Ok(NumericMode::Exact),
        None => Ok(NumericMode::Float),
    }
}

/// A cohort process specification.
#[pyclass(frozen, skip_from_py_object, module = "ccid")]
#[derive(Clone)]
struct Spec {
    inner: DgpSpec,
}

#[pymethods]
impl Spec {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Spec { inner: DgpSpec::from_json(text).map_err(err)? })
    }

    /// One of the bundled processes, e.g. "reference" or "confounded".
    #[staticmethod]
    fn fixture(name: &str) -> PyResult<Self> {
        fixtures::named()
            .into_iter()
            .find(|(n, _)| *n == name)
            .map(|(_, inner)| Spec { inner })
            .ok_or_else(|| err(format!("unknown fixture {name}")))
    }

    #[staticmethod]
    fn fixture_names() -> Vec<&'static str> {
        fixtures::named().into_iter().map(|(n, _)| n).collect()
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    fn hash(&self) -> String {
        self.inner.hash_hex()
    }

    #[getter]
    fn periods(&self) -> usize {
        self.inner.periods
    }

    #[getter]
    fn is_exact(&self) -> bool {
        self.inner.is_exact()
    }

    fn validate<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &validate_spec(&self.inner))
    }

    /// Exact check of one identity. `scheme` is a JSON sampling scheme;
    /// the theorem's default scheme is used when omitted.
    #[pyo3(signature = (theorem_id, scheme_json=None, exact=None))]
    fn verify<'py>(
        &self,
        py: Python<'py>,
        theorem_id: &str,
        scheme_json: Option<&str>,
        exact: Option<bool>,
    ) -> PyResult<Bound<'py, PyAny>> {
        let id = theorem(theorem_id)?;
        let scheme = scheme(scheme_json, id)?;
        let record = match numeric_mode(&self.inner, exact)? {
            NumericMode::Exact => verify_theorem::<BigRational>(&self.inner, &scheme, id),
            NumericMode::Float => verify_theorem::<f64>(&self.inner, &scheme, id),
        }
        .map_err(err)?;
        to_py(py, &record)
    }

    /// Draw a cohort of `n_cohort` subjects and apply a sampling scheme.
    #[pyo3(signature = (theorem_id, n_cohort, seed, scheme_json=None))]
    fn draw(&self, theorem_id: &str, n_cohort: usize, seed: u64, scheme_json: Option<&str>) -> PyResult<Study> {
        let scheme = scheme(scheme_json, theorem(theorem_id)?)?;
        let inner = draw_study(&self.inner, &scheme, n_cohort, seed).map_err(err)?;
        Ok(Study { inner })
    }

    fn __repr__(&self) -> String {
        format!("Spec(periods={}, hash={})", self.inner.periods, &self.inner.hash_hex()[..12])
    }
}

/// A simulated case-control or matched study.
#[pyclass(frozen, module = "ccid")]
struct Study {
    inner: ccid_core::sampling::Study,
}

#[pymethods]
impl Study {
    #[getter]
    fn dropped_cases(&self) -> usize {
        self.inner.dropped_cases()
    }

    #[getter]
    fn n_cases(&self) -> usize {
        match &self.inner {
            ccid_core::sampling::Study::CaseControl(d) => d.n_cases(),
            ccid_core::sampling::Study::Matched(m) => m.sets.len(),
        }
    }

    /// Plug-in estimate of the identifying functional.
    #[pyo3(signature = (theorem_id, propensity_json=None))]
    fn estimate<'py>(
        &self,
        py: Python<'py>,
        theorem_id: &str,
        propensity_json: Option<&str>,
    ) -> PyResult<Bound<'py, PyAny>> {
        let model = propensity(propensity_json)?;
        let e = estimate_functional_with(&self.inner, theorem(theorem_id)?, &model).map_err(err)?;
        to_py(py, &e)
    }

    #[pyo3(signature = (theorem_id, reps, seed, propensity_json=None))]
    fn bootstrap<'py>(
        &self,
        py: Python<'py>,
        theorem_id: &str,
        reps: usize,
        seed: u64,
        propensity_json: Option<&str>,
    ) -> PyResult<Bound<'py, PyAny>> {
        let model = propensity(propensity_json)?;
        let b = bootstrap_se_with(&self.inner, theorem(theorem_id)?, reps, seed, &model).map_err(err)?;
        to_py(py, &b)
    }

    /// Write `<stem>.csv` and `<stem>.manifest.json` into `dir`.
    fn export<'py>(&self, py: Python<'py>, dir: PathBuf, stem: &str) -> PyResult<Bound<'py, PyAny>> {
        let manifest = export_study(&self.inner, &dir, stem).map_err(err)?;
        to_py(py, &manifest)
    }
}

/// A scenario file: process, scheme, theorems and run settings.
#[pyclass(frozen, module = "ccid")]
struct Scenario {
    inner: CoreScenario,
}

#[pymethods]
impl Scenario {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Scenario { inner: CoreScenario::load(&path).map_err(err)? })
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name.clone()
    }

    #[getter]
    fn spec(&self) -> Spec {
        Spec { inner: self.inner.dgp.clone() }
    }

    #[pyo3(signature = (exact=None))]
    fn verify<'py>(&self, py: Python<'py>, exact: Option<bool>) -> PyResult<Bound<'py, PyAny>> {
        let mode = numeric_mode(&self.inner.dgp, exact)?;
        let records = py.detach(|| self.inner.verify(mode)).map_err(err)?;
        to_py(py, &records)
    }

    #[pyo3(signature = (seed=None))]
    fn simulate<'py>(&self, py: Python<'py>, seed: Option<u64>) -> PyResult<Bound<'py, PyAny>> {
        let mode = numeric_mode(&self.inner.dgp, None)?;
        let rows = py.detach(|| self.inner.simulate(mode, seed)).map_err(err)?;
        to_py(py, &rows)
    }
}

/// The survivor-sampling example with two laws sharing one available law.
#[pyfunction]
fn counterexample(py: Python<'_>) -> PyResult<Bound<'_, PyAny>> {
    to_py(py, &run_counterexample())
}

/// Conditional logistic regression. Each set is (case, controls, weight)
/// with feature vectors of length p.
#[pyfunction]
#[pyo3(signature = (p, sets, tol=DEFAULT_CLR_TOL, max_iter=DEFAULT_CLR_MAX_ITER))]
fn clr_fit(
    py: Python<'_>,
    p: usize,
    sets: Vec<(Vec<f64>, Vec<Vec<f64>>, f64)>,
    tol: f64,
    max_iter: usize,
) -> PyResult<Bound<'_, PyAny>> {
    let problem = ClrProblem::from_features(p, sets).map_err(err)?;
    let fit = fit_clr(&problem, &vec![0.0; p], tol, max_iter).map_err(err)?;
    to_py(py, &fit)
}

#[pymodule]
fn ccid(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("CcidError", m.py().get_type::<CcidError>())?;
    m.add("THEOREMS", TheoremId::ALL.iter().map(|t| t.to_string()).collect::<Vec<_>>())?;
    m.add_class::<Spec>()?;
    m.add_class::<Study>()?;
    m.add_class::<Scenario>()?;
    m.add_function(wrap_pyfunction!(counterexample, m)?)?;
    m.add_function(wrap_pyfunction!(clr_fit, m)?)?;
    Ok(())
}
