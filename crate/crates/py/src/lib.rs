//! Python bindings: the analysis pipeline with JSON in, JSON out, plus a
//! small `Web` convenience class.
//!
//! Build with `cargo build -p websym-py --release` and rename the
//! produced `libwebsym_py.so` (or `.dylib`/`.pyd`) to `websym_py.so` on
//! the Python path; `python/smoke_test.py` automates this.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use websym::report::{self, PipelineError};
use websym::symmetry::WebSpec;

fn perr(e: PipelineError) -> PyErr {
    match e {
        PipelineError::BadInput(m) | PipelineError::InvalidWeb(m) => PyValueError::new_err(m),
        PipelineError::Internal(m) => PyRuntimeError::new_err(m),
    }
}

fn spec_from_str(web_json: &str) -> PyResult<WebSpec> {
    let v: serde_json::Value = serde_json::from_str(web_json)
        .map_err(|e| PyValueError::new_err(format!("bad JSON: {e}")))?;
    report::web_spec_from_json(&v).map_err(perr)
}

/// Full pipeline on a web description; returns the analysis report.
#[pyfunction]
#[pyo3(signature = (web_json, degree_cap=None))]
fn analyze(web_json: &str, degree_cap: Option<u32>) -> PyResult<String> {
    let spec = spec_from_str(web_json)?;
    let rep = report::analyze(&spec, degree_cap).map_err(perr)?;
    Ok(report::to_json(&rep))
}

/// Order-by-order normal form of the extra integral.
#[pyfunction]
fn normal_form(web_json: &str) -> PyResult<String> {
    let spec = spec_from_str(web_json)?;
    let rep = report::normal_form(&spec).map_err(perr)?;
    Ok(report::to_json(&rep))
}

/// Both parallelizability tests.
#[pyfunction]
fn parallelizable(web_json: &str) -> PyResult<String> {
    let spec = spec_from_str(web_json)?;
    let rep = report::parallelizable(&spec).map_err(perr)?;
    Ok(report::to_json(&rep))
}

/// Certificate for one candidate field given as
/// `{"components": [[...], ...]}` (plain-variable coefficients).
#[pyfunction]
fn verify_field(web_json: &str, field_json: &str) -> PyResult<String> {
    let spec = spec_from_str(web_json)?;
    let fv: serde_json::Value = serde_json::from_str(field_json)
        .map_err(|e| PyValueError::new_err(format!("bad JSON: {e}")))?;
    let field = report::field_from_json(&fv, &spec).map_err(perr)?;
    let rep = report::verify_field(&spec, &field).map_err(perr)?;
    Ok(report::to_json(&rep))
}

/// The catalogue of example webs with claims.
#[pyfunction]
fn atlas_list() -> String {
    report::to_json(&websym::atlas::atlas_entries())
}

/// Re-verifies one catalogue entry.
#[pyfunction]
fn atlas_verify(id: &str) -> PyResult<String> {
    let entry = websym::atlas::find_entry(id).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let rep = websym::atlas::verify_entry(&entry)
        .map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok(report::to_json(&rep))
}

/// Re-verifies the whole catalogue; returns the sweep summary.
#[pyfunction]
fn atlas_verify_all() -> PyResult<String> {
    let sweep =
        websym::atlas::verify_all().map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok(report::to_json(&sweep))
}

/// A web description: coordinate foliations plus one extra integral.
#[pyclass]
struct Web {
    spec: WebSpec,
}

#[pymethods]
impl Web {
    /// Web(n, f, base, order=8): f is expression text over x1..xn, base
    /// coordinates are "p/q" strings.
    #[new]
    #[pyo3(signature = (n, f, base, order=8))]
    fn new(n: usize, f: &str, base: Vec<String>, order: u32) -> PyResult<Self> {
        let expr = websym::expr::parse_expression(f, n)
            .map_err(|e| PyValueError::new_err(e.to_string()))?;
        let base = base
            .iter()
            .map(|s| websym::rat::parse_q(s))
            .collect::<Result<Vec<_>, _>>()
            .map_err(PyValueError::new_err)?;
        Ok(Web {
            spec: WebSpec::new(n, expr, base, order),
        })
    }

    /// Partials of f at the base point, as "p/q" strings.
    fn validate(&self) -> PyResult<Vec<String>> {
        let web = websym::symmetry::validate_web(&self.spec)
            .map_err(|e| PyValueError::new_err(e.to_string()))?;
        Ok(web.partials.iter().map(websym::rat::format_q).collect())
    }

    /// Solved symmetry dimension (upper-bound semantics).
    #[pyo3(signature = (degree_cap=None))]
    fn dimension(&self, degree_cap: Option<u32>) -> PyResult<usize> {
        let web = websym::symmetry::validate_web(&self.spec)
            .map_err(|e| PyValueError::new_err(e.to_string()))?;
        let sol = websym::symmetry::solve_symmetries(&web, degree_cap)
            .map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
        Ok(sol.dim())
    }

    /// Full analysis report as JSON.
    #[pyo3(signature = (degree_cap=None))]
    fn analyze(&self, degree_cap: Option<u32>) -> PyResult<String> {
        let rep = report::analyze(&self.spec, degree_cap).map_err(perr)?;
        Ok(report::to_json(&rep))
    }

    fn __repr__(&self) -> String {
        format!(
            "Web(n={}, f=\"{}\", order={})",
            self.spec.n, self.spec.f, self.spec.order
        )
    }
}

#[pymodule]
fn websym_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(analyze, m)?)?;
    m.add_function(wrap_pyfunction!(normal_form, m)?)?;
    m.add_function(wrap_pyfunction!(parallelizable, m)?)?;
    m.add_function(wrap_pyfunction!(verify_field, m)?)?;
    m.add_function(wrap_pyfunction!(atlas_list, m)?)?;
    m.add_function(wrap_pyfunction!(atlas_verify, m)?)?;
    m.add_function(wrap_pyfunction!(atlas_verify_all, m)?)?;
    m.add_class::<Web>()?;
    m.add("__version__", websym::VERSION)?;
    Ok(())
}
