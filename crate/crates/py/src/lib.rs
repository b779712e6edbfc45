//! Python bindings. Rationals cross the boundary as strings such as `"3/8"`,
//! which `fractions.Fraction` parses directly.

use std::str::FromStr;

use clap::Parser;
use pyo3::exceptions::{PyIndexError, PyValueError};
use pyo3::prelude::*;

use urysohn::check::{run_suite, CheckConfig, SUITES};
use urysohn::cli::{parse_space, render, run, Cli};
use urysohn::lift::TypeExpr;
use urysohn::metric::{validate_metric, ExtensionRequest};
use urysohn::numeric::Rat;
use urysohn::select::{metric_selection_level, MetricLevel};
use urysohn::spaces::{point_from_json, Space};
use urysohn::urysohn::{UPoint, UrysohnBuilder};

fn err(e: urysohn::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn rat(s: &str) -> PyResult<Rat> {
    Rat::from_str(s).map_err(|_| PyValueError::new_err(format!("not a rational: {s:?}")))
}

fn json_value(s: &str) -> serde_json::Value {
    serde_json::from_str(s).unwrap_or_else(|_| serde_json::Value::String(s.to_string()))
}

/// The finite rational Urysohn approximation grown by the builder.
#[pyclass(name = "UrysohnBuilder", module = "urysohn_py")]
struct PyBuilder(UrysohnBuilder);

#[pymethods]
impl PyBuilder {
    /// `height=None` removes the bound on numerators and denominators.
    #[new]
    #[pyo3(signature = (height=Some(4)))]
    fn new(height: Option<u32>) -> Self {
        PyBuilder(UrysohnBuilder::new(height))
    }

    fn run_bookkeeping(&mut self, steps: usize) -> usize {
        self.0.run_bookkeeping(steps)
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn distance(&self, a: usize, b: usize) -> PyResult<String> {
        let (a, b) = (self.check(a)?, self.check(b)?);
        Ok(self.0.d(a, b).to_string())
    }

    /// Adds (or finds) a point at the given distances from `base`; returns its index.
    fn realize(&mut self, base: Vec<usize>, targets: Vec<String>) -> PyResult<usize> {
        let targets = targets
            .iter()
            .map(|t| rat(t))
            .collect::<PyResult<Vec<_>>>()?;
        let req = ExtensionRequest::new(base, targets).map_err(err)?;
        Ok(self.0.realize_rational(&req).map_err(err)?.0)
    }

    fn is_metric(&self) -> bool {
        validate_metric(self.0.space()).is_metric()
    }

    fn to_json(&self) -> String {
        self.0.to_json().to_string()
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let v = serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))?;
        Ok(PyBuilder(UrysohnBuilder::from_json(&v).map_err(err)?))
    }
}

impl PyBuilder {
    fn check(&self, i: usize) -> PyResult<UPoint> {
        self.0
            .check_point(UPoint(i))
            .map_err(|e| PyIndexError::new_err(e.to_string()))
    }
}

/// An effective metric space, given by kind name or JSON spec.
#[pyclass(name = "Space", module = "urysohn_py")]
struct PySpace(Space);

#[pymethods]
impl PySpace {
    #[new]
    #[pyo3(signature = (spec="real-line"))]
    fn new(spec: &str) -> PyResult<Self> {
        Ok(PySpace(parse_space(spec).map_err(err)?))
    }

    /// The `i`-th dense element as JSON.
    fn dense(&self, i: usize) -> PyResult<String> {
        let e = self.0.dense_elem(i).map_err(err)?;
        Ok(serde_json::to_string(&e).expect("elements serialize"))
    }

    /// The selection level `n` over the first `n + 1` dense elements.
    fn level(&self, n: u32) -> PyResult<PyLevel> {
        Ok(PyLevel(
            metric_selection_level(self.0.clone(), n).map_err(err)?,
        ))
    }
}

/// One level of the probabilistic selection.
#[pyclass(name = "SelectionLevel", module = "urysohn_py")]
struct PyLevel(MetricLevel);

#[pymethods]
impl PyLevel {
    #[getter]
    fn n(&self) -> u32 {
        self.0.n()
    }

    #[getter]
    fn delta(&self) -> String {
        self.0.delta().to_string()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    /// Exact masses of the selection at `point`, one per level element.
    fn mu(&self, point: &str) -> PyResult<Vec<String>> {
        let x = point_from_json(self.0.space().as_ref(), &json_value(point)).map_err(err)?;
        let d = self.0.mu(&x).map_err(err)?;
        Ok(d.masses().iter().map(Rat::to_string).collect())
    }

    fn sample(&self, point: &str, seed: u64) -> PyResult<usize> {
        let x = point_from_json(self.0.space().as_ref(), &json_value(point)).map_err(err)?;
        Ok(self.0.mu(&x).map_err(err)?.sample_seeded(seed))
    }
}

/// Parses and normalizes a type expression, returning its display form.
#[pyfunction]
#[pyo3(signature = (text, curried=false))]
fn parse_type(text: &str, curried: bool) -> PyResult<String> {
    let t = TypeExpr::from_str(text).map_err(err)?;
    Ok(if curried { t.curried() } else { t }.to_string())
}

/// Runs a named check suite and returns its JSON report.
#[pyfunction]
#[pyo3(signature = (suite, seed=0, trials=100, steps=100, inject_fault=false))]
fn check(
    suite: &str,
    seed: u64,
    trials: usize,
    steps: usize,
    inject_fault: bool,
) -> PyResult<String> {
    let cfg = CheckConfig {
        seed,
        trials,
        steps,
        inject_fault,
        ..CheckConfig::default()
    };
    let report = run_suite(suite, &cfg).map_err(err)?;
    Ok(serde_json::to_string(&report).expect("reports serialize"))
}

/// Runs the command-line tool in process. Returns `(report, ok)`.
#[pyfunction]
fn run_cli(args: Vec<String>) -> PyResult<(String, bool)> {
    let cli = Cli::try_parse_from(std::iter::once("urysohn".to_string()).chain(args))
        .map_err(|e| PyValueError::new_err(e.to_string()))?;
    let outcome = run(&cli).map_err(err)?;
    Ok((render(&outcome), outcome.ok))
}

#[pymodule]
fn urysohn_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyBuilder>()?;
    m.add_class::<PySpace>()?;
    m.add_class::<PyLevel>()?;
    m.add_function(wrap_pyfunction!(parse_type, m)?)?;
    m.add_function(wrap_pyfunction!(check, m)?)?;
    m.add_function(wrap_pyfunction!(run_cli, m)?)?;
    m.add("SUITES", SUITES.to_vec())?;
    Ok(())
}
