//! Python bindings: domains, meshes, the punctured solve and its report,
//! Poincaré-type constants, cone experiments and the config-driven runner.
//!
//! Structured results are returned as plain dicts (decoded from the same
//! JSON the command-line runner writes).

use std::path::PathBuf;
use std::sync::Arc;

use overdet_core::assembly::{ScalarField, WeightSpec};
use overdet_core::cone::{cone_poincare_check, duality_check, mean_value_residuals, radius_grid, ConeExperiment};
use overdet_core::functionals::stability_report;
use overdet_core::geometry::{triangulate, Mesh as CoreMesh, PartLabel, PolygonalDomain};
use overdet_core::poincare::{
    estimate_scalar_constant, estimate_trace_constant, estimate_vector_constant, inequality_audit, r_mean as core_r_mean,
};
use overdet_core::report::{compare_runs as core_compare, cone_data, parse_config, parse_polygon, run_experiment as core_run};
use overdet_core::singular::solve_punctured;
use overdet_core::LabError;
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

fn err(e: LabError) -> PyErr {
    match e {
        LabError::Io(io) => PyIOError::new_err(io.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn to_py<T: serde::Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn label(name: &str) -> PyResult<PartLabel> {
    name.parse::<PartLabel>().map_err(err)
}

/// Polygonal domain with labeled boundary edges.
#[pyclass(frozen)]
struct Domain {
    inner: PolygonalDomain,
}

#[pymethods]
impl Domain {
    /// `r(t) = base_radius (1 + Σ a_k cos kt + Σ b_k sin kt)` with the origin marker at 0.
    #[staticmethod]
    #[pyo3(signature = (cos = vec![], sin = vec![], base_radius = 1.0, n_boundary = 512))]
    fn fourier(cos: Vec<f64>, sin: Vec<f64>, base_radius: f64, n_boundary: usize) -> PyResult<Self> {
        Ok(Self { inner: PolygonalDomain::fourier(base_radius, &cos, &sin, n_boundary).map_err(err)? })
    }

    #[staticmethod]
    #[pyo3(signature = (a, b, n_boundary = 512))]
    fn ellipse(a: f64, b: f64, n_boundary: usize) -> PyResult<Self> {
        Ok(Self { inner: PolygonalDomain::ellipse(a, b, n_boundary).map_err(err)? })
    }

    #[staticmethod]
    #[pyo3(signature = (x0 = 0.0, y0 = 0.0, x1 = 1.0, y1 = 1.0))]
    fn rectangle(x0: f64, y0: f64, x1: f64, y1: f64) -> PyResult<Self> {
        Ok(Self { inner: PolygonalDomain::rectangle(x0, y0, x1, y1).map_err(err)? })
    }

    /// Sector of the given opening with apex at 0; arc `Gamma0`, sides `Gamma1`.
    #[staticmethod]
    #[pyo3(signature = (angle, radius = 1.0, n_arc = 64, n_side = 32))]
    fn sector(angle: f64, radius: f64, n_arc: usize, n_side: usize) -> PyResult<Self> {
        Ok(Self { inner: PolygonalDomain::sector(angle, radius, n_arc, n_side).map_err(err)? })
    }

    /// Polygon from `x y LABEL` lines plus optional `origin x y` / `apex x y`.
    #[staticmethod]
    fn from_text(text: &str) -> PyResult<Self> {
        Ok(Self { inner: parse_polygon(text).map_err(err)? })
    }

    #[getter]
    fn area(&self) -> f64 {
        self.inner.area()
    }

    #[getter]
    fn perimeter(&self) -> f64 {
        self.inner.perimeter()
    }

    fn vertices(&self) -> Vec<(f64, f64)> {
        self.inner.vertices().iter().map(|p| (p.x, p.y)).collect()
    }

    fn mesh(&self, h: f64) -> PyResult<Mesh> {
        Ok(Mesh { inner: Arc::new(triangulate(&self.inner, h).map_err(err)?) })
    }

    fn __repr__(&self) -> String {
        format!("Domain({} edges, area {:.6})", self.inner.num_edges(), self.inner.area())
    }
}

/// Triangle mesh of a domain.
#[pyclass(frozen)]
struct Mesh {
    inner: Arc<CoreMesh>,
}

#[pymethods]
impl Mesh {
    #[staticmethod]
    fn from_text(text: &str) -> PyResult<Self> {
        Ok(Self { inner: Arc::new(CoreMesh::from_text(text).map_err(err)?) })
    }

    fn to_text(&self) -> String {
        self.inner.to_text()
    }

    #[getter]
    fn num_vertices(&self) -> usize {
        self.inner.num_vertices()
    }

    #[getter]
    fn num_triangles(&self) -> usize {
        self.inner.num_triangles()
    }

    #[getter]
    fn h(&self) -> f64 {
        self.inner.h()
    }

    #[getter]
    fn area(&self) -> f64 {
        self.inner.area()
    }

    fn vertices(&self) -> Vec<(f64, f64)> {
        self.inner.vertices().iter().map(|p| (p.x, p.y)).collect()
    }

    fn triangles(&self) -> Vec<[usize; 3]> {
        self.inner.triangles().to_vec()
    }

    /// Relabels boundary edges: `fn((ax, ay), (bx, by)) -> "Gamma0" | "Gamma1" | "Whole"`.
    fn relabeled(&self, py: Python<'_>, label_of: Py<PyAny>) -> PyResult<Mesh> {
        let failure = std::cell::RefCell::new(None);
        let m = self
            .inner
            .relabeled(|a, b| {
                let r = label_of.call1(py, ((a.x, a.y), (b.x, b.y))).and_then(|v| v.extract::<String>(py)).and_then(|s| label(&s));
                match r {
                    Ok(l) => l,
                    Err(e) => {
                        failure.borrow_mut().get_or_insert(e);
                        PartLabel::Whole
                    }
                }
            })
            .map_err(err)?;
        match failure.into_inner() {
            Some(e) => Err(e),
            None => Ok(Mesh { inner: Arc::new(m) }),
        }
    }

    fn __repr__(&self) -> String {
        format!("Mesh({} vertices, {} triangles, h = {:.4})", self.inner.num_vertices(), self.inner.num_triangles(), self.inner.h())
    }
}

/// Solves the punctured problem and returns the functional report as a dict.
#[pyfunction]
#[pyo3(signature = (mesh, c = 0.0))]
fn stability(py: Python<'_>, mesh: &Mesh, c: f64) -> PyResult<Py<PyAny>> {
    let report = py.detach(|| solve_punctured(&mesh.inner, c).and_then(|s| stability_report(&s))).map_err(err)?;
    to_py(py, &report)
}

/// Mean-zero weighted Poincaré constant `μ̄⁻¹` (weight `δ^α` to `part`).
#[pyfunction]
#[pyo3(signature = (mesh, alpha = 0.0, part = "Whole"))]
fn scalar_constant(py: Python<'_>, mesh: &Mesh, alpha: f64, part: &str) -> PyResult<f64> {
    let w = WeightSpec::new(alpha, label(part)?).map_err(err)?;
    Ok(py.detach(|| estimate_scalar_constant(&mesh.inner, &w)).map_err(err)?.constant)
}

#[pyfunction]
#[pyo3(signature = (mesh, a = "Whole", alpha = 0.0))]
fn trace_constant(py: Python<'_>, mesh: &Mesh, a: &str, alpha: f64) -> PyResult<f64> {
    let w = WeightSpec::new(alpha, PartLabel::Whole).map_err(err)?;
    let a = label(a)?;
    Ok(py.detach(|| estimate_trace_constant(&mesh.inner, a, &w)).map_err(err)?.constant)
}

/// Vector-field constant with zero normal trace on the `a` part.
#[pyfunction]
#[pyo3(signature = (mesh, a = "Gamma1", alpha = 0.0, weight_part = "Whole"))]
fn vector_constant(py: Python<'_>, mesh: &Mesh, a: &str, alpha: f64, weight_part: &str) -> PyResult<f64> {
    let w = WeightSpec::new(alpha, label(weight_part)?).map_err(err)?;
    let a = label(a)?;
    Ok(py.detach(|| estimate_vector_constant(&mesh.inner, a, &w)).map_err(err)?.constant)
}

#[pyfunction]
#[pyo3(signature = (mesh, trials = 1000, seed = 42))]
fn audit(py: Python<'_>, mesh: &Mesh, trials: usize, seed: u64) -> PyResult<Py<PyAny>> {
    let table = py.detach(|| inequality_audit(&mesh.inner, trials, seed)).map_err(err)?;
    to_py(py, &table)
}

#[pyfunction]
fn r_mean(values: Vec<f64>, weights: Vec<f64>, r: f64) -> PyResult<f64> {
    core_r_mean(&values, &weights, r).map_err(err)
}

/// Cap means, duality check and cone Poincaré bound for named cone data
/// (`one`, `saddle`, `one_plus_saddle`, `corner`, `random_harmonic`).
#[pyfunction]
#[pyo3(signature = (mesh, f = "saddle", h_fields = vec!["one".to_string(), "saddle".to_string()], radii = 10, seed = 0))]
fn cone(py: Python<'_>, mesh: &Mesh, f: &str, h_fields: Vec<String>, radii: usize, seed: u64) -> PyResult<Py<PyAny>> {
    let m = mesh.inner.clone();
    let result = py
        .detach(|| -> overdet_core::Result<serde_json::Value> {
            let exp = ConeExperiment::new(m.clone(), cone_data(f, &m, seed)?)?;
            let mv = mean_value_residuals(&exp, &radius_grid(&m, radii)?)?;
            let fields =
                h_fields.iter().map(|n| Ok(ScalarField::interpolate(m.clone(), cone_data(n, &m, seed)?))).collect::<overdet_core::Result<Vec<_>>>()?;
            let dual = duality_check(&exp, &fields)?;
            let cp = cone_poincare_check(&exp)?;
            Ok(serde_json::json!({"mean_value": mv, "duality": dual, "cone_poincare": cp, "delta": exp.delta}))
        })
        .map_err(err)?;
    to_py(py, &result)
}

/// Runs a config (given as text) and writes the result files into `out_dir`.
#[pyfunction]
fn run_experiment(py: Python<'_>, config: &str, out_dir: PathBuf) -> PyResult<Py<PyAny>> {
    let cfg = parse_config(config, None).map_err(err)?;
    let summary = py.detach(|| core_run(&cfg, &out_dir)).map_err(err)?;
    to_py(py, &serde_json::json!({"rows": summary.rows, "errors": summary.errors, "out_dir": summary.out_dir}))
}

#[pyfunction]
fn compare_runs(py: Python<'_>, dir_a: PathBuf, dir_b: PathBuf) -> PyResult<Py<PyAny>> {
    to_py(py, &core_compare(&dir_a, &dir_b).map_err(err)?)
}

#[pymodule]
fn overdet(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Domain>()?;
    m.add_class::<Mesh>()?;
    m.add_function(wrap_pyfunction!(stability, m)?)?;
    m.add_function(wrap_pyfunction!(scalar_constant, m)?)?;
    m.add_function(wrap_pyfunction!(trace_constant, m)?)?;
    m.add_function(wrap_pyfunction!(vector_constant, m)?)?;
    m.add_function(wrap_pyfunction!(audit, m)?)?;
    m.add_function(wrap_pyfunction!(r_mean, m)?)?;
    m.add_function(wrap_pyfunction!(cone, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(compare_runs, m)?)?;
    Ok(())
}
