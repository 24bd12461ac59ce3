use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use crf::crfields::{self, CaseId, CaseParams, TangentField};
use crf::flatten;
use crf::germ::{self, KernelPolynomial};
use crf::quadratic;

fn err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// A truncated defining series w = R(z, conj z).
#[pyclass(frozen, skip_from_py_object)]
#[derive(Clone)]
struct Germ {
    inner: germ::Germ,
}

#[pymethods]
impl Germ {
    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        Ok(Germ { inner: germ::Germ::parse(text).map_err(err)? })
    }

    #[staticmethod]
    fn p1_quadric(trunc: u32) -> Self {
        Germ { inner: germ::Germ::p1_quadric(trunc) }
    }

    fn to_text(&self) -> String {
        self.inner.to_text()
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn trunc(&self) -> u32 {
        self.inner.trunc()
    }

    /// The quadratic pair as strings `(A, B)`.
    fn quadratic(&self) -> (String, String) {
        let q = self.inner.quadratic();
        (q.a.to_string(), q.b.to_string())
    }

    /// Apply w' = w + B(z, w) for a kernel given in kernel-file text.
    fn shear(&self, kernel_text: &str) -> PyResult<Self> {
        let k = KernelPolynomial::parse(kernel_text).map_err(err)?;
        Ok(Germ { inner: self.inner.shear(&k).map_err(err)? })
    }

    fn __repr__(&self) -> String {
        format!("Germ(n={}, trunc={}, terms={})", self.inner.n(), self.inner.trunc(), self.inner.r().len())
    }

    fn __eq__(&self, other: &Germ) -> bool {
        self.inner == other.inner
    }
}

#[pyfunction]
fn classify<'py>(py: Python<'py>, g: &Germ) -> PyResult<Bound<'py, PyDict>> {
    let pair = g.inner.quadratic();
    let d = PyDict::new(py);
    let v = quadratic::is_hermitianizable(&pair);
    d.set_item("hermitianizable", v.flattenable)?;
    d.set_item("lambda", v.lambda.map(|x| x.to_string()))?;
    if g.inner.n() == 2 {
        let c = quadratic::coarse_b_class(&pair).map_err(err)?;
        d.set_item("b_class", c.tag.name())?;
        d.set_item("cosquare_spectrum", c.cosquare_spectrum)?;
        let shapes: Vec<String> = quadratic::recognize(&pair).into_iter().map(|s| s.label).collect();
        d.set_item("shapes", shapes)?;
    }
    Ok(d)
}

/// Canonical tangent field as field-file text.
#[pyfunction]
fn canonical_field(g: &Germ) -> PyResult<String> {
    Ok(crfields::build_canonical_field(&g.inner).map_err(err)?.to_text())
}

/// `(residual term lines, first obstruction or None)` through `order`.
#[pyfunction]
fn obstruction(g: &Germ, order: u32) -> PyResult<(Vec<String>, Option<(Vec<u32>, String)>)> {
    let rep = crfields::obstruction(&g.inner, order).map_err(err)?;
    let first = rep.first_nonzero.map(|(e, c)| (e.0, c.to_string()));
    Ok((rep.residual.term_lines(), first))
}

/// `(L(h) = 0, L(conj h) = 0, L(chi) = 0 or None)`.
#[pyfunction]
#[pyo3(signature = (g, field_text, chi_text=None))]
fn verify_witness(g: &Germ, field_text: &str, chi_text: Option<&str>) -> PyResult<(bool, bool, Option<bool>)> {
    let f = TangentField::parse(field_text).map_err(err)?;
    let chi = chi_text.map(crfields::parse_series_file).transpose().map_err(err)?;
    let w = crfields::verify_witness(&g.inner, &f, chi.as_ref()).map_err(err)?;
    Ok((w.l_h, w.l_hbar, w.l_chi))
}

/// Flattening report text and the final germ.
#[pyfunction]
fn flatten_to_order(g: &Germ, order: u32) -> PyResult<(String, Germ, bool)> {
    let rep = flatten::flatten_to_order(&g.inner, order).map_err(err)?;
    Ok((rep.to_text(), Germ { inner: rep.final_germ.clone() }, rep.obstruction.is_none()))
}

#[pyfunction]
fn uniqueness_nullspace_dim(m: u32) -> PyResult<usize> {
    Ok(flatten::uniqueness_nullspace(m).map_err(err)?.dimension)
}

/// Differences between engine and transcribed display coefficients.
#[pyfunction]
fn case_oracle(case: &str, params: &str) -> PyResult<Vec<(String, Vec<u32>, String, String)>> {
    let id: CaseId = case.parse().map_err(err)?;
    let p: CaseParams = params.parse().map_err(err)?;
    let g = crfields::case_germ(id, &p, 4).map_err(err)?;
    let engine = crfields::engine_case_series(&g).map_err(err)?;
    let display = crfields::case_series(id, &p).map_err(err)?;
    Ok(crfields::case_diff(&engine, &display)
        .into_iter()
        .map(|(n, e, a, b)| (n.to_string(), e.0, a.to_string(), b.to_string()))
        .collect())
}

/// Run the command line in-process: `(exit code, stdout, stderr)`.
#[pyfunction]
fn run_cli(args: Vec<String>) -> (i32, String, String) {
    let o = crf::cli::run(std::iter::once("crf".to_string()).chain(args));
    (o.code, o.stdout, o.stderr)
}

#[pymodule]
fn crf_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Germ>()?;
    m.add_function(wrap_pyfunction!(classify, m)?)?;
    m.add_function(wrap_pyfunction!(canonical_field, m)?)?;
    m.add_function(wrap_pyfunction!(obstruction, m)?)?;
    m.add_function(wrap_pyfunction!(verify_witness, m)?)?;
    m.add_function(wrap_pyfunction!(flatten_to_order, m)?)?;
    m.add_function(wrap_pyfunction!(uniqueness_nullspace_dim, m)?)?;
    m.add_function(wrap_pyfunction!(case_oracle, m)?)?;
    m.add_function(wrap_pyfunction!(run_cli, m)?)?;
    Ok(())
}
