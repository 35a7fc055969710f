use eevconv_core::convergence::{self, TargetFunction};
use eevconv_core::freefermion::{self, Bilinear, TfimChain};
use eevconv_core::pauli::{self, ChainContext};
use eevconv_core::spectra::{self, HamiltonianSpec, Observable};
use eevconv_core::{Complex64, Error};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

fn err(e: Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn context(h: &pauli::LocalOperator, n: usize) -> PyResult<ChainContext> {
    ChainContext::for_hamiltonian(h, n).map_err(err)
}

fn target(coefficients: Vec<f64>) -> PyResult<TargetFunction> {
    TargetFunction::new(coefficients).map_err(err)
}

/// Weighted sum of Pauli strings, e.g. `LocalOperator("Z1Z2 + 1.05*X1")`.
#[pyclass(name = "LocalOperator", frozen, from_py_object)]
#[derive(Clone)]
struct PyLocalOperator {
    inner: pauli::LocalOperator,
}

#[pymethods]
impl PyLocalOperator {
    #[new]
    fn new(expr: &str) -> PyResult<Self> {
        Ok(Self {
            inner: expr.parse().map_err(err)?,
        })
    }

    #[getter]
    fn window(&self) -> usize {
        self.inner.window()
    }

    fn terms(&self) -> Vec<(Complex64, String)> {
        self.inner
            .terms()
            .iter()
            .map(|(c, s)| (*c, s.to_string()))
            .collect()
    }

    fn canonical(&self) -> Self {
        Self {
            inner: pauli::canonicalize(&self.inner),
        }
    }

    fn is_hermitian(&self) -> bool {
        self.inner.is_hermitian(1e-12)
    }

    fn operator_norm(&self) -> PyResult<f64> {
        self.inner.operator_norm().map_err(err)
    }

    /// Same operator scaled to unit operator norm.
    fn normalized(&self) -> PyResult<Self> {
        let (inner, _) = self.inner.normalized().map_err(err)?;
        Ok(Self { inner })
    }

    fn __str__(&self) -> String {
        self.inner.to_string()
    }

    fn __repr__(&self) -> String {
        format!("LocalOperator(\"{}\")", self.inner)
    }

    fn __eq__(&self, other: &Self) -> bool {
        self.inner.merged() == other.inner.merged()
    }
}

/// tr(HA)/d on `n` sites.
#[pyfunction]
fn ham_op_trace(h: &PyLocalOperator, a: &PyLocalOperator, n: usize) -> PyResult<Complex64> {
    pauli::ham_op_trace(&h.inner, &a.inner, &context(&h.inner, n)?).map_err(err)
}

/// tr(H²A)/d on `n` sites.
#[pyfunction]
fn ham2_op_trace(h: &PyLocalOperator, a: &PyLocalOperator, n: usize) -> PyResult<Complex64> {
    pauli::ham2_op_trace(&h.inner, &a.inner, &context(&h.inner, n)?).map_err(err)
}

/// tr(H^m)/d for m <= 4.
#[pyfunction]
fn ham_moment(h: &PyLocalOperator, n: usize, m: u32) -> PyResult<f64> {
    pauli::ham_moment(&h.inner, &context(&h.inner, n)?, m).map_err(err)
}

#[pyfunction]
fn obstruction_residual(h: &PyLocalOperator, a: &PyLocalOperator, n: usize) -> PyResult<Complex64> {
    pauli::obstruction_residual(&h.inner, &a.inner, &context(&h.inner, n)?).map_err(err)
}

#[pyfunction]
fn canonicalize(a: &PyLocalOperator) -> PyLocalOperator {
    a.canonical()
}

#[pyfunction]
fn parameter_space_dim(d_loc: u64, kp: u32) -> u64 {
    pauli::parameter_space_dim(d_loc, kp)
}

/// Witness observable of `h`: `(operator, string, tr(G1 A)/d)`.
#[pyfunction]
fn witness(h: &PyLocalOperator) -> PyResult<(PyLocalOperator, String, Complex64)> {
    let w = pauli::witness_operator(&h.inner).map_err(err)?;
    Ok((
        PyLocalOperator { inner: w.operator },
        w.string.to_string(),
        w.g1_overlap,
    ))
}

/// Eigenvalues, momenta and EEV of one chain.
#[pyclass(name = "SpectrumTable", frozen)]
struct PySpectrumTable {
    inner: spectra::SpectrumTable,
}

#[pymethods]
impl PySpectrumTable {
    #[getter]
    fn n(&self) -> usize {
        self.inner.n
    }

    #[getter]
    fn observables(&self) -> Vec<String> {
        self.inner.observables.clone()
    }

    fn __len__(&self) -> usize {
        self.inner.dim()
    }

    fn energies(&self) -> Vec<f64> {
        self.inner.energies().collect()
    }

    fn momenta(&self) -> Vec<usize> {
        self.inner.entries.iter().map(|e| e.momentum).collect()
    }

    fn eev(&self, id: &str) -> PyResult<Vec<Complex64>> {
        Ok(self.inner.column(id).map_err(err)?.into_iter().map(|(_, v)| v).collect())
    }

    /// r_f for the polynomial with the given coefficients (constant first).
    fn r_f(&self, id: &str, coefficients: Vec<f64>) -> PyResult<f64> {
        convergence::r_f(&self.inner, id, &target(coefficients)?).map_err(err)
    }

    fn r_f_l1(&self, id: &str, coefficients: Vec<f64>) -> PyResult<f64> {
        convergence::r_f_l1(&self.inner, id, &target(coefficients)?).map_err(err)
    }

    fn weak_eth(&self, id: &str) -> PyResult<f64> {
        convergence::weak_eth_statistic(&self.inner, id).map_err(err)
    }

    fn excess_kurtosis(&self) -> f64 {
        self.inner.excess_kurtosis()
    }

    fn concentration_fraction(&self, eps: f64) -> f64 {
        spectra::concentration_fraction(&self.inner, eps)
    }
}

/// Eigenvalues and momenta only.
#[pyfunction]
fn diagonalize(py: Python<'_>, h: &PyLocalOperator, n: usize) -> PyResult<PySpectrumTable> {
    let spec = HamiltonianSpec::new(&h.inner, n).map_err(err)?;
    let inner = py.detach(|| spectra::diagonalize(&spec)).map_err(err)?;
    Ok(PySpectrumTable { inner })
}

/// Spectrum plus EEV of each named observable.
#[pyfunction]
fn eev_table(
    py: Python<'_>,
    h: &PyLocalOperator,
    n: usize,
    observables: Vec<(String, PyLocalOperator)>,
) -> PyResult<PySpectrumTable> {
    let spec = HamiltonianSpec::new(&h.inner, n).map_err(err)?;
    let obs: Vec<Observable> = observables
        .into_iter()
        .map(|(id, op)| Observable::new(id, op.inner))
        .collect();
    let inner = py.detach(|| spectra::eev_table(&spec, &obs)).map_err(err)?;
    Ok(PySpectrumTable { inner })
}

/// Pooled least-squares polynomial over several sizes; coefficients,
/// constant first.
#[pyfunction]
fn fit_target(tables: Vec<PyRef<'_, PySpectrumTable>>, id: &str, degree: usize) -> PyResult<Vec<f64>> {
    let refs: Vec<&spectra::SpectrumTable> = tables.iter().map(|t| &t.inner).collect();
    let f = convergence::fit_target(&refs, id, degree, None).map_err(err)?;
    Ok(f.coefficients().to_vec())
}

/// Slope of the linear predictor tr(HA)/tr(Hh).
#[pyfunction]
fn eth_slope(h: &PyLocalOperator, a: &PyLocalOperator, n: usize) -> PyResult<f64> {
    let p = convergence::eth_linear_predictor(&h.inner, &a.inner, &context(&h.inner, n)?).map_err(err)?;
    Ok(p.slope)
}

/// Log–log slope and its standard error.
#[pyfunction]
fn scaling_exponent(points: Vec<(f64, f64)>) -> PyResult<(f64, f64)> {
    let fit = convergence::scaling_exponent(&points).map_err(err)?;
    Ok((fit.slope, fit.stderr))
}

fn chain(n: usize, g: f64, normalize: bool) -> PyResult<TfimChain> {
    let c = TfimChain::new(n, g).map_err(err)?;
    Ok(if normalize { c.normalized() } else { c })
}

/// Monte-Carlo r_f of `zz·Z1Z2 + x·X1` in the transverse-field Ising chain.
/// Returns `(estimate, stderr)`.
#[pyfunction]
#[pyo3(signature = (n, g, zz, x, coefficients, samples, seed, normalize = true))]
#[allow(clippy::too_many_arguments)]
fn tfim_sample_r_f(
    py: Python<'_>,
    n: usize,
    g: f64,
    zz: f64,
    x: f64,
    coefficients: Vec<f64>,
    samples: usize,
    seed: u64,
    normalize: bool,
) -> PyResult<(f64, f64)> {
    let c = chain(n, g, normalize)?;
    let f = target(coefficients)?;
    let est = py
        .detach(|| freefermion::sample_r_f(&c, Bilinear { zz, x }, &f, samples, seed))
        .map_err(err)?;
    Ok((est.estimate, est.stderr))
}

/// Exact r_f by enumerating all 2^n eigenstates.
#[pyfunction]
#[pyo3(signature = (n, g, zz, x, coefficients, normalize = true))]
fn tfim_exact_r_f(n: usize, g: f64, zz: f64, x: f64, coefficients: Vec<f64>, normalize: bool) -> PyResult<f64> {
    let c = chain(n, g, normalize)?;
    let (r, _, _) = c
        .exact_statistics(Bilinear { zz, x }, &target(coefficients)?)
        .map_err(err)?;
    Ok(r)
}

/// Many-body energies of the free-fermion chain (both parity sectors).
#[pyfunction]
#[pyo3(signature = (n, g, normalize = true))]
fn tfim_energies(n: usize, g: f64, normalize: bool) -> PyResult<Vec<f64>> {
    let c = chain(n, g, normalize)?;
    Ok(c
        .enumerate(Bilinear::transverse_field())
        .map_err(err)?
        .into_iter()
        .map(|s| s.energy)
        .collect())
}

#[pymodule]
fn eevconv(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyLocalOperator>()?;
    m.add_class::<PySpectrumTable>()?;
    m.add_function(wrap_pyfunction!(ham_op_trace, m)?)?;
    m.add_function(wrap_pyfunction!(ham2_op_trace, m)?)?;
    m.add_function(wrap_pyfunction!(ham_moment, m)?)?;
    m.add_function(wrap_pyfunction!(obstruction_residual, m)?)?;
    m.add_function(wrap_pyfunction!(canonicalize, m)?)?;
    m.add_function(wrap_pyfunction!(parameter_space_dim, m)?)?;
    m.add_function(wrap_pyfunction!(witness, m)?)?;
    m.add_function(wrap_pyfunction!(diagonalize, m)?)?;
    m.add_function(wrap_pyfunction!(eev_table, m)?)?;
    m.add_function(wrap_pyfunction!(fit_target, m)?)?;
    m.add_function(wrap_pyfunction!(eth_slope, m)?)?;
    m.add_function(wrap_pyfunction!(scaling_exponent, m)?)?;
    m.add_function(wrap_pyfunction!(tfim_sample_r_f, m)?)?;
    m.add_function(wrap_pyfunction!(tfim_exact_r_f, m)?)?;
    m.add_function(wrap_pyfunction!(tfim_energies, m)?)?;
    Ok(())
}
