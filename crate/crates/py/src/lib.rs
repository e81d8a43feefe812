//! Python bindings: circuits, compiled Hamiltonians and separable-Hamiltonian
//! instances, exchanged with Python as the same JSON documents the CLI uses.

use hamlab::circuit::{self, VerificationCircuit};
use hamlab::cldm::{self, ConsistencyConfig, ProjectionOracle};
use hamlab::kitaev::{self, KitaevHamiltonian};
use hamlab::optimize::{self, SLHInstance};
use hamlab::qstate::PureState;
use hamlab::{io, linalg, spectral, CVector, HamlabError};
use num_complex::Complex64;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn err(e: HamlabError) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn state(amplitudes: Vec<Complex64>) -> PyResult<PureState> {
    PureState::from_amplitudes(CVector::from_vec(amplitudes)).map_err(err)
}

#[pyclass(name = "Circuit", module = "pyhamlab", from_py_object)]
#[derive(Clone)]
struct PyCircuit {
    inner: VerificationCircuit,
}

#[pymethods]
impl PyCircuit {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self { inner: io::parse_circuit(text).map_err(err)? })
    }

    /// Product test on registers of the given sizes.
    #[staticmethod]
    fn product_test(registers: Vec<usize>) -> PyResult<Self> {
        Ok(Self { inner: circuit::product_test_circuit(&registers).map_err(err)? })
    }

    /// Wraps a one-proof circuit so that it reads its proof from the first
    /// copy and runs the product test across both copies.
    fn hm_wrap(&self, registers: Vec<usize>) -> PyResult<Self> {
        Ok(Self { inner: circuit::hm_wrap(&self.inner, &registers).map_err(err)? })
    }

    fn to_json(&self) -> PyResult<String> {
        io::circuit_to_json(&self.inner).map_err(err)
    }

    #[getter]
    fn steps(&self) -> usize {
        self.inner.steps()
    }

    #[getter]
    fn witness_qubits(&self) -> usize {
        self.inner.witness_qubits()
    }

    fn acceptance_probability(&self, witness: Vec<Complex64>) -> PyResult<f64> {
        self.inner.acceptance_probability(&state(witness)?).map_err(err)
    }

    fn compile(&self) -> PyResult<PyKitaev> {
        Ok(PyKitaev { inner: kitaev::compile(&self.inner).map_err(err)? })
    }

    /// `(cos²θ, bound, holds)` for the clock kernels of this circuit.
    fn clock_angle(&self) -> PyResult<(f64, f64, bool)> {
        let r = spectral::verify_clock_angle(&self.inner, false).map_err(err)?;
        Ok((r.cos_sq_theta, r.bound, r.holds))
    }

    fn __repr__(&self) -> String {
        format!(
            "Circuit(steps={}, ancilla={}, proof1={}, proof2={})",
            self.inner.steps(),
            self.inner.ancilla(),
            self.inner.proof1(),
            self.inner.proof2()
        )
    }
}

#[pyclass(name = "KitaevHamiltonian", module = "pyhamlab")]
struct PyKitaev {
    inner: KitaevHamiltonian,
}

#[pymethods]
impl PyKitaev {
    #[getter]
    fn num_qubits(&self) -> usize {
        self.inner.num_qubits()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    /// Ascending spectrum of `H_in + H_prop + H_out`.
    fn eigenvalues(&self) -> Vec<f64> {
        linalg::eigenvalues(&self.inner.total_dense())
    }

    /// Energy of the history state built from `witness`.
    fn history_energy(&self, witness: Vec<Complex64>) -> PyResult<f64> {
        let eta = kitaev::history_state(self.inner.circuit(), &state(witness)?).map_err(err)?;
        kitaev::energy(&self.inner, &eta.state).map_err(err)
    }

    /// Hamiltonian file; thresholds default to `(0, 1/(8(T+1)))`.
    #[pyo3(signature = (a=None, b=None))]
    fn to_json(&self, a: Option<f64>, b: Option<f64>) -> PyResult<String> {
        let (da, db) = io::default_thresholds(self.inner.steps());
        let file = io::HamiltonianFile::from_compiled(&self.inner, a.unwrap_or(da), b.unwrap_or(db));
        io::to_canonical_json(&file).map_err(err)
    }
}

#[pyclass(name = "SlhInstance", module = "pyhamlab")]
struct PySlhInstance {
    inner: SLHInstance,
}

#[pymethods]
impl PySlhInstance {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self { inner: io::parse_instance(text).map_err(err)? })
    }

    fn to_json(&self) -> PyResult<String> {
        io::instance_to_json(&self.inner).map_err(err)
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn a(&self) -> f64 {
        self.inner.a()
    }

    #[getter]
    fn b(&self) -> f64 {
        self.inner.b()
    }

    fn ground_energy(&self) -> PyResult<f64> {
        Ok(optimize::ground_energy(&self.inner.hamiltonian()).map_err(err)?.0)
    }

    /// Lowest product energy found, with the two side states.
    #[pyo3(signature = (restarts=optimize::DEFAULT_RESTARTS, seed=0))]
    fn min_product(&self, restarts: usize, seed: u64) -> PyResult<(f64, Vec<Complex64>, Vec<Complex64>)> {
        let r = optimize::min_product_energy(
            &self.inner.hamiltonian(),
            self.inner.partition(),
            restarts,
            optimize::DEFAULT_TOL,
            seed,
        )
        .map_err(err)?;
        Ok((
            r.value,
            r.left_state.amplitudes().iter().copied().collect(),
            r.right_state.amplitudes().iter().copied().collect(),
        ))
    }

    /// `"yes"`, `"no"` or `"indeterminate"`.
    #[pyo3(signature = (restarts=optimize::DEFAULT_RESTARTS, seed=0))]
    fn decide(&self, restarts: usize, seed: u64) -> PyResult<&'static str> {
        Ok(optimize::decide_slh(&self.inner, restarts, seed).map_err(err)?.outcome.as_str())
    }

    /// Runs the classical-proof verifier. Without a proof, the honest proof of
    /// the best product state found is checked.
    #[pyo3(signature = (proof_json=None, seed=0))]
    fn verify<'py>(&self, py: Python<'py>, proof_json: Option<&str>, seed: u64) -> PyResult<Bound<'py, PyDict>> {
        let proof = match proof_json {
            Some(text) => io::parse_proof(text, &self.inner).map_err(err)?,
            None => {
                let r = optimize::min_product_energy(
                    &self.inner.hamiltonian(),
                    self.inner.partition(),
                    optimize::DEFAULT_RESTARTS,
                    optimize::DEFAULT_TOL,
                    seed,
                )
                .map_err(err)?;
                cldm::honest_prover_from_sides(&self.inner, &r.left_state.to_density(), &r.right_state.to_density())
                    .map_err(err)?
            }
        };
        let oracle = ProjectionOracle { config: ConsistencyConfig { seed, ..ConsistencyConfig::default() } };
        let v = cldm::slh_verifier(&self.inner, &proof, &oracle).map_err(err)?;
        let out = PyDict::new(py);
        out.set_item("accept", v.accept)?;
        out.set_item("energy", v.energy)?;
        out.set_item("threshold", v.threshold)?;
        out.set_item("beta", v.beta)?;
        out.set_item("side_a", format!("{:?}", v.side_a).to_lowercase())?;
        out.set_item("side_b", format!("{:?}", v.side_b).to_lowercase())?;
        Ok(out)
    }

    fn __repr__(&self) -> String {
        format!(
            "SlhInstance(n={}, terms={}, a={}, b={})",
            self.inner.n(),
            self.inner.terms().len(),
            self.inner.a(),
            self.inner.b()
        )
    }
}

/// Ids and slugs of the acceptance criteria.
#[pyfunction]
fn criteria() -> Vec<(u32, &'static str)> {
    hamlab::acceptance::CRITERIA.iter().map(|c| (c.id, c.slug)).collect()
}

#[pymodule]
fn pyhamlab(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyCircuit>()?;
    m.add_class::<PyKitaev>()?;
    m.add_class::<PySlhInstance>()?;
    m.add_function(wrap_pyfunction!(criteria, m)?)?;
    Ok(())
}
