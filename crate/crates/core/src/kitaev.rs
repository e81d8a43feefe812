//! Circuit-to-Hamiltonian compilation with a binary clock.
//!
//! Basis index of the full register is `(t << w) | x` where `t` is the
//! clock value and `x` the workspace index over (A, P1, P2) of `w` qubits.

use crate::circuit::{Gate, VerificationCircuit};
use crate::error::{HamlabError, Result};
use crate::linalg::{CMatrix, CVector, C64, ONE};
use crate::operator::{Operator, SparseMatrix};
use crate::qstate::{qubit_bit, PureState, QuantumState, QubitLayout};
use crate::DEFAULT_MAX_QUBITS;

/// Imaginary residue allowed in an energy evaluation.
pub const ENERGY_IMAG_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ClockEncoding {
    steps: usize,
    qubits: usize,
}

impl ClockEncoding {
    pub fn new(steps: usize) -> Result<Self> {
        if steps == 0 {
            return Err(HamlabError::InvalidCircuit("a clock needs T >= 1".into()));
        }
        let qubits = (usize::BITS - steps.leading_zeros()) as usize;
        Ok(Self { steps, qubits })
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// `ceil(log2(T + 1))`.
    pub fn qubits(&self) -> usize {
        self.qubits
    }

    pub fn dim(&self) -> usize {
        1 << self.qubits
    }

    /// Clock basis values above `T`.
    pub fn invalid_states(&self) -> std::ops::Range<usize> {
        self.steps + 1..self.dim()
    }
}

/// `H_t` over the full register (clock of `clock.qubits()` plus `w` workspace
/// qubits) for gate `U_t`.
pub fn propagation_term(t: usize, gate: &Gate, clock: &ClockEncoding, w: usize) -> Result<SparseMatrix> {
    if t == 0 || t > clock.steps() {
        return Err(HamlabError::StepOutOfRange {
            step: t,
            steps: clock.steps(),
        });
    }
    let wdim = 1usize << w;
    let dim = clock.dim() * wdim;
    let u = gate.to_sparse(w);
    let half = C64::new(0.5, 0.0);
    let now = t * wdim;
    let before = (t - 1) * wdim;
    let mut triplets = Vec::with_capacity(2 * wdim + 2 * u.nnz());
    for x in 0..wdim {
        triplets.push((now + x, now + x, half));
        triplets.push((before + x, before + x, half));
    }
    for (x, y, v) in u.triplets() {
        triplets.push((now + x, before + y, -half * v));
        triplets.push((before + y, now + x, -half * v.conj()));
    }
    Ok(SparseMatrix::from_triplets(dim, triplets))
}

/// The three penalty operators of the clock construction.
#[derive(Clone, Debug)]
pub struct KitaevHamiltonian {
    circuit: VerificationCircuit,
    clock: ClockEncoding,
    pub h_in: SparseMatrix,
    pub h_prop: SparseMatrix,
    pub h_out: SparseMatrix,
    /// `H_1 … H_T`; `h_prop` is their sum.
    pub terms: Vec<SparseMatrix>,
}

pub fn compile(circuit: &VerificationCircuit) -> Result<KitaevHamiltonian> {
    compile_with_budget(circuit, DEFAULT_MAX_QUBITS)
}

pub fn compile_with_budget(circuit: &VerificationCircuit, max_qubits: usize) -> Result<KitaevHamiltonian> {
    let clock = ClockEncoding::new(circuit.steps())?;
    let w = circuit.workspace_qubits();
    let needed = clock.qubits() + w;
    if needed > max_qubits {
        return Err(HamlabError::DimensionBudget {
            needed,
            budget: max_qubits,
        });
    }
    let wdim = 1usize << w;
    let dim = clock.dim() * wdim;
    let m = circuit.ancilla();

    let mut h_in = Vec::new();
    // Clock 0 with any ancilla bit set.
    for x in 0..wdim {
        if (0..m).any(|j| qubit_bit(x, j, w) == 1) {
            h_in.push((x, x, ONE));
        }
    }
    for t in clock.invalid_states() {
        for x in 0..wdim {
            h_in.push((t * wdim + x, t * wdim + x, ONE));
        }
    }
    let h_in = SparseMatrix::from_triplets(dim, h_in);

    let accept = circuit.accept_qubit();
    let last = clock.steps() * wdim;
    let h_out = SparseMatrix::from_triplets(
        dim,
        (0..wdim)
            .filter(|&x| qubit_bit(x, accept, w) == 0)
            .map(|x| (last + x, last + x, ONE)),
    );

    let terms = (1..=clock.steps())
        .map(|t| propagation_term(t, circuit.gate(t)?, &clock, w))
        .collect::<Result<Vec<_>>>()?;
    let h_prop = SparseMatrix::from_triplets(dim, terms.iter().flat_map(|h| h.triplets()));

    Ok(KitaevHamiltonian {
        circuit: circuit.clone(),
        clock,
        h_in,
        h_prop,
        h_out,
        terms,
    })
}

impl KitaevHamiltonian {
    pub fn circuit(&self) -> &VerificationCircuit {
        &self.circuit
    }

    pub fn clock(&self) -> &ClockEncoding {
        &self.clock
    }

    pub fn steps(&self) -> usize {
        self.clock.steps()
    }

    pub fn workspace_qubits(&self) -> usize {
        self.circuit.workspace_qubits()
    }

    pub fn num_qubits(&self) -> usize {
        self.clock.qubits() + self.workspace_qubits()
    }

    pub fn dim(&self) -> usize {
        1 << self.num_qubits()
    }

    pub fn layout(&self) -> QubitLayout {
        QubitLayout::kitaev(
            self.clock.qubits(),
            self.circuit.ancilla(),
            self.circuit.proof1(),
            self.circuit.proof2(),
        )
    }

    /// `H_in + H_prop`, whose kernel is spanned by history states.
    pub fn kernel_part(&self) -> SparseMatrix {
        self.h_in.add(&self.h_prop).expect("same dimension")
    }

    pub fn total(&self) -> SparseMatrix {
        self.kernel_part().add(&self.h_out).expect("same dimension")
    }

    pub fn total_dense(&self) -> CMatrix {
        self.total().to_dense()
    }

    /// Full-register qubit indices of the proof registers and ancillas.
    pub fn clock_qubits(&self) -> Vec<usize> {
        (0..self.clock.qubits()).collect()
    }

    pub fn ancilla_qubits(&self) -> Vec<usize> {
        let c = self.clock.qubits();
        (c..c + self.circuit.ancilla()).collect()
    }

    pub fn proof1_qubits(&self) -> Vec<usize> {
        let c = self.clock.qubits();
        self.circuit.proof1_qubits().into_iter().map(|q| q + c).collect()
    }

    pub fn proof2_qubits(&self) -> Vec<usize> {
        let c = self.clock.qubits();
        self.circuit.proof2_qubits().into_iter().map(|q| q + c).collect()
    }
}

impl Operator for KitaevHamiltonian {
    fn dim(&self) -> usize {
        self.dim()
    }

    fn apply(&self, v: &CVector) -> CVector {
        self.h_in.apply(v) + self.h_prop.apply(v) + self.h_out.apply(v)
    }

    fn trace_with(&self, rho: &CMatrix) -> C64 {
        self.h_in.trace_with(rho) + self.h_prop.trace_with(rho) + self.h_out.trace_with(rho)
    }
}

/// `(1/√(T+1)) Σ_t |t⟩ ⊗ U_t … U_1 (|0^m⟩ ⊗ |ψ⟩)`.
#[derive(Clone, Debug)]
pub struct HistoryState {
    pub state: PureState,
    pub witness: PureState,
    pub steps: usize,
}

pub fn history_state(circuit: &VerificationCircuit, witness: &PureState) -> Result<HistoryState> {
    let clock = ClockEncoding::new(circuit.steps())?;
    let init = circuit.initial_state(witness)?;
    let trajectory = circuit.trajectory(&init)?;
    let wdim = init.dim();
    let norm = ((circuit.steps() + 1) as f64).sqrt();
    let mut v = CVector::zeros(clock.dim() * wdim);
    for (t, psi_t) in trajectory.iter().enumerate() {
        for x in 0..wdim {
            v[t * wdim + x] = psi_t[x] / norm;
        }
    }
    let layout = QubitLayout::kitaev(
        clock.qubits(),
        circuit.ancilla(),
        circuit.proof1(),
        circuit.proof2(),
    );
    Ok(HistoryState {
        state: PureState::normalized(v, layout)?,
        witness: witness.clone(),
        steps: circuit.steps(),
    })
}

/// `⟨ψ|H|ψ⟩` or `tr(Hρ)`, required to be real up to [`ENERGY_IMAG_TOL`].
pub fn energy(h: &dyn Operator, state: &dyn QuantumState) -> Result<f64> {
    let e = state.expectation(h)?;
    if e.im.abs() > ENERGY_IMAG_TOL * e.re.abs().max(1.0) {
        return Err(HamlabError::NonRealEnergy(e.im));
    }
    Ok(e.re)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::random_circuit;
    use crate::linalg;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn clock_width() {
        assert_eq!(ClockEncoding::new(1).unwrap().qubits(), 1);
        assert_eq!(ClockEncoding::new(3).unwrap().qubits(), 2);
        assert_eq!(ClockEncoding::new(4).unwrap().qubits(), 3);
        assert_eq!(ClockEncoding::new(7).unwrap().qubits(), 3);
        assert_eq!(ClockEncoding::new(8).unwrap().qubits(), 4);
        assert!(ClockEncoding::new(0).is_err());
    }

    #[test]
    fn identity_gate_term_has_projector_spectrum() {
        let clock = ClockEncoding::new(1).unwrap();
        let id = Gate::unitary(vec![0], linalg::identity(2)).unwrap();
        let h = propagation_term(1, &id, &clock, 1).unwrap().to_dense();
        let e = linalg::eigenvalues(&h);
        assert!(e.iter().all(|&x| x.abs() < 1e-12 || (x - 1.0).abs() < 1e-12));
        assert!(propagation_term(0, &id, &clock, 1).is_err());
    }

    #[test]
    fn operators_are_projectors_and_kernel_holds_history() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let c = random_circuit(1, 1, 1, 3, &mut rng).unwrap();
        let k = compile(&c).unwrap();
        for op in [&k.h_in, &k.h_out] {
            let e = linalg::eigenvalues(&op.to_dense());
            assert!(e.iter().all(|&x| x.abs() < 1e-9 || (x - 1.0).abs() < 1e-9));
        }
        let psi = PureState::random(2, &mut rng);
        let eta = history_state(&c, &psi).unwrap();
        let r = k.kernel_part().apply(eta.state.amplitudes());
        assert!(r.norm() < 1e-12);
    }

    #[test]
    fn budget_is_enforced() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let c = random_circuit(2, 2, 2, 3, &mut rng).unwrap();
        assert!(matches!(
            compile_with_budget(&c, 7),
            Err(HamlabError::DimensionBudget { needed: 8, budget: 7 })
        ));
    }

    #[test]
    fn trivial_history_state() {
        let id = Gate::unitary(vec![0], linalg::identity(2)).unwrap();
        let c = VerificationCircuit::new(vec![id], 0, 1, 0, None, 0).unwrap();
        let eta = history_state(&c, &PureState::zero(1)).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let amps = eta.state.amplitudes();
        assert!((amps[0].re - s).abs() < 1e-15 && (amps[2].re - s).abs() < 1e-15);
        assert!(amps[1].norm() == 0.0 && amps[3].norm() == 0.0);
    }
}
