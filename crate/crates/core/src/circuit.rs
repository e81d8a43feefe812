//! Gate-model verification circuits over the clock-free workspace
//! (ancilla, first proof, second proof), including swap-test product tests
//! and the wrapping that runs a verifier on the first proof only.

use rand::Rng;

use crate::error::{HamlabError, Result};
use crate::linalg::{self, CMatrix, CVector, C64, ONE, ZERO};
use crate::operator::{apply_on_support, SparseMatrix};
use crate::qstate::{check_distinct, qubit_bit, scatter_bits, gather_bits, PureState, QubitLayout, Tensor};

/// Gates whose matrix deviates from unitarity by more than this are rejected.
pub const UNITARY_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub enum Gate {
    Unitary {
        targets: Vec<usize>,
        matrix: CMatrix,
    },
    /// Swaps registers `r1` and `r2` qubit by qubit when `control` is 1.
    ControlledSwap {
        control: usize,
        r1: Vec<usize>,
        r2: Vec<usize>,
    },
}

impl Gate {
    pub fn unitary(targets: Vec<usize>, matrix: CMatrix) -> Result<Self> {
        Self::unitary_with_tol(targets, matrix, UNITARY_TOL)
    }

    pub fn unitary_with_tol(targets: Vec<usize>, matrix: CMatrix, tol: f64) -> Result<Self> {
        check_distinct(&targets, usize::MAX)?;
        if targets.is_empty() {
            return Err(HamlabError::InvalidCircuit("gate without targets".into()));
        }
        let d = 1usize << targets.len();
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(HamlabError::DimensionMismatch {
                expected: d,
                actual: matrix.nrows(),
            });
        }
        let defect = linalg::unitarity_defect(&matrix);
        if defect > tol {
            return Err(HamlabError::NotUnitary(defect));
        }
        Ok(Gate::Unitary { targets, matrix })
    }

    pub fn controlled_register_swap(control: usize, r1: Vec<usize>, r2: Vec<usize>) -> Result<Self> {
        if r1.len() != r2.len() {
            return Err(HamlabError::InvalidRegisters(format!(
                "register sizes {} and {} differ",
                r1.len(),
                r2.len()
            )));
        }
        if r1.is_empty() {
            return Err(HamlabError::InvalidRegisters("empty registers".into()));
        }
        let mut all = vec![control];
        all.extend(&r1);
        all.extend(&r2);
        check_distinct(&all, usize::MAX).map_err(|_| {
            HamlabError::InvalidRegisters("control and registers must be pairwise disjoint".into())
        })?;
        Ok(Gate::ControlledSwap { control, r1, r2 })
    }

    pub fn hadamard(q: usize) -> Self {
        let s = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        Gate::Unitary {
            targets: vec![q],
            matrix: CMatrix::from_row_slice(2, 2, &[s, s, s, -s]),
        }
    }

    pub fn pauli_x(q: usize) -> Self {
        Gate::Unitary {
            targets: vec![q],
            matrix: CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]),
        }
    }

    /// X on `target` when every control `(q, v)` holds bit value `v`.
    pub fn multi_controlled_x(controls: &[(usize, bool)], target: usize) -> Result<Self> {
        let mut targets: Vec<usize> = controls.iter().map(|&(q, _)| q).collect();
        targets.push(target);
        check_distinct(&targets, usize::MAX)?;
        let k = targets.len();
        let d = 1usize << k;
        let pattern = controls
            .iter()
            .fold(0usize, |acc, &(_, v)| (acc << 1) | v as usize);
        let mut matrix = CMatrix::zeros(d, d);
        for i in 0..d {
            let j = if i >> 1 == pattern { i ^ 1 } else { i };
            matrix[(j, i)] = ONE;
        }
        Ok(Gate::Unitary { targets, matrix })
    }

    /// Every qubit the gate touches.
    pub fn qubits(&self) -> Vec<usize> {
        match self {
            Gate::Unitary { targets, .. } => targets.clone(),
            Gate::ControlledSwap { control, r1, r2 } => {
                let mut q = vec![*control];
                q.extend(r1);
                q.extend(r2);
                q
            }
        }
    }

    pub fn is_controlled_swap(&self) -> bool {
        matches!(self, Gate::ControlledSwap { .. })
    }

    pub fn map_qubits(&self, f: impl Fn(usize) -> usize) -> Gate {
        match self {
            Gate::Unitary { targets, matrix } => Gate::Unitary {
                targets: targets.iter().map(|&q| f(q)).collect(),
                matrix: matrix.clone(),
            },
            Gate::ControlledSwap { control, r1, r2 } => Gate::ControlledSwap {
                control: f(*control),
                r1: r1.iter().map(|&q| f(q)).collect(),
                r2: r2.iter().map(|&q| f(q)).collect(),
            },
        }
    }

    fn swap_image(index: usize, r1: &[usize], r2: &[usize], n: usize) -> usize {
        let a = gather_bits(index, r1, n);
        let b = gather_bits(index, r2, n);
        scatter_bits(scatter_bits(index, b, r1, n), a, r2, n)
    }

    /// Image of basis state `index` when the gate is a permutation, i.e.
    /// the column index `j` with `G[(image, j)] = 1` for swap gates.
    fn swap_target(&self, index: usize, n: usize) -> Option<usize> {
        match self {
            Gate::ControlledSwap { control, r1, r2 } => Some(if qubit_bit(index, *control, n) == 1 {
                Self::swap_image(index, r1, r2, n)
            } else {
                index
            }),
            Gate::Unitary { .. } => None,
        }
    }

    /// `G v` on an `n`-qubit vector.
    pub fn apply(&self, v: &CVector, n: usize) -> CVector {
        match self {
            Gate::Unitary { targets, matrix } => apply_on_support(matrix, targets, n, v),
            Gate::ControlledSwap { .. } => {
                CVector::from_fn(v.len(), |i, _| v[self.swap_target(i, n).expect("swap gate")])
            }
        }
    }

    /// The gate embedded in an `n`-qubit register as a row-sparse matrix.
    pub fn to_sparse(&self, n: usize) -> SparseMatrix {
        let dim = 1usize << n;
        match self {
            Gate::Unitary { targets, matrix } => {
                crate::operator::LocalTerm {
                    n,
                    support: targets.clone(),
                    matrix: matrix.clone(),
                }
                .to_sparse()
            }
            Gate::ControlledSwap { .. } => SparseMatrix::from_triplets(
                dim,
                (0..dim).map(|i| (i, self.swap_target(i, n).expect("swap gate"), ONE)),
            ),
        }
    }

    pub fn to_dense(&self, n: usize) -> CMatrix {
        self.to_sparse(n).to_dense()
    }
}

// ---------------------------------------------------------------------------
// Verification circuits
// ---------------------------------------------------------------------------

/// Circuit `U_T … U_1` over workspace qubits laid out as ancilla (`0..m`),
/// first proof and second proof. `U_0 = I` by convention.
#[derive(Clone, Debug, PartialEq)]
pub struct VerificationCircuit {
    gates: Vec<Gate>,
    ancilla: usize,
    proof1: usize,
    proof2: usize,
    registers: Option<Vec<usize>>,
    accept_qubit: usize,
}

impl VerificationCircuit {
    pub fn new(
        gates: Vec<Gate>,
        ancilla: usize,
        proof1: usize,
        proof2: usize,
        registers: Option<Vec<usize>>,
        accept_qubit: usize,
    ) -> Result<Self> {
        if gates.is_empty() {
            return Err(HamlabError::InvalidCircuit("a circuit needs at least one gate".into()));
        }
        let n = ancilla + proof1 + proof2;
        for (k, gate) in gates.iter().enumerate() {
            for q in gate.qubits() {
                if q >= n {
                    return Err(HamlabError::InvalidCircuit(format!(
                        "gate {} touches qubit {q} outside the {n}-qubit workspace",
                        k + 1
                    )));
                }
            }
        }
        if accept_qubit >= ancilla + proof1 {
            return Err(HamlabError::InvalidCircuit(format!(
                "accept qubit {accept_qubit} must lie in the ancilla or first-proof range"
            )));
        }
        if let Some(regs) = &registers {
            let total: usize = regs.iter().sum();
            if regs.iter().any(|&s| s == 0) || total != proof1 || total != proof2 {
                return Err(HamlabError::InvalidRegisters(format!(
                    "register sizes {regs:?} must sum to both proof sizes ({proof1}, {proof2})"
                )));
            }
        }
        Ok(Self {
            gates,
            ancilla,
            proof1,
            proof2,
            registers,
            accept_qubit,
        })
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    /// `U_t` for `1 ≤ t ≤ T`.
    pub fn gate(&self, t: usize) -> Result<&Gate> {
        if t == 0 || t > self.steps() {
            return Err(HamlabError::StepOutOfRange {
                step: t,
                steps: self.steps(),
            });
        }
        Ok(&self.gates[t - 1])
    }

    /// Number of steps `T`.
    pub fn steps(&self) -> usize {
        self.gates.len()
    }

    pub fn ancilla(&self) -> usize {
        self.ancilla
    }

    pub fn proof1(&self) -> usize {
        self.proof1
    }

    pub fn proof2(&self) -> usize {
        self.proof2
    }

    pub fn registers(&self) -> Option<&[usize]> {
        self.registers.as_deref()
    }

    pub fn accept_qubit(&self) -> usize {
        self.accept_qubit
    }

    pub fn workspace_qubits(&self) -> usize {
        self.ancilla + self.proof1 + self.proof2
    }

    pub fn witness_qubits(&self) -> usize {
        self.proof1 + self.proof2
    }

    pub fn layout(&self) -> QubitLayout {
        QubitLayout::workspace(self.ancilla, self.proof1, self.proof2)
    }

    pub fn proof1_qubits(&self) -> Vec<usize> {
        (self.ancilla..self.ancilla + self.proof1).collect()
    }

    pub fn proof2_qubits(&self) -> Vec<usize> {
        let start = self.ancilla + self.proof1;
        (start..start + self.proof2).collect()
    }

    /// `|0^m⟩ ⊗ |ψ⟩` for a witness over (P1, P2).
    pub fn initial_state(&self, witness: &PureState) -> Result<PureState> {
        if witness.num_qubits() != self.witness_qubits() {
            return Err(HamlabError::DimensionMismatch {
                expected: 1 << self.witness_qubits(),
                actual: witness.dim(),
            });
        }
        let zeros = PureState::zero(self.ancilla);
        let joined = zeros.tensor(&PureState::from_parts_unchecked(
            witness.amplitudes().clone(),
            QubitLayout::free(self.witness_qubits()),
        ))?;
        joined.with_layout(self.layout())
    }

    fn check_workspace(&self, input: &PureState) -> Result<()> {
        if input.num_qubits() != self.workspace_qubits() {
            return Err(HamlabError::DimensionMismatch {
                expected: 1 << self.workspace_qubits(),
                actual: input.dim(),
            });
        }
        Ok(())
    }

    /// `|ψ_t⟩ = U_t … U_1 |input⟩`.
    pub fn apply_prefix(&self, t: usize, input: &PureState) -> Result<PureState> {
        if t > self.steps() {
            return Err(HamlabError::StepOutOfRange {
                step: t,
                steps: self.steps(),
            });
        }
        self.check_workspace(input)?;
        let n = self.workspace_qubits();
        let mut v = input.amplitudes().clone();
        for gate in &self.gates[..t] {
            v = gate.apply(&v, n);
        }
        Ok(PureState::from_parts_unchecked(v, self.layout()))
    }

    /// `[ψ_0, ψ_1, …, ψ_T]` for a workspace input.
    pub fn trajectory(&self, input: &PureState) -> Result<Vec<CVector>> {
        self.check_workspace(input)?;
        let n = self.workspace_qubits();
        let mut out = Vec::with_capacity(self.steps() + 1);
        out.push(input.amplitudes().clone());
        for gate in &self.gates {
            let next = gate.apply(out.last().expect("nonempty"), n);
            out.push(next);
        }
        Ok(out)
    }

    /// Dense `U_t … U_1` over the workspace.
    pub fn prefix_unitary(&self, t: usize) -> Result<CMatrix> {
        if t > self.steps() {
            return Err(HamlabError::StepOutOfRange {
                step: t,
                steps: self.steps(),
            });
        }
        let n = self.workspace_qubits();
        let mut u = linalg::identity(1 << n);
        for gate in &self.gates[..t] {
            u = gate.to_sparse(n).to_dense() * u;
        }
        Ok(u)
    }

    /// Probability that the accept qubit reads 1 in `U_T … U_1 |ψ⟩`.
    pub fn accept_probability_of_state(&self, final_state: &CVector) -> f64 {
        let n = self.workspace_qubits();
        final_state
            .iter()
            .enumerate()
            .filter(|(i, _)| qubit_bit(*i, self.accept_qubit, n) == 1)
            .map(|(_, a)| a.norm_sqr())
            .sum::<f64>()
            .clamp(0.0, 1.0)
    }

    /// Exact acceptance probability on a witness over (P1, P2).
    pub fn acceptance_probability(&self, witness: &PureState) -> Result<f64> {
        let init = self.initial_state(witness)?;
        let fin = self.apply_prefix(self.steps(), &init)?;
        Ok(self.accept_probability_of_state(fin.amplitudes()))
    }

    /// Rebuilds the circuit with a different gate list and the same layout.
    pub fn with_gates(&self, gates: Vec<Gate>) -> Result<Self> {
        Self::new(
            gates,
            self.ancilla,
            self.proof1,
            self.proof2,
            self.registers.clone(),
            self.accept_qubit,
        )
    }
}

// ---------------------------------------------------------------------------
// Product tests and wrapping
// ---------------------------------------------------------------------------

/// Swap tests on each register pair. `controls[i]` is the control ancilla of
/// pair `i`; `p1_start`/`p2_start` are the first qubits of each proof.
/// Each test contributes three steps: H, controlled-register-swap, H.
pub fn build_product_test(
    registers: &[usize],
    controls: &[usize],
    p1_start: usize,
    p2_start: usize,
) -> Result<Vec<Gate>> {
    if registers.len() != controls.len() {
        return Err(HamlabError::InvalidRegisters(format!(
            "{} registers but {} control qubits",
            registers.len(),
            controls.len()
        )));
    }
    let mut gates = Vec::with_capacity(3 * registers.len());
    let mut offset = 0;
    for (&size, &c) in registers.iter().zip(controls) {
        let r1: Vec<usize> = (p1_start + offset..p1_start + offset + size).collect();
        let r2: Vec<usize> = (p2_start + offset..p2_start + offset + size).collect();
        gates.push(Gate::hadamard(c));
        gates.push(Gate::controlled_register_swap(c, r1, r2)?);
        gates.push(Gate::hadamard(c));
        offset += size;
    }
    Ok(gates)
}

/// Standalone product test: ancillas are the `r` controls followed by the
/// accept qubit, which is set iff every control reads 0.
pub fn product_test_circuit(registers: &[usize]) -> Result<VerificationCircuit> {
    let r = registers.len();
    if r == 0 {
        return Err(HamlabError::InvalidRegisters("no registers".into()));
    }
    let total: usize = registers.iter().sum();
    let ancilla = r + 1;
    let controls: Vec<usize> = (0..r).collect();
    let mut gates = build_product_test(registers, &controls, ancilla, ancilla + total)?;
    let pattern: Vec<(usize, bool)> = controls.iter().map(|&c| (c, false)).collect();
    gates.push(Gate::multi_controlled_x(&pattern, r)?);
    VerificationCircuit::new(gates, ancilla, total, total, Some(registers.to_vec()), r)
}

/// Runs the product test on (P1, P2) and then `inner` on (A, P1).
///
/// Ancilla layout of the result: `r` swap-test controls, the inner
/// ancillas, then one output qubit holding the AND of all pass bits and
/// the inner accept bit.
pub fn hm_wrap(inner: &VerificationCircuit, registers: &[usize]) -> Result<VerificationCircuit> {
    let r = registers.len();
    if r == 0 {
        return Err(HamlabError::InvalidRegisters("no registers".into()));
    }
    let total: usize = registers.iter().sum();
    if inner.proof1() != total {
        return Err(HamlabError::InvalidRegisters(format!(
            "inner proof size {} differs from register total {total}",
            inner.proof1()
        )));
    }
    let inner_p2 = inner.proof2_qubits();
    for (k, gate) in inner.gates().iter().enumerate() {
        if gate.qubits().iter().any(|q| inner_p2.contains(q)) {
            return Err(HamlabError::InvalidCircuit(format!(
                "inner gate {} acts on the second proof",
                k + 1
            )));
        }
    }
    let m_in = inner.ancilla();
    let ancilla = r + m_in + 1;
    let output = r + m_in;
    let p1_start = ancilla;
    let p2_start = ancilla + total;
    // Inner ancilla q -> r + q, inner P1 qubit m_in + k -> p1_start + k.
    let remap = |q: usize| if q < m_in { r + q } else { p1_start + (q - m_in) };

    let controls: Vec<usize> = (0..r).collect();
    let mut gates = build_product_test(registers, &controls, p1_start, p2_start)?;
    gates.extend(inner.gates().iter().map(|g| g.map_qubits(remap)));
    let mut pattern: Vec<(usize, bool)> = controls.iter().map(|&c| (c, false)).collect();
    pattern.push((remap(inner.accept_qubit()), true));
    gates.push(Gate::multi_controlled_x(&pattern, output)?);
    VerificationCircuit::new(gates, ancilla, total, total, Some(registers.to_vec()), output)
}

/// Haar-random one- and two-qubit gates on a workspace of the given shape.
pub fn random_circuit<R: Rng + ?Sized>(
    ancilla: usize,
    proof1: usize,
    proof2: usize,
    steps: usize,
    rng: &mut R,
) -> Result<VerificationCircuit> {
    let n = ancilla + proof1 + proof2;
    if n == 0 || ancilla + proof1 == 0 {
        return Err(HamlabError::InvalidCircuit("empty workspace".into()));
    }
    let gates = (0..steps)
        .map(|_| {
            let width = if n >= 2 && rng.random_bool(0.6) { 2 } else { 1 };
            let mut targets = Vec::with_capacity(width);
            while targets.len() < width {
                let q = rng.random_range(0..n);
                if !targets.contains(&q) {
                    targets.push(q);
                }
            }
            Gate::Unitary {
                targets,
                matrix: linalg::random_unitary(1 << width, rng),
            }
        })
        .collect();
    VerificationCircuit::new(gates, ancilla, proof1, proof2, None, 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn basis(n: usize, i: usize) -> PureState {
        PureState::basis(n, i).unwrap()
    }

    #[test]
    fn cswap_is_a_permutation() {
        let g = Gate::controlled_register_swap(0, vec![1, 2, 3], vec![4, 5, 6]).unwrap();
        let s = g.to_sparse(7);
        assert_eq!(s.max_row_nnz(), 1);
        assert!(s.rows().iter().all(|row| row.len() == 1 && (row[0].1 - ONE).norm() == 0.0));
    }

    #[test]
    fn cswap_rejects_overlap() {
        assert!(matches!(
            Gate::controlled_register_swap(0, vec![1, 2], vec![2, 3]),
            Err(HamlabError::InvalidRegisters(_))
        ));
        assert!(Gate::controlled_register_swap(1, vec![1], vec![2]).is_err());
    }

    #[test]
    fn cswap_with_control_off_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = Gate::controlled_register_swap(0, vec![1, 2], vec![3, 4]).unwrap();
        let phi = linalg::random_unit_vector(16, &mut rng);
        let v = CVector::from_fn(32, |i, _| if i < 16 { phi[i] } else { ZERO });
        assert!((g.apply(&v, 5) - &v).norm() < 1e-15);
    }

    #[test]
    fn hadamard_prefix() {
        let c = VerificationCircuit::new(vec![Gate::hadamard(0)], 1, 0, 0, None, 0).unwrap();
        let out = c.apply_prefix(1, &basis(1, 0)).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((out.amplitudes()[0].re - s).abs() < 1e-15);
        assert!((out.amplitudes()[1].re - s).abs() < 1e-15);
        let same = c.apply_prefix(0, &basis(1, 0)).unwrap();
        assert_eq!(same.amplitudes(), basis(1, 0).amplitudes());
        assert!(c.apply_prefix(2, &basis(1, 0)).is_err());
    }

    #[test]
    fn multi_controlled_x_truth_table() {
        let g = Gate::multi_controlled_x(&[(0, false), (1, true)], 2).unwrap();
        // |01 0> -> |01 1>, others fixed
        let out = g.apply(basis(3, 0b010).amplitudes(), 3);
        assert_eq!(out[0b011], ONE);
        let out = g.apply(basis(3, 0b110).amplitudes(), 3);
        assert_eq!(out[0b110], ONE);
    }

    #[test]
    fn swap_test_on_orthogonal_qubits_passes_half_the_time() {
        let c = product_test_circuit(&[1]).unwrap();
        let witness = basis(2, 0b01);
        assert!((c.acceptance_probability(&witness).unwrap() - 0.5).abs() < 1e-14);
        let same = basis(2, 0b11);
        assert!((c.acceptance_probability(&same).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn random_circuit_prefix_is_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let c = random_circuit(1, 2, 1, 10, &mut rng).unwrap();
        let u = c.prefix_unitary(10).unwrap();
        assert!(linalg::unitarity_defect(&u) < 1e-9);
    }

    #[test]
    fn hm_wrap_rejects_inner_touching_second_proof() {
        let inner = VerificationCircuit::new(vec![Gate::pauli_x(2)], 1, 1, 1, None, 0).unwrap();
        assert!(hm_wrap(&inner, &[1]).is_err());
    }

    #[test]
    fn accept_qubit_must_be_in_ancilla_or_first_proof() {
        assert!(VerificationCircuit::new(vec![Gate::pauli_x(0)], 1, 1, 1, None, 2).is_err());
    }
}
