//! Spectral gaps, null spaces, principal angles, the clock rotation `W`
//! and the geometric lower bound on the gap of a sum of PSD operators.

use serde::Serialize;

use crate::circuit::VerificationCircuit;
use crate::error::{HamlabError, Result};
use crate::kitaev::{self, ClockEncoding, KitaevHamiltonian};
use crate::linalg::{self, CMatrix, CVector, C64, ONE};
use crate::qstate::{PureState, QubitLayout};

/// Default threshold separating kernel from spectrum.
pub const ZERO_TOL: f64 = 1e-8;
/// Slack on inequality checks.
pub const BOUND_SLACK: f64 = 1e-9;
/// Orthonormality tolerance of a subspace basis.
pub const ORTHONORMAL_TOL: f64 = 1e-10;
/// Largest negative eigenvalue tolerated in a PSD input.
pub const PSD_TOL: f64 = 1e-10;

/// Subspace given by an orthonormal set of columns.
#[derive(Clone, Debug)]
pub struct Subspace {
    basis: CMatrix,
}

impl Subspace {
    pub fn new(basis: CMatrix) -> Result<Self> {
        let k = basis.ncols();
        let gram = basis.adjoint() * &basis;
        let defect = linalg::max_abs_diff(&gram, &linalg::identity(k));
        if defect > ORTHONORMAL_TOL {
            return Err(HamlabError::InvalidParameter(format!(
                "basis is not orthonormal (deviation {defect:.3e})"
            )));
        }
        Ok(Self { basis })
    }

    /// Orthonormalized column span of `vectors`.
    pub fn span(vectors: &CMatrix, tol: f64) -> Self {
        Self {
            basis: linalg::orthonormal_span(vectors, tol),
        }
    }

    pub fn empty(ambient: usize) -> Self {
        Self {
            basis: CMatrix::zeros(ambient, 0),
        }
    }

    pub fn basis(&self) -> &CMatrix {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn ambient(&self) -> usize {
        self.basis.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.dim() == 0
    }

    pub fn projector(&self) -> CMatrix {
        &self.basis * self.basis.adjoint()
    }

    /// Distance from `v` to the subspace.
    pub fn residual(&self, v: &CVector) -> f64 {
        (v - &self.basis * (self.basis.adjoint() * v)).norm()
    }

    /// `self ∩ other^⊥`, assuming `other ⊆ self`.
    pub fn minus(&self, other: &Subspace) -> Subspace {
        let reduced = &self.basis - other.projector() * &self.basis;
        Self::span(&reduced, 1e-6)
    }
}

fn check_psd(a: &CMatrix) -> Result<linalg::Eigh> {
    let defect = linalg::hermiticity_defect(a);
    if defect > 1e-10 {
        return Err(HamlabError::NotHermitian(defect));
    }
    let e = linalg::eigh(a);
    if e.min() < -PSD_TOL {
        return Err(HamlabError::InvalidParameter(format!(
            "operator is not positive semidefinite (eigenvalue {:.3e})",
            e.min()
        )));
    }
    Ok(e)
}

/// `Δ(A)`: the smallest eigenvalue above `zero_tol`.
pub fn smallest_nonzero_eigenvalue(a: &CMatrix, zero_tol: f64) -> Result<f64> {
    let e = check_psd(a)?;
    e.values
        .iter()
        .copied()
        .find(|&v| v > zero_tol)
        .ok_or(HamlabError::NoNonzeroEigenvalue)
}

/// Span of eigenvectors with eigenvalue at most `zero_tol`.
pub fn null_space(a: &CMatrix, zero_tol: f64) -> Result<Subspace> {
    let e = check_psd(a)?;
    let k = e.values.iter().take_while(|&&v| v <= zero_tol).count();
    Ok(Subspace {
        basis: e.vectors.columns(0, k).into_owned(),
    })
}

/// `L1 ∩ L2` as the kernel of `(I − Π1) + (I − Π2)`.
pub fn intersection(l1: &Subspace, l2: &Subspace, zero_tol: f64) -> Result<Subspace> {
    if l1.ambient() != l2.ambient() {
        return Err(HamlabError::DimensionMismatch {
            expected: l1.ambient(),
            actual: l2.ambient(),
        });
    }
    let id = linalg::identity(l1.ambient());
    let sum = (&id - l1.projector()) + (&id - l2.projector());
    null_space(&sum, zero_tol)
}

/// `cos θ = max |⟨ψ1|ψ2⟩|` over unit vectors of each subspace.
pub fn principal_angle_cos(l1: &Subspace, l2: &Subspace) -> Result<f64> {
    if l1.is_empty() || l2.is_empty() {
        return Err(HamlabError::EmptySubspace);
    }
    if l1.ambient() != l2.ambient() {
        return Err(HamlabError::DimensionMismatch {
            expected: l1.ambient(),
            actual: l2.ambient(),
        });
    }
    let overlap = l1.basis.adjoint() * &l2.basis;
    Ok(linalg::largest_singular_value(&overlap).clamp(0.0, 1.0))
}

/// `W = Σ_t |t⟩⟨t| ⊗ U_t … U_1` over the full clock register; clock values
/// above `T` carry the identity.
pub fn rotation_w(circuit: &VerificationCircuit, clock: &ClockEncoding) -> Result<CMatrix> {
    if clock.steps() != circuit.steps() {
        return Err(HamlabError::InvalidParameter(format!(
            "clock counts {} steps, circuit has {}",
            clock.steps(),
            circuit.steps()
        )));
    }
    let wdim = 1usize << circuit.workspace_qubits();
    let mut w = CMatrix::zeros(clock.dim() * wdim, clock.dim() * wdim);
    let mut prefix = linalg::identity(wdim);
    for t in 0..clock.dim() {
        if t >= 1 && t <= clock.steps() {
            prefix = circuit.gate(t)?.to_dense(circuit.workspace_qubits()) * prefix;
        }
        let block = if t <= clock.steps() { &prefix } else { &linalg::identity(wdim) };
        w.view_mut((t * wdim, t * wdim), (wdim, wdim)).copy_from(block);
    }
    Ok(w)
}

/// `(W† H_in W, W† H_prop W)`.
pub fn rotated_pair(kh: &KitaevHamiltonian) -> Result<(CMatrix, CMatrix)> {
    let w = rotation_w(kh.circuit(), kh.clock())?;
    let wd = w.adjoint();
    let a1 = &wd * kh.h_in.to_dense() * &w;
    let a2 = &wd * kh.h_prop.to_dense() * &w;
    Ok((linalg::hermitian_part(&a1), linalg::hermitian_part(&a2)))
}

#[derive(Clone, Debug, Serialize)]
pub struct GeometricReport {
    pub delta_a1: Option<f64>,
    pub delta_a2: Option<f64>,
    /// `min(Δ(A1), Δ(A2))` over the operators that have a nonzero eigenvalue.
    pub v: f64,
    pub cos_theta: f64,
    pub delta_sum: f64,
    pub bound: f64,
    pub holds: bool,
    /// One of `L1 ∩ L^⊥`, `L2 ∩ L^⊥` is empty; the bound is checked with
    /// `cos θ = 0`.
    pub vacuous: bool,
    pub kernel_dims: [usize; 3],
}

/// Checks `Δ(A1 + A2) ≥ v (1 − cos θ)` where θ is the angle between
/// `L1 ∩ L^⊥` and `L2 ∩ L^⊥`, `L = L1 ∩ L2`.
pub fn verify_geometric_bound(a1: &CMatrix, a2: &CMatrix, zero_tol: f64) -> Result<GeometricReport> {
    let gap = |m: &CMatrix| match smallest_nonzero_eigenvalue(m, zero_tol) {
        Ok(v) => Ok(Some(v)),
        Err(HamlabError::NoNonzeroEigenvalue) => Ok(None),
        Err(e) => Err(e),
    };
    let delta_a1 = gap(a1)?;
    let delta_a2 = gap(a2)?;
    let v = match (delta_a1, delta_a2) {
        (Some(x), Some(y)) => x.min(y),
        (Some(x), None) | (None, Some(x)) => x,
        (None, None) => return Err(HamlabError::NoNonzeroEigenvalue),
    };
    let l1 = null_space(a1, zero_tol)?;
    let l2 = null_space(a2, zero_tol)?;
    let l = intersection(&l1, &l2, zero_tol)?;
    let k1 = l1.minus(&l);
    let k2 = l2.minus(&l);
    let (cos_theta, vacuous) = match principal_angle_cos(&k1, &k2) {
        Ok(c) => (c, false),
        Err(HamlabError::EmptySubspace) => (0.0, true),
        Err(e) => return Err(e),
    };
    let delta_sum = smallest_nonzero_eigenvalue(&(a1 + a2), zero_tol)?;
    let bound = v * (1.0 - cos_theta);
    Ok(GeometricReport {
        delta_a1,
        delta_a2,
        v,
        cos_theta,
        delta_sum,
        bound,
        holds: delta_sum >= bound - BOUND_SLACK,
        vacuous,
        kernel_dims: [l1.dim(), l2.dim(), l.dim()],
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ClockAngleReport {
    pub steps: usize,
    pub ancilla: usize,
    pub cos_sq_theta: f64,
    /// The same angle from numerically computed kernels of the rotated
    /// compiled operators, when requested.
    pub cos_sq_theta_compiled: Option<f64>,
    pub bound: f64,
    pub holds: bool,
    pub vacuous: bool,
}

/// Kernels in the rotated frame, built directly: `L1` holds clock 0 with
/// ancillas `|0^m⟩` plus every clock value `1..T`; `L2 = |α⟩ ⊗ H^{A,P1,P2}`.
fn explicit_clock_kernels(circuit: &VerificationCircuit) -> Result<(Subspace, Subspace)> {
    let clock = ClockEncoding::new(circuit.steps())?;
    let w = circuit.workspace_qubits();
    let wdim = 1usize << w;
    let dim = clock.dim() * wdim;
    let witness_dim = 1usize << circuit.witness_qubits();
    let steps = clock.steps();

    let l1_cols = witness_dim + steps * wdim;
    let mut l1 = CMatrix::zeros(dim, l1_cols);
    // Ancillas are the leading workspace qubits, so |0^m⟩ ⊗ |p⟩ has index p.
    for p in 0..witness_dim {
        l1[(p, p)] = ONE;
    }
    for t in 1..=steps {
        for x in 0..wdim {
            l1[(t * wdim + x, witness_dim + (t - 1) * wdim + x)] = ONE;
        }
    }
    let amp = C64::new(1.0 / ((steps + 1) as f64).sqrt(), 0.0);
    let mut l2 = CMatrix::zeros(dim, wdim);
    for x in 0..wdim {
        for t in 0..=steps {
            l2[(t * wdim + x, x)] = amp;
        }
    }
    Ok((Subspace { basis: l1 }, Subspace { basis: l2 }))
}

fn clock_angle_from_kernels(l1: &Subspace, l2: &Subspace) -> Result<Option<f64>> {
    let l = intersection(l1, l2, ZERO_TOL)?;
    let k1 = l1.minus(&l);
    let k2 = l2.minus(&l);
    match principal_angle_cos(&k1, &k2) {
        Ok(c) => Ok(Some(c * c)),
        Err(HamlabError::EmptySubspace) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Checks `cos²θ ≤ 1 − 1/(T+1)` for the clock construction. With
/// `compiled = true` the angle is also recomputed from the kernels of
/// `W† H_in W` and `W† H_prop W`.
pub fn verify_clock_angle(circuit: &VerificationCircuit, compiled: bool) -> Result<ClockAngleReport> {
    let steps = circuit.steps();
    let bound = 1.0 - 1.0 / (steps + 1) as f64;
    let (l1, l2) = explicit_clock_kernels(circuit)?;
    let explicit = clock_angle_from_kernels(&l1, &l2)?;
    let cos_sq_theta_compiled = if compiled {
        let kh = kitaev::compile(circuit)?;
        let (a1, a2) = rotated_pair(&kh)?;
        let l1 = null_space(&a1, ZERO_TOL)?;
        let l2 = null_space(&a2, ZERO_TOL)?;
        clock_angle_from_kernels(&l1, &l2)?
    } else {
        None
    };
    let cos_sq_theta = explicit.unwrap_or(0.0);
    let holds = cos_sq_theta <= bound + BOUND_SLACK
        && cos_sq_theta_compiled.is_none_or(|c| c <= bound + BOUND_SLACK);
    Ok(ClockAngleReport {
        steps,
        ancilla: circuit.ancilla(),
        cos_sq_theta,
        cos_sq_theta_compiled,
        bound,
        holds,
        vacuous: explicit.is_none(),
    })
}

// ---------------------------------------------------------------------------
// Pieces of the soundness argument
// ---------------------------------------------------------------------------

/// Orthonormal basis of the history-state space: the history states of the
/// computational-basis witnesses.
pub fn history_subspace(circuit: &VerificationCircuit) -> Result<Subspace> {
    let p = circuit.witness_qubits();
    let clock = ClockEncoding::new(circuit.steps())?;
    let dim = clock.dim() << circuit.workspace_qubits();
    let mut basis = CMatrix::zeros(dim, 1 << p);
    for k in 0..1usize << p {
        let witness = PureState::basis(p, k)?;
        let eta = kitaev::history_state(circuit, &witness)?;
        basis.set_column(k, eta.state.amplitudes());
    }
    Subspace::new(basis)
}

/// The proof-one state `|L⟩ ∝ (⟨0|_C ⟨0^m|_A ⊗ I) |ψ_1⟩` for a state `ψ_1` on
/// (C, A, P1). `None` when that component vanishes.
pub fn extract_left_state(circuit: &VerificationCircuit, psi1: &CVector) -> Result<Option<CVector>> {
    let p1 = 1usize << circuit.proof1();
    let clock = ClockEncoding::new(circuit.steps())?;
    let expected = clock.dim() << (circuit.ancilla() + circuit.proof1());
    if psi1.len() != expected {
        return Err(HamlabError::DimensionMismatch {
            expected,
            actual: psi1.len(),
        });
    }
    // Clock 0 and ancillas 0 are the leading bits, so these are indices 0..p1.
    let component = psi1.rows(0, p1).into_owned();
    let norm = component.norm();
    Ok((norm > 1e-14).then(|| component.unscale(norm)))
}

/// Lower bound `(1 − s − 2√ε)/(T+1)` on the history-state energy of a
/// witness within `ε` of a product state when every product state is
/// accepted with probability at most `s`.
pub fn step_three_bound(s: f64, epsilon: f64, steps: usize) -> f64 {
    (1.0 - s - 2.0 * epsilon.max(0.0).sqrt()) / (steps + 1) as f64
}

/// Layout of the (C, A, P1) side of a history state.
pub fn left_layout(circuit: &VerificationCircuit) -> Result<QubitLayout> {
    let clock = ClockEncoding::new(circuit.steps())?;
    QubitLayout::new(vec![
        (crate::qstate::Label::Clock, clock.qubits()),
        (crate::qstate::Label::Ancilla, circuit.ancilla()),
        (crate::qstate::Label::Proof1, circuit.proof1()),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::random_circuit;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn diag(values: &[f64]) -> CMatrix {
        CMatrix::from_diagonal(&CVector::from_iterator(values.len(), values.iter().map(|&v| C64::new(v, 0.0))))
    }

    #[test]
    fn smallest_nonzero_cases() {
        assert_eq!(smallest_nonzero_eigenvalue(&diag(&[0.0, 0.3, 2.0]), ZERO_TOL).unwrap(), 0.3);
        assert!((smallest_nonzero_eigenvalue(&diag(&[1.0, 0.0, 1.0]), ZERO_TOL).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(
            smallest_nonzero_eigenvalue(&diag(&[0.0, 0.0]), ZERO_TOL),
            Err(HamlabError::NoNonzeroEigenvalue)
        );
    }

    #[test]
    fn null_space_dims() {
        assert!(null_space(&linalg::identity(3), ZERO_TOL).unwrap().is_empty());
        assert_eq!(null_space(&diag(&[1.0, 0.0, 0.0, 0.0]), ZERO_TOL).unwrap().dim(), 3);
    }

    #[test]
    fn lines_at_known_angle() {
        let theta: f64 = 0.37;
        let a = CMatrix::from_column_slice(2, 1, &[ONE, C64::new(0.0, 0.0)]);
        let b = CMatrix::from_column_slice(2, 1, &[C64::new(theta.cos(), 0.0), C64::new(theta.sin(), 0.0)]);
        let c = principal_angle_cos(&Subspace::new(a).unwrap(), &Subspace::new(b).unwrap()).unwrap();
        assert!((c - theta.cos()).abs() < 1e-12);
    }

    #[test]
    fn empty_subspace_angle_is_an_error() {
        let a = Subspace::empty(3);
        let b = Subspace::new(linalg::identity(3)).unwrap();
        assert_eq!(principal_angle_cos(&a, &b), Err(HamlabError::EmptySubspace));
    }

    #[test]
    fn commuting_projectors_with_disjoint_kernels() {
        let r = verify_geometric_bound(&diag(&[0.0, 1.0]), &diag(&[1.0, 0.0]), ZERO_TOL).unwrap();
        assert!(r.cos_theta < 1e-12);
        assert!(r.holds);
    }

    #[test]
    fn rotation_is_unitary_and_preserves_spectrum() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let c = random_circuit(1, 1, 1, 3, &mut rng).unwrap();
        let kh = kitaev::compile(&c).unwrap();
        let w = rotation_w(&c, kh.clock()).unwrap();
        assert!(linalg::unitarity_defect(&w) < 1e-10);
        let (a1, a2) = rotated_pair(&kh).unwrap();
        let s1 = linalg::eigenvalues(&(a1 + a2));
        let s2 = linalg::eigenvalues(&kh.kernel_part().to_dense());
        for (x, y) in s1.iter().zip(&s2) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn clock_angle_single_step() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let c = random_circuit(1, 1, 0, 1, &mut rng).unwrap();
        let r = verify_clock_angle(&c, true).unwrap();
        assert!(r.cos_sq_theta <= 0.5 + 1e-9);
        assert!(r.holds);
        assert!((r.cos_sq_theta_compiled.unwrap() - r.cos_sq_theta).abs() < 1e-8);
    }

    #[test]
    fn history_subspace_is_kernel() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let c = random_circuit(1, 1, 1, 2, &mut rng).unwrap();
        let kh = kitaev::compile(&c).unwrap();
        let hist = history_subspace(&c).unwrap();
        let kernel = null_space(&kh.kernel_part().to_dense(), ZERO_TOL).unwrap();
        assert_eq!(hist.dim(), kernel.dim());
        assert!((principal_angle_cos(&hist, &kernel).unwrap() - 1.0).abs() < 1e-9);
    }
}
