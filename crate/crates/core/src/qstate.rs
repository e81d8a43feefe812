//! States, density matrices, tensor products, partial traces and
//! bipartite overlap analysis over labeled qubit registers.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{HamlabError, Result};
use crate::linalg::{self, CMatrix, CVector, C64, ONE, ZERO};
use crate::operator::Operator;

/// Tolerance on the norm of a pure state.
pub const NORM_TOL: f64 = 1e-12;
/// Tolerance on Hermiticity of a density matrix.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Tolerance on negative eigenvalues and trace of a density matrix.
pub const PSD_TOL: f64 = 1e-10;

// ---------------------------------------------------------------------------
// Bit helpers (qubit 0 is the most significant bit)
// ---------------------------------------------------------------------------

#[inline]
pub fn qubit_bit(index: usize, qubit: usize, n: usize) -> usize {
    (index >> (n - 1 - qubit)) & 1
}

/// Collects the bits of `index` at `qubits` into a compact index whose most
/// significant bit is `qubits[0]`.
#[inline]
pub fn gather_bits(index: usize, qubits: &[usize], n: usize) -> usize {
    qubits
        .iter()
        .fold(0, |acc, &q| (acc << 1) | qubit_bit(index, q, n))
}

/// Overwrites the bits of `base` at `qubits` with the bits of `sub`.
#[inline]
pub fn scatter_bits(base: usize, sub: usize, qubits: &[usize], n: usize) -> usize {
    let k = qubits.len();
    let mut out = base;
    for (pos, &q) in qubits.iter().enumerate() {
        let bit = (sub >> (k - 1 - pos)) & 1;
        let shift = n - 1 - q;
        out = (out & !(1 << shift)) | (bit << shift);
    }
    out
}

/// Qubits of `0..n` that are not in `subset`, ascending.
pub fn complement(subset: &[usize], n: usize) -> Vec<usize> {
    (0..n).filter(|q| !subset.contains(q)).collect()
}

pub fn check_distinct(qubits: &[usize], n: usize) -> Result<()> {
    for (i, &q) in qubits.iter().enumerate() {
        if q >= n {
            return Err(HamlabError::QubitOutOfRange { index: q, qubits: n });
        }
        if qubits[..i].contains(&q) {
            return Err(HamlabError::InvalidParameter(format!(
                "qubit {q} listed twice"
            )));
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Layouts
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    #[serde(rename = "C")]
    Clock,
    #[serde(rename = "A")]
    Ancilla,
    #[serde(rename = "P1")]
    Proof1,
    #[serde(rename = "P2")]
    Proof2,
    #[serde(rename = "free")]
    Free,
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Label::Clock => "C",
            Label::Ancilla => "A",
            Label::Proof1 => "P1",
            Label::Proof2 => "P2",
            Label::Free => "free",
        };
        f.write_str(s)
    }
}

/// Ordered list of labeled subsystems. Structured labels (C, A, P1, P2)
/// are unique; `free` qubits are anonymous and adjacent free runs merge.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct QubitLayout {
    subsystems: Vec<(Label, usize)>,
}

impl QubitLayout {
    pub fn new(subsystems: Vec<(Label, usize)>) -> Result<Self> {
        let mut out: Vec<(Label, usize)> = Vec::new();
        for (label, size) in subsystems {
            if size == 0 {
                continue;
            }
            if label != Label::Free && out.iter().any(|(l, _)| *l == label) {
                return Err(HamlabError::LabelCollision(label.to_string()));
            }
            match out.last_mut() {
                Some((Label::Free, s)) if label == Label::Free => *s += size,
                _ => out.push((label, size)),
            }
        }
        Ok(Self { subsystems: out })
    }

    pub fn free(n: usize) -> Self {
        Self::new(vec![(Label::Free, n)]).expect("free layouts never collide")
    }

    /// Workspace layout (A, P1, P2).
    pub fn workspace(ancilla: usize, proof1: usize, proof2: usize) -> Self {
        Self::new(vec![
            (Label::Ancilla, ancilla),
            (Label::Proof1, proof1),
            (Label::Proof2, proof2),
        ])
        .expect("distinct labels")
    }

    /// Full Kitaev layout (C, A, P1, P2).
    pub fn kitaev(clock: usize, ancilla: usize, proof1: usize, proof2: usize) -> Self {
        Self::new(vec![
            (Label::Clock, clock),
            (Label::Ancilla, ancilla),
            (Label::Proof1, proof1),
            (Label::Proof2, proof2),
        ])
        .expect("distinct labels")
    }

    pub fn subsystems(&self) -> &[(Label, usize)] {
        &self.subsystems
    }

    pub fn total_qubits(&self) -> usize {
        self.subsystems.iter().map(|(_, s)| s).sum()
    }

    /// Qubit indices occupied by `label`, empty when absent.
    pub fn qubits_of(&self, label: &Label) -> Vec<usize> {
        let mut start = 0;
        let mut out = Vec::new();
        for (l, size) in &self.subsystems {
            if l == label {
                out.extend(start..start + size);
            }
            start += size;
        }
        out
    }

    pub fn concat(&self, other: &QubitLayout) -> Result<Self> {
        let mut all = self.subsystems.clone();
        all.extend(other.subsystems.iter().cloned());
        Self::new(all)
    }

    /// Layout of the kept qubits after a partial trace. Labels survive when
    /// `keep` is ascending; otherwise the result is anonymous.
    fn restrict(&self, keep: &[usize]) -> Self {
        if !keep.windows(2).all(|w| w[0] < w[1]) {
            return Self::free(keep.len());
        }
        let mut start = 0;
        let mut parts = Vec::new();
        for (label, size) in &self.subsystems {
            let kept = keep
                .iter()
                .filter(|&&q| q >= start && q < start + size)
                .count();
            parts.push((label.clone(), kept));
            start += size;
        }
        Self::new(parts).unwrap_or_else(|_| Self::free(keep.len()))
    }
}

// ---------------------------------------------------------------------------
// Bipartitions
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bipartition {
    side_a: Vec<usize>,
    side_b: Vec<usize>,
}

impl Bipartition {
    pub fn new(side_a: Vec<usize>, side_b: Vec<usize>, n: usize) -> Result<Self> {
        check_distinct(&side_a, n)?;
        check_distinct(&side_b, n)?;
        if side_a.iter().any(|q| side_b.contains(q)) {
            return Err(HamlabError::InvalidBipartition("sides overlap".into()));
        }
        if side_a.len() + side_b.len() != n {
            return Err(HamlabError::InvalidBipartition(format!(
                "sides cover {} of {n} qubits",
                side_a.len() + side_b.len()
            )));
        }
        Ok(Self { side_a, side_b })
    }

    /// Cut after the first `split` qubits.
    pub fn contiguous(split: usize, n: usize) -> Result<Self> {
        if split > n {
            return Err(HamlabError::InvalidBipartition(format!(
                "split {split} beyond {n} qubits"
            )));
        }
        Self::new((0..split).collect(), (split..n).collect(), n)
    }

    pub fn side_a(&self) -> &[usize] {
        &self.side_a
    }

    pub fn side_b(&self) -> &[usize] {
        &self.side_b
    }

    pub fn total_qubits(&self) -> usize {
        self.side_a.len() + self.side_b.len()
    }

    /// `table[a][b]` is the full basis index with side-A bits `a` and
    /// side-B bits `b`.
    pub fn index_table(&self) -> Vec<Vec<usize>> {
        let n = self.total_qubits();
        let da = 1usize << self.side_a.len();
        let db = 1usize << self.side_b.len();
        (0..da)
            .map(|a| {
                let base = scatter_bits(0, a, &self.side_a, n);
                (0..db)
                    .map(|b| scatter_bits(base, b, &self.side_b, n))
                    .collect()
            })
            .collect()
    }
}

// ---------------------------------------------------------------------------
// Pure states
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq)]
pub struct PureState {
    amplitudes: CVector,
    layout: QubitLayout,
}

fn qubits_for_dim(dim: usize) -> Option<usize> {
    if dim.is_power_of_two() {
        Some(dim.trailing_zeros() as usize)
    } else {
        None
    }
}

impl PureState {
    pub fn new(amplitudes: CVector, layout: QubitLayout) -> Result<Self> {
        let n = layout.total_qubits();
        if amplitudes.len() != 1 << n {
            return Err(HamlabError::DimensionMismatch {
                expected: 1 << n,
                actual: amplitudes.len(),
            });
        }
        let norm = amplitudes.norm();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(HamlabError::NotNormalized(norm));
        }
        Ok(Self { amplitudes, layout })
    }

    /// Anonymous state; the length must be a power of two.
    pub fn from_amplitudes(amplitudes: CVector) -> Result<Self> {
        let n = qubits_for_dim(amplitudes.len()).ok_or(HamlabError::DimensionMismatch {
            expected: amplitudes.len().next_power_of_two(),
            actual: amplitudes.len(),
        })?;
        Self::new(amplitudes, QubitLayout::free(n))
    }

    /// Normalizes before validating.
    pub fn normalized(amplitudes: CVector, layout: QubitLayout) -> Result<Self> {
        let norm = amplitudes.norm();
        if norm < 1e-300 {
            return Err(HamlabError::NotNormalized(norm));
        }
        Self::new(amplitudes.unscale(norm), layout)
    }

    pub(crate) fn from_parts_unchecked(amplitudes: CVector, layout: QubitLayout) -> Self {
        debug_assert_eq!(amplitudes.len(), 1 << layout.total_qubits());
        Self { amplitudes, layout }
    }

    pub fn basis(n: usize, index: usize) -> Result<Self> {
        if index >= 1 << n {
            return Err(HamlabError::DimensionMismatch {
                expected: 1 << n,
                actual: index,
            });
        }
        let mut v = CVector::zeros(1 << n);
        v[index] = ONE;
        Ok(Self::from_parts_unchecked(v, QubitLayout::free(n)))
    }

    pub fn zero(n: usize) -> Self {
        Self::basis(n, 0).expect("index 0 always exists")
    }

    /// Haar-random state.
    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        Self::from_parts_unchecked(linalg::random_unit_vector(1 << n, rng), QubitLayout::free(n))
    }

    pub fn with_layout(mut self, layout: QubitLayout) -> Result<Self> {
        if layout.total_qubits() != self.num_qubits() {
            return Err(HamlabError::DimensionMismatch {
                expected: 1 << self.num_qubits(),
                actual: 1 << layout.total_qubits(),
            });
        }
        self.layout = layout;
        Ok(self)
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> CVector {
        self.amplitudes
    }

    pub fn layout(&self) -> &QubitLayout {
        &self.layout
    }

    pub fn num_qubits(&self) -> usize {
        self.layout.total_qubits()
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn inner(&self, other: &PureState) -> Result<C64> {
        same_dim(self.dim(), other.dim())?;
        Ok(self.amplitudes.dotc(&other.amplitudes))
    }

    pub fn to_density(&self) -> DensityMatrix {
        DensityMatrix::from_parts_unchecked(
            linalg::outer(&self.amplitudes, &self.amplitudes),
            self.layout.clone(),
        )
    }
}

// ---------------------------------------------------------------------------
// Density matrices
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    matrix: CMatrix,
    layout: QubitLayout,
}

impl DensityMatrix {
    pub fn new(matrix: CMatrix, layout: QubitLayout) -> Result<Self> {
        let n = layout.total_qubits();
        let dim = 1usize << n;
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(HamlabError::DimensionMismatch {
                expected: dim,
                actual: matrix.nrows(),
            });
        }
        let defect = linalg::hermiticity_defect(&matrix);
        if defect > HERMITIAN_TOL {
            return Err(HamlabError::InvalidDensityMatrix(format!(
                "not Hermitian (deviation {defect:.3e})"
            )));
        }
        let tr = linalg::trace(&matrix);
        if (tr.re - 1.0).abs() > PSD_TOL || tr.im.abs() > PSD_TOL {
            return Err(HamlabError::InvalidDensityMatrix(format!(
                "trace {tr} differs from 1"
            )));
        }
        let min_eig = linalg::eigh(&matrix).min();
        if min_eig < -PSD_TOL {
            return Err(HamlabError::InvalidDensityMatrix(format!(
                "negative eigenvalue {min_eig:.3e}"
            )));
        }
        Ok(Self { matrix, layout })
    }

    pub fn from_matrix(matrix: CMatrix) -> Result<Self> {
        let n = qubits_for_dim(matrix.nrows()).ok_or(HamlabError::DimensionMismatch {
            expected: matrix.nrows().next_power_of_two(),
            actual: matrix.nrows(),
        })?;
        Self::new(matrix, QubitLayout::free(n))
    }

    pub(crate) fn from_parts_unchecked(matrix: CMatrix, layout: QubitLayout) -> Self {
        debug_assert_eq!(matrix.nrows(), 1 << layout.total_qubits());
        Self { matrix, layout }
    }

    pub fn maximally_mixed(n: usize) -> Self {
        let dim = 1usize << n;
        Self::from_parts_unchecked(
            linalg::identity(dim).unscale(dim as f64),
            QubitLayout::free(n),
        )
    }

    /// Random density matrix of the given rank (induced measure).
    pub fn random<R: Rng + ?Sized>(n: usize, rank: usize, rng: &mut R) -> Self {
        Self::from_parts_unchecked(
            linalg::random_density_matrix(1 << n, rank, rng),
            QubitLayout::free(n),
        )
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn layout(&self) -> &QubitLayout {
        &self.layout
    }

    pub fn num_qubits(&self) -> usize {
        self.layout.total_qubits()
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn trace(&self) -> f64 {
        linalg::trace(&self.matrix).re
    }

    pub fn purity(&self) -> f64 {
        linalg::trace(&(&self.matrix * &self.matrix)).re
    }
}

fn same_dim(expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(HamlabError::DimensionMismatch { expected, actual });
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Tensor products
// ---------------------------------------------------------------------------

pub trait Tensor: Sized {
    /// `self ⊗ other`; the result layout concatenates both layouts.
    fn tensor(&self, other: &Self) -> Result<Self>;
}

impl Tensor for PureState {
    fn tensor(&self, other: &Self) -> Result<Self> {
        let layout = self.layout.concat(&other.layout)?;
        Ok(Self::from_parts_unchecked(
            self.amplitudes.kronecker(&other.amplitudes),
            layout,
        ))
    }
}

impl Tensor for DensityMatrix {
    fn tensor(&self, other: &Self) -> Result<Self> {
        let layout = self.layout.concat(&other.layout)?;
        Ok(Self::from_parts_unchecked(
            self.matrix.kronecker(&other.matrix),
            layout,
        ))
    }
}

// ---------------------------------------------------------------------------
// Partial trace
// ---------------------------------------------------------------------------

/// Partial trace of an arbitrary `2^n x 2^n` matrix onto `keep`. Kept
/// qubits appear in the order listed.
pub fn reduce_matrix(m: &CMatrix, n: usize, keep: &[usize]) -> Result<CMatrix> {
    same_dim(1 << n, m.nrows())?;
    check_distinct(keep, n)?;
    let traced = complement(keep, n);
    let dk = 1usize << keep.len();
    let dt = 1usize << traced.len();
    let table: Vec<Vec<usize>> = (0..dk)
        .map(|a| {
            let base = scatter_bits(0, a, keep, n);
            (0..dt).map(|t| scatter_bits(base, t, &traced, n)).collect()
        })
        .collect();
    let mut out = CMatrix::zeros(dk, dk);
    for a in 0..dk {
        for b in 0..dk {
            let mut acc = ZERO;
            for t in 0..dt {
                acc += m[(table[a][t], table[b][t])];
            }
            out[(a, b)] = acc;
        }
    }
    Ok(out)
}

/// Reduced density matrix on `keep` (kept qubits in the order listed).
pub fn partial_trace(rho: &DensityMatrix, keep: &[usize]) -> Result<DensityMatrix> {
    if keep.is_empty() {
        return Err(HamlabError::ScalarTrace);
    }
    let n = rho.num_qubits();
    let reduced = reduce_matrix(&rho.matrix, n, keep)?;
    Ok(DensityMatrix::from_parts_unchecked(
        linalg::hermitian_part(&reduced),
        rho.layout.restrict(keep),
    ))
}

/// Reorders qubits: qubit `k` of the result is qubit `order[k]` of the input.
pub fn permute_qubits(m: &CMatrix, order: &[usize]) -> Result<CMatrix> {
    let n = order.len();
    same_dim(1 << n, m.nrows())?;
    check_distinct(order, n)?;
    let dim = 1usize << n;
    let map: Vec<usize> = (0..dim).map(|i| scatter_bits(0, i, order, n)).collect();
    Ok(CMatrix::from_fn(dim, dim, |i, j| m[(map[i], map[j])]))
}

// ---------------------------------------------------------------------------
// Distances and overlaps
// ---------------------------------------------------------------------------

/// `½‖ρ − σ‖₁` via the spectrum of the difference.
pub fn trace_distance(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    same_dim(rho.dim(), sigma.dim())?;
    let diff = &rho.matrix - &sigma.matrix;
    Ok((0.5 * linalg::trace_norm_hermitian(&diff)).clamp(0.0, 1.0))
}

/// `|⟨ψ|φ⟩|²`.
pub fn overlap(psi: &PureState, phi: &PureState) -> Result<f64> {
    Ok(psi.inner(phi)?.norm_sqr().min(1.0))
}

/// Best product approximation of a pure state across a cut.
#[derive(Clone, Debug)]
pub struct ProductOverlap {
    /// Square of the largest Schmidt coefficient.
    pub value: f64,
    pub left: PureState,
    pub right: PureState,
    /// All Schmidt coefficients, descending. They come from Gram eigenvalues,
    /// so coefficients below about `1e-7` are reported as zero.
    pub schmidt: Vec<f64>,
}

impl ProductOverlap {
    pub fn schmidt_rank(&self, tol: f64) -> usize {
        self.schmidt.iter().filter(|&&s| s > tol).count()
    }
}

/// Amplitude matrix `M[a][b]` of `psi` reshaped along `cut`.
pub fn reshape_along_cut(psi: &PureState, cut: &Bipartition) -> Result<CMatrix> {
    same_dim(1 << cut.total_qubits(), psi.dim())?;
    let table = cut.index_table();
    let da = table.len();
    let db = table[0].len();
    Ok(CMatrix::from_fn(da, db, |a, b| psi.amplitudes[table[a][b]]))
}

const SCHMIDT_FLOOR: f64 = 1e-14;

pub fn max_product_overlap(psi: &PureState, cut: &Bipartition) -> Result<ProductOverlap> {
    let m = reshape_along_cut(psi, cut)?;
    // top singular pair M ≈ σ u v†, taken from the smaller Gram matrix
    let (left, right, gram_values) = if m.nrows() <= m.ncols() {
        let e = linalg::eigh(&(&m * m.adjoint()));
        let u = e.vector(e.values.len() - 1);
        let v_bar = CVector::from_iterator(m.ncols(), (u.adjoint() * &m).iter().copied());
        (u, v_bar, e.values)
    } else {
        let e = linalg::eigh(&(m.adjoint() * &m));
        let v = e.vector(e.values.len() - 1);
        (&m * &v, v.map(|z| z.conj()), e.values)
    };
    let sigma = if m.nrows() <= m.ncols() { right.norm() } else { left.norm() };
    let mut schmidt: Vec<f64> = gram_values.iter().rev().map(|&v| if v > SCHMIDT_FLOOR { v.sqrt() } else { 0.0 }).collect();
    schmidt.truncate(m.nrows().min(m.ncols()));
    let left = left.unscale(left.norm());
    let right = right.unscale(right.norm());
    Ok(ProductOverlap {
        value: (sigma * sigma).min(1.0),
        left: PureState::from_parts_unchecked(left, QubitLayout::free(cut.side_a().len())),
        right: PureState::from_parts_unchecked(right, QubitLayout::free(cut.side_b().len())),
        schmidt,
    })
}

/// Embeds `left ⊗ right` into the full register ordered by `cut`.
pub fn product_state_along_cut(
    left: &CVector,
    right: &CVector,
    cut: &Bipartition,
) -> Result<CVector> {
    same_dim(1 << cut.side_a().len(), left.len())?;
    same_dim(1 << cut.side_b().len(), right.len())?;
    let table = cut.index_table();
    let mut out = CVector::zeros(1 << cut.total_qubits());
    for (a, row) in table.iter().enumerate() {
        for (b, &idx) in row.iter().enumerate() {
            out[idx] = left[a] * right[b];
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Expectation values
// ---------------------------------------------------------------------------

/// Anything an operator can be evaluated on.
pub trait QuantumState {
    fn dim(&self) -> usize;
    /// `⟨ψ|O|ψ⟩` or `tr(O ρ)`, before taking the real part.
    fn expectation(&self, op: &dyn Operator) -> Result<C64>;
}

impl QuantumState for PureState {
    fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    fn expectation(&self, op: &dyn Operator) -> Result<C64> {
        same_dim(op.dim(), self.dim())?;
        Ok(self.amplitudes.dotc(&op.apply(&self.amplitudes)))
    }
}

impl QuantumState for DensityMatrix {
    fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    fn expectation(&self, op: &dyn Operator) -> Result<C64> {
        same_dim(op.dim(), self.dim())?;
        Ok(op.trace_with(&self.matrix))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn basis_tensor_places_amplitude() {
        let zero = PureState::basis(1, 0).unwrap();
        let one = PureState::basis(1, 1).unwrap();
        let ket = zero.tensor(&one).unwrap();
        assert_eq!(ket.dim(), 4);
        assert_eq!(ket.amplitudes()[1], ONE);
        assert_eq!(ket.amplitudes().iter().filter(|a| a.norm() > 0.0).count(), 1);
    }

    #[test]
    fn density_tensor_trace_is_multiplicative() {
        let mut r = rng(1);
        let a = DensityMatrix::random(1, 2, &mut r);
        let b = DensityMatrix::random(2, 3, &mut r);
        let ab = a.tensor(&b).unwrap();
        assert!((ab.trace() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn density_tensor_entries_follow_index_split() {
        let mut r = rng(2);
        let a = DensityMatrix::random(1, 2, &mut r);
        let b = DensityMatrix::random(1, 2, &mut r);
        let ab = a.tensor(&b).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let expected = a.matrix()[(i / 2, j / 2)] * b.matrix()[(i % 2, j % 2)];
                assert!((ab.matrix()[(i, j)] - expected).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn tensor_rejects_label_collision() {
        let a = PureState::zero(1)
            .with_layout(QubitLayout::new(vec![(Label::Proof1, 1)]).unwrap())
            .unwrap();
        assert!(matches!(
            a.tensor(&a),
            Err(HamlabError::LabelCollision(_))
        ));
    }

    #[test]
    fn layout_merges_free_runs_and_drops_empty() {
        let l = QubitLayout::new(vec![
            (Label::Free, 1),
            (Label::Free, 2),
            (Label::Ancilla, 0),
            (Label::Proof1, 2),
        ])
        .unwrap();
        assert_eq!(l.subsystems(), &[(Label::Free, 3), (Label::Proof1, 2)]);
        assert_eq!(l.qubits_of(&Label::Proof1), vec![3, 4]);
    }

    #[test]
    fn bell_marginal_is_maximally_mixed() {
        let s = 0.5f64.sqrt();
        let bell = PureState::from_amplitudes(CVector::from_vec(vec![
            C64::new(s, 0.0),
            ZERO,
            ZERO,
            C64::new(s, 0.0),
        ]))
        .unwrap();
        let rho = partial_trace(&bell.to_density(), &[0]).unwrap();
        let half = DensityMatrix::maximally_mixed(1);
        assert!(linalg::max_abs_diff(rho.matrix(), half.matrix()) < 1e-15);
    }

    #[test]
    fn product_marginal_recovers_factor() {
        let mut r = rng(4);
        let a = DensityMatrix::random(2, 4, &mut r);
        let b = DensityMatrix::random(1, 2, &mut r);
        let ab = a.tensor(&b).unwrap();
        let back = partial_trace(&ab, &[0, 1]).unwrap();
        assert!(linalg::max_abs_diff(back.matrix(), a.matrix()) < 1e-14);
    }

    #[test]
    fn empty_keep_is_an_error() {
        let rho = DensityMatrix::maximally_mixed(2);
        assert_eq!(partial_trace(&rho, &[]), Err(HamlabError::ScalarTrace));
    }

    #[test]
    fn trace_distance_edge_cases() {
        let zero = PureState::basis(1, 0).unwrap().to_density();
        let one = PureState::basis(1, 1).unwrap().to_density();
        assert!(trace_distance(&zero, &zero).unwrap() < 1e-15);
        assert!((trace_distance(&zero, &one).unwrap() - 1.0).abs() < 1e-15);
        let big = DensityMatrix::maximally_mixed(2);
        assert!(matches!(
            trace_distance(&zero, &big),
            Err(HamlabError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn overlap_edge_cases() {
        let mut r = rng(5);
        let psi = PureState::random(3, &mut r);
        assert!((overlap(&psi, &psi).unwrap() - 1.0).abs() < 1e-14);
        let a = PureState::basis(2, 1).unwrap();
        let b = PureState::basis(2, 2).unwrap();
        assert_eq!(overlap(&a, &b).unwrap(), 0.0);
    }

    #[test]
    fn bell_pair_product_overlap_is_half() {
        let s = 0.5f64.sqrt();
        let bell = PureState::from_amplitudes(CVector::from_vec(vec![
            C64::new(s, 0.0),
            ZERO,
            ZERO,
            C64::new(s, 0.0),
        ]))
        .unwrap();
        let cut = Bipartition::contiguous(1, 2).unwrap();
        let best = max_product_overlap(&bell, &cut).unwrap();
        assert!((best.value - 0.5).abs() < 1e-14);
    }

    #[test]
    fn product_state_has_unit_product_overlap() {
        let mut r = rng(6);
        let a = PureState::random(2, &mut r);
        let b = PureState::random(1, &mut r);
        let ab = a.tensor(&b).unwrap();
        let cut = Bipartition::contiguous(2, 3).unwrap();
        let best = max_product_overlap(&ab, &cut).unwrap();
        assert!((best.value - 1.0).abs() < 1e-12);
        assert_eq!(best.schmidt_rank(1e-9), 1);
    }

    #[test]
    fn product_overlap_factors_attain_value() {
        let mut r = rng(16);
        for (na, nb) in [(1, 3), (3, 1), (2, 2)] {
            let psi = PureState::random(na + nb, &mut r);
            let cut = Bipartition::contiguous(na, na + nb).unwrap();
            let best = max_product_overlap(&psi, &cut).unwrap();
            let phi = product_state_along_cut(&best.left.amplitudes, &best.right.amplitudes, &cut).unwrap();
            let overlap = phi.dotc(&psi.amplitudes).norm_sqr();
            assert!((overlap - best.value).abs() < 1e-12, "{na}+{nb}: {overlap} vs {}", best.value);
            let total: f64 = best.schmidt.iter().map(|x| x * x).sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn bipartition_validation() {
        assert!(Bipartition::new(vec![0, 1], vec![1, 2], 3).is_err());
        assert!(Bipartition::new(vec![0], vec![2], 3).is_err());
        assert!(Bipartition::new(vec![2, 0], vec![1], 3).is_ok());
    }

    #[test]
    fn permute_qubits_swaps_tensor_factors() {
        let mut r = rng(7);
        let a = DensityMatrix::random(1, 2, &mut r);
        let b = DensityMatrix::random(2, 2, &mut r);
        let ab = a.tensor(&b).unwrap();
        let ba = b.tensor(&a).unwrap();
        // qubit k of result = qubit order[k] of input: (b0, b1, a0) = (1, 2, 0)
        let permuted = permute_qubits(ab.matrix(), &[1, 2, 0]).unwrap();
        assert!(linalg::max_abs_diff(&permuted, ba.matrix()) < 1e-15);
    }

    #[test]
    fn density_constructor_rejects_bad_input() {
        let m = CMatrix::from_diagonal(&CVector::from_vec(vec![C64::new(1.2, 0.0), C64::new(-0.2, 0.0)]));
        assert!(DensityMatrix::from_matrix(m).is_err());
        let m = CMatrix::from_diagonal(&CVector::from_vec(vec![C64::new(0.7, 0.0), C64::new(0.7, 0.0)]));
        assert!(DensityMatrix::from_matrix(m).is_err());
    }
}
