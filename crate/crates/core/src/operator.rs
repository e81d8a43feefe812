//! Operator representations: dense matrices, row-sparse matrices and
//! local terms embedded in a larger register.

use crate::error::{HamlabError, Result};
use crate::linalg::{self, CMatrix, CVector, C64, ZERO};
use crate::qstate::{check_distinct, complement, gather_bits, scatter_bits};

/// Entries with modulus below this are not stored.
pub const SPARSE_DROP: f64 = 1e-14;

/// Linear operator on a `dim`-dimensional space.
pub trait Operator {
    fn dim(&self) -> usize;
    fn apply(&self, v: &CVector) -> CVector;
    /// `tr(O ρ)`.
    fn trace_with(&self, rho: &CMatrix) -> C64;
}

impl Operator for CMatrix {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, v: &CVector) -> CVector {
        self * v
    }

    fn trace_with(&self, rho: &CMatrix) -> C64 {
        let mut acc = ZERO;
        for i in 0..self.nrows() {
            for k in 0..self.ncols() {
                acc += self[(i, k)] * rho[(k, i)];
            }
        }
        acc
    }
}

// ---------------------------------------------------------------------------
// Row-sparse matrices
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    dim: usize,
    rows: Vec<Vec<(usize, C64)>>,
}

impl SparseMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            rows: vec![Vec::new(); dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            dim,
            rows: (0..dim).map(|i| vec![(i, linalg::ONE)]).collect(),
        }
    }

    /// Sums duplicate coordinates and drops negligible entries.
    pub fn from_triplets(dim: usize, triplets: impl IntoIterator<Item = (usize, usize, C64)>) -> Self {
        let mut rows: Vec<Vec<(usize, C64)>> = vec![Vec::new(); dim];
        for (i, j, v) in triplets {
            assert!(i < dim && j < dim, "triplet ({i}, {j}) outside dimension {dim}");
            rows[i].push((j, v));
        }
        for row in &mut rows {
            row.sort_by_key(|&(j, _)| j);
            let mut merged: Vec<(usize, C64)> = Vec::with_capacity(row.len());
            for &(j, v) in row.iter() {
                match merged.last_mut() {
                    Some((lj, lv)) if *lj == j => *lv += v,
                    _ => merged.push((j, v)),
                }
            }
            merged.retain(|(_, v)| v.norm() >= SPARSE_DROP);
            *row = merged;
        }
        Self { dim, rows }
    }

    pub fn from_dense(m: &CMatrix) -> Self {
        let dim = m.nrows();
        let rows = (0..dim)
            .map(|i| {
                (0..m.ncols())
                    .filter(|&j| m[(i, j)].norm() >= SPARSE_DROP)
                    .map(|j| (j, m[(i, j)]))
                    .collect()
            })
            .collect();
        Self { dim, rows }
    }

    pub fn to_dense(&self) -> CMatrix {
        let mut out = CMatrix::zeros(self.dim, self.dim);
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                out[(i, j)] += v;
            }
        }
        out
    }

    pub fn row(&self, i: usize) -> &[(usize, C64)] {
        &self.rows[i]
    }

    pub fn rows(&self) -> &[Vec<(usize, C64)>] {
        &self.rows
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn max_row_nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.rows[i]
            .binary_search_by_key(&j, |&(c, _)| c)
            .map(|k| self.rows[i][k].1)
            .unwrap_or(ZERO)
    }

    pub fn add(&self, other: &SparseMatrix) -> Result<SparseMatrix> {
        if self.dim != other.dim {
            return Err(HamlabError::DimensionMismatch {
                expected: self.dim,
                actual: other.dim,
            });
        }
        Ok(Self::from_triplets(
            self.dim,
            self.triplets().chain(other.triplets()),
        ))
    }

    pub fn scale(&self, s: C64) -> SparseMatrix {
        Self::from_triplets(self.dim, self.triplets().map(|(i, j, v)| (i, j, v * s)))
    }

    pub fn adjoint(&self) -> SparseMatrix {
        Self::from_triplets(self.dim, self.triplets().map(|(i, j, v)| (j, i, v.conj())))
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        self.rows
            .iter()
            .enumerate()
            .flat_map(|(i, row)| row.iter().map(move |&(j, v)| (i, j, v)))
    }

    /// Largest deviation between an entry and the conjugate of its mirror.
    pub fn hermiticity_defect(&self) -> f64 {
        self.triplets()
            .map(|(i, j, v)| (v - self.get(j, i).conj()).norm())
            .fold(0.0, f64::max)
    }
}

impl Operator for SparseMatrix {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, v: &CVector) -> CVector {
        CVector::from_fn(self.dim, |i, _| {
            self.rows[i].iter().map(|&(j, a)| a * v[j]).sum()
        })
    }

    fn trace_with(&self, rho: &CMatrix) -> C64 {
        self.triplets().map(|(i, j, v)| v * rho[(j, i)]).sum()
    }
}

// ---------------------------------------------------------------------------
// Local terms
// ---------------------------------------------------------------------------

/// Operator acting on the qubits `support` of an `n`-qubit register. The
/// first support qubit is the most significant index of `matrix`.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalTerm {
    pub n: usize,
    pub support: Vec<usize>,
    pub matrix: CMatrix,
}

impl LocalTerm {
    pub fn new(n: usize, support: Vec<usize>, matrix: CMatrix) -> Result<Self> {
        check_distinct(&support, n)?;
        let d = 1usize << support.len();
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(HamlabError::DimensionMismatch {
                expected: d,
                actual: matrix.nrows(),
            });
        }
        Ok(Self { n, support, matrix })
    }

    pub fn locality(&self) -> usize {
        self.support.len()
    }

    pub fn full_dim(&self) -> usize {
        1 << self.n
    }

    /// Nonzero entries of row `i` of the embedded operator `matrix ⊗ I`.
    pub fn row(&self, i: usize) -> Vec<(usize, C64)> {
        let a = gather_bits(i, &self.support, self.n);
        let mut out: Vec<(usize, C64)> = (0..self.matrix.ncols())
            .filter(|&b| self.matrix[(a, b)].norm() >= SPARSE_DROP)
            .map(|b| (scatter_bits(i, b, &self.support, self.n), self.matrix[(a, b)]))
            .collect();
        out.sort_by_key(|&(j, _)| j);
        out
    }

    pub fn to_sparse(&self) -> SparseMatrix {
        let dim = self.full_dim();
        SparseMatrix {
            dim,
            rows: (0..dim).map(|i| self.row(i)).collect(),
        }
    }

    pub fn embed(&self) -> CMatrix {
        self.to_sparse().to_dense()
    }

    /// `tr(matrix · ρ_C)` where `ρ_C` is the reduction of `rho` to the support.
    pub fn expectation_local(&self, rho_support: &CMatrix) -> C64 {
        self.matrix.trace_with(rho_support)
    }

    /// Qubits outside the support.
    pub fn rest(&self) -> Vec<usize> {
        complement(&self.support, self.n)
    }
}

impl Operator for LocalTerm {
    fn dim(&self) -> usize {
        self.full_dim()
    }

    fn apply(&self, v: &CVector) -> CVector {
        apply_on_support(&self.matrix, &self.support, self.n, v)
    }

    fn trace_with(&self, rho: &CMatrix) -> C64 {
        let reduced = crate::qstate::reduce_matrix(rho, self.n, &self.support)
            .expect("dimension checked by caller");
        self.matrix.trace_with(&reduced)
    }
}

/// Applies `matrix` on the qubits `support` of an `n`-qubit vector.
pub fn apply_on_support(matrix: &CMatrix, support: &[usize], n: usize, v: &CVector) -> CVector {
    let mut out = CVector::zeros(1 << n);
    let dk = 1usize << support.len();
    let rest = complement(support, n);
    let mut idx = vec![0usize; dk];
    for r in 0..1usize << rest.len() {
        let base = scatter_bits(0, r, &rest, n);
        for (a, slot) in idx.iter_mut().enumerate() {
            *slot = scatter_bits(base, a, support, n);
        }
        for a in 0..dk {
            let mut acc = ZERO;
            for b in 0..dk {
                acc += matrix[(a, b)] * v[idx[b]];
            }
            out[idx[a]] = acc;
        }
    }
    out
}

/// Sum of local terms as a dense matrix.
pub fn sum_terms_dense(n: usize, terms: &[LocalTerm]) -> CMatrix {
    let mut h = CMatrix::zeros(1 << n, 1 << n);
    for term in terms {
        for (i, j, v) in term.to_sparse().triplets() {
            h[(i, j)] += v;
        }
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{random_hermitian, ONE};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sparse_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = random_hermitian(8, &mut rng);
        let s = SparseMatrix::from_dense(&m);
        assert_eq!(s.to_dense(), m);
        assert!(s.hermiticity_defect() < 1e-15);
    }

    #[test]
    fn triplets_merge_and_cancel() {
        let s = SparseMatrix::from_triplets(
            2,
            vec![(0, 1, ONE), (0, 1, ONE), (1, 0, ONE), (1, 0, -ONE)],
        );
        assert_eq!(s.get(0, 1), C64::new(2.0, 0.0));
        assert!(s.row(1).is_empty());
    }

    #[test]
    fn local_term_embedding_matches_kronecker() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let m = random_hermitian(4, &mut rng);
        // support {1, 2} of 3 qubits is I ⊗ m
        let term = LocalTerm::new(3, vec![1, 2], m.clone()).unwrap();
        let expected = linalg::identity(2).kronecker(&m);
        assert!(linalg::max_abs_diff(&term.embed(), &expected) < 1e-15);
    }

    #[test]
    fn local_term_apply_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = random_hermitian(4, &mut rng);
        let term = LocalTerm::new(4, vec![3, 0], m).unwrap();
        let v = linalg::random_unit_vector(16, &mut rng);
        let dense = term.embed() * &v;
        assert!((term.apply(&v) - dense).norm() < 1e-13);
    }

    #[test]
    fn trace_with_matches_dense_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let m = random_hermitian(4, &mut rng);
        let term = LocalTerm::new(3, vec![2, 0], m).unwrap();
        let rho = linalg::random_density_matrix(8, 3, &mut rng);
        let direct = linalg::trace(&(term.embed() * &rho));
        assert!((term.trace_with(&rho) - direct).norm() < 1e-13);
        assert!((term.to_sparse().trace_with(&rho) - direct).norm() < 1e-13);
    }
}
