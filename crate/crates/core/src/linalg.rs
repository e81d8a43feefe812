//! Dense complex linear-algebra helpers shared by every module.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

/// Eigen-decomposition of a Hermitian matrix with eigenvalues sorted ascending.
///
/// Eigenvector `k` is column `k` of `vectors`. Ties keep the solver's order,
/// which is stable with respect to the sort.
#[derive(Clone, Debug)]
pub struct Eigh {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

impl Eigh {
    pub fn min(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    pub fn max(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }

    pub fn vector(&self, k: usize) -> CVector {
        self.vectors.column(k).into_owned()
    }
}

pub fn eigh(m: &CMatrix) -> Eigh {
    let dim = m.nrows();
    if dim == 0 {
        return Eigh {
            values: vec![],
            vectors: CMatrix::zeros(0, 0),
        };
    }
    let sym = hermitian_part(m);
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = CMatrix::zeros(dim, dim);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Eigh { values, vectors }
}

pub fn eigenvalues(m: &CMatrix) -> Vec<f64> {
    eigh(m).values
}

pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

/// Largest entrywise deviation of `m` from its adjoint.
pub fn hermiticity_defect(m: &CMatrix) -> f64 {
    if !m.is_square() {
        return f64::INFINITY;
    }
    let mut worst: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in i..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Largest entrywise deviation of `u† u` from the identity.
pub fn unitarity_defect(u: &CMatrix) -> f64 {
    if !u.is_square() {
        return f64::INFINITY;
    }
    let prod = u.adjoint() * u;
    let mut worst: f64 = 0.0;
    for i in 0..prod.nrows() {
        for j in 0..prod.ncols() {
            let target = if i == j { ONE } else { ZERO };
            worst = worst.max((prod[(i, j)] - target).norm());
        }
    }
    worst
}

pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

pub fn trace(m: &CMatrix) -> C64 {
    m.diagonal().iter().sum()
}

/// Trace norm of a Hermitian matrix via its spectrum.
pub fn trace_norm_hermitian(m: &CMatrix) -> f64 {
    eigenvalues(m).iter().map(|v| v.abs()).sum()
}

/// Operator norm of a Hermitian matrix.
pub fn op_norm_hermitian(m: &CMatrix) -> f64 {
    let e = eigenvalues(m);
    e.iter().map(|v| v.abs()).fold(0.0, f64::max)
}

pub fn inner(a: &CVector, b: &CVector) -> C64 {
    a.dotc(b)
}

pub fn outer(a: &CVector, b: &CVector) -> CMatrix {
    a * b.adjoint()
}

pub fn identity(dim: usize) -> CMatrix {
    CMatrix::identity(dim, dim)
}

/// Applies `f` to the spectrum of a Hermitian matrix.
pub fn hermitian_function(m: &CMatrix, f: impl Fn(f64) -> C64) -> CMatrix {
    let e = eigh(m);
    let dim = m.nrows();
    let mut scaled = e.vectors.clone();
    for k in 0..dim {
        let w = f(e.values[k]);
        for i in 0..dim {
            scaled[(i, k)] *= w;
        }
    }
    scaled * e.vectors.adjoint()
}

/// `exp(-i h t)` for Hermitian `h`.
pub fn expm_hermitian(h: &CMatrix, t: f64) -> CMatrix {
    hermitian_function(h, |lambda| C64::from_polar(1.0, -lambda * t))
}

/// Orthonormal basis for the column span of `m`, dropping directions with
/// singular value at most `tol`.
///
/// Built from the Hermitian eigensolver on the smaller Gram matrix; the
/// complex SVD in nalgebra occasionally returns an inconsistent
/// factorization for rank-deficient input.
pub fn orthonormal_span(m: &CMatrix, tol: f64) -> CMatrix {
    let rows = m.nrows();
    if m.ncols() == 0 || rows == 0 {
        return CMatrix::zeros(rows, 0);
    }
    // Singular values are read off as ‖m v‖ (or ‖m† u‖), which stays
    // accurate near zero where the square root of a Gram eigenvalue does not.
    let mut cols: Vec<CVector> = if m.ncols() <= rows {
        let e = eigh(&(m.adjoint() * m));
        (0..e.values.len())
            .rev()
            .map(|k| m * e.vector(k))
            .filter(|u| u.norm() > tol)
            .collect()
    } else {
        let e = eigh(&(m * m.adjoint()));
        (0..e.values.len())
            .rev()
            .map(|k| e.vector(k))
            .filter(|u| (m.adjoint() * u).norm() > tol)
            .collect()
    };
    // two passes of modified Gram-Schmidt clean up the rounding in m·v
    for _ in 0..2 {
        for k in 0..cols.len() {
            let (done, rest) = cols.split_at_mut(k);
            let v = &mut rest[0];
            for q in done.iter() {
                let c = q.dotc(v);
                v.axpy(-c, q, ONE);
            }
            let n = v.norm();
            v.unscale_mut(n);
        }
    }
    let mut out = CMatrix::zeros(rows, cols.len());
    for (k, c) in cols.iter().enumerate() {
        out.set_column(k, c);
    }
    out
}

pub fn largest_singular_value(m: &CMatrix) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    let gram = if m.ncols() <= m.nrows() { m.adjoint() * m } else { m * m.adjoint() };
    eigenvalues(&gram).last().copied().unwrap_or(0.0).max(0.0).sqrt()
}

pub fn gaussian_complex<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im)
}

/// Haar-random unit vector.
pub fn random_unit_vector<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> CVector {
    loop {
        let v = CVector::from_fn(dim, |_, _| gaussian_complex(rng));
        let n = v.norm();
        if n > 1e-12 {
            return v.unscale(n);
        }
    }
}

/// Ginibre matrix with i.i.d. standard complex Gaussian entries.
pub fn ginibre<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| gaussian_complex(rng))
}

/// Haar-random unitary from the QR decomposition of a Ginibre matrix.
pub fn random_unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> CMatrix {
    let qr = ginibre(dim, dim, rng).qr();
    let q = qr.q();
    let r = qr.r();
    let mut out = q;
    for k in 0..dim {
        let d = r[(k, k)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { ONE };
        for i in 0..dim {
            out[(i, k)] *= phase;
        }
    }
    out
}

/// Random Hermitian matrix with Gaussian entries.
pub fn random_hermitian<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> CMatrix {
    hermitian_part(&ginibre(dim, dim, rng))
}

/// Random Hermitian `h` with `0 <= h <= I`: a Haar-rotated diagonal with
/// uniform eigenvalues.
pub fn random_effect<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> CMatrix {
    let u = random_unitary(dim, rng);
    let diag = CMatrix::from_diagonal(&CVector::from_fn(dim, |_, _| {
        C64::new(rng.random::<f64>(), 0.0)
    }));
    &u * diag * u.adjoint()
}

/// Random density matrix of the given rank from the induced measure.
pub fn random_density_matrix<R: Rng + ?Sized>(dim: usize, rank: usize, rng: &mut R) -> CMatrix {
    let g = ginibre(dim, rank.max(1), rng);
    let rho = &g * g.adjoint();
    let tr = trace(&rho).re;
    hermitian_part(&rho.unscale(tr))
}

/// Euclidean projection of a real vector onto the probability simplex.
pub fn project_to_simplex(values: &[f64]) -> Vec<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (k, &v) in sorted.iter().enumerate() {
        cumulative += v;
        let candidate = (cumulative - 1.0) / (k as f64 + 1.0);
        if v - candidate > 0.0 {
            theta = candidate;
        }
    }
    values.iter().map(|&v| (v - theta).max(0.0)).collect()
}

/// Projection of a Hermitian matrix onto the set of density matrices.
pub fn project_to_density(m: &CMatrix) -> CMatrix {
    let e = eigh(m);
    let clipped = project_to_simplex(&e.values);
    let dim = m.nrows();
    let mut scaled = e.vectors.clone();
    for k in 0..dim {
        for i in 0..dim {
            scaled[(i, k)] *= clipped[k];
        }
    }
    hermitian_part(&(scaled * e.vectors.adjoint()))
}
