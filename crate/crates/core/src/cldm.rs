//! Consistency of local density matrices as a desk-scale decision oracle,
//! and the classical-proof verifier for separable local Hamiltonians.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{HamlabError, Result};
use crate::linalg::{self, CMatrix, C64, ZERO};
use crate::optimize::SLHInstance;
use crate::qstate::{check_distinct, partial_trace, permute_qubits, reduce_matrix, DensityMatrix, QubitLayout, Tensor};

/// Largest register the feasibility search accepts.
pub const MAX_CLDM_QUBITS: usize = 6;
/// Tolerance on `‖ρ − ρ_A ⊗ ρ_B‖` when checking that a state is a product.
pub const PRODUCT_TOL: f64 = 1e-9;

/// Local density matrices `ρ_i` on qubit sets `C_i` of an `n`-qubit register.
#[derive(Clone, Debug)]
pub struct CldmInstance {
    n: usize,
    marginals: Vec<(Vec<usize>, DensityMatrix)>,
    beta: f64,
    k: usize,
}

impl CldmInstance {
    pub fn new(n: usize, marginals: Vec<(Vec<usize>, DensityMatrix)>, beta: f64, k: usize) -> Result<Self> {
        if !(beta > 0.0) {
            return Err(HamlabError::InvalidParameter(format!("beta must be positive, got {beta}")));
        }
        for (i, (support, rho)) in marginals.iter().enumerate() {
            check_distinct(support, n).map_err(|e| {
                HamlabError::MalformedInstance(format!("marginal {i}: {e}"))
            })?;
            if support.len() > k {
                return Err(HamlabError::MalformedInstance(format!(
                    "marginal {i} acts on {} qubits, locality bound is {k}",
                    support.len()
                )));
            }
            if rho.num_qubits() != support.len() {
                return Err(HamlabError::MalformedInstance(format!(
                    "marginal {i} has {} qubits but its support lists {}",
                    rho.num_qubits(),
                    support.len()
                )));
            }
        }
        Ok(Self { n, marginals, beta, k })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn marginals(&self) -> &[(Vec<usize>, DensityMatrix)] {
        &self.marginals
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// `max_i ‖Tr_{rest}(σ) − ρ_i‖_1` for a global matrix `σ`.
    pub fn max_deviation(&self, sigma: &CMatrix) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for (support, rho) in &self.marginals {
            let reduced = reduce_matrix(sigma, self.n, support)?;
            worst = worst.max(linalg::trace_norm_hermitian(&(reduced - rho.matrix())));
        }
        Ok(worst)
    }
}

/// Reduced density matrices of `rho` on each support.
pub fn reduce_all(rho: &DensityMatrix, supports: &[Vec<usize>]) -> Result<Vec<DensityMatrix>> {
    supports.iter().map(|c| partial_trace(rho, c)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Consistency {
    Consistent,
    Inconsistent,
    Indeterminate,
}

#[derive(Clone, Debug)]
pub struct Verdict {
    pub outcome: Consistency,
    /// Global state reproducing every marginal within tolerance.
    pub witness: Option<DensityMatrix>,
    /// Certified lower bound on `min_σ max_i ‖Tr(σ) − ρ_i‖_1`; zero when no
    /// positive bound was found.
    pub max_violation: f64,
    /// Smallest `max_i ‖Tr(σ) − ρ_i‖_1` reached by the search.
    pub best_residual: f64,
    pub iterations: usize,
}

#[derive(Clone, Copy, Debug)]
pub struct ConsistencyConfig {
    pub max_iter: usize,
    pub restarts: usize,
    /// Iterations between stall checks and support-restricted corrections.
    pub window: usize,
    pub tol: f64,
    pub seed: u64,
}

impl Default for ConsistencyConfig {
    fn default() -> Self {
        Self {
            max_iter: 5000,
            restarts: 10,
            window: 100,
            tol: 1e-8,
            seed: 0,
        }
    }
}

// ---------------------------------------------------------------------------
// Pauli bookkeeping for the affine constraint set
// ---------------------------------------------------------------------------

/// Hermitian Pauli string: `P|j⟩ = phase(j) |j ⊕ flip⟩`.
#[derive(Clone, Debug)]
struct PauliString {
    flip: usize,
    phases: Vec<C64>,
}

impl PauliString {
    /// `codes[q]` in {0: I, 1: X, 2: Y, 3: Z} for each of `n` qubits.
    fn new(codes: &[u8]) -> Self {
        let n = codes.len();
        let mut flip = 0;
        for (q, &c) in codes.iter().enumerate() {
            if c == 1 || c == 2 {
                flip |= 1 << (n - 1 - q);
            }
        }
        let phases = (0..1usize << n)
            .map(|j| {
                let mut ph = C64::new(1.0, 0.0);
                for (q, &c) in codes.iter().enumerate() {
                    let bit = (j >> (n - 1 - q)) & 1;
                    ph *= match (c, bit) {
                        (2, 0) => C64::new(0.0, 1.0),
                        (2, _) => C64::new(0.0, -1.0),
                        (3, 1) => C64::new(-1.0, 0.0),
                        _ => C64::new(1.0, 0.0),
                    };
                }
                ph
            })
            .collect();
        Self { flip, phases }
    }

    /// `tr(P X)`.
    fn coefficient(&self, x: &CMatrix) -> f64 {
        let mut acc = ZERO;
        for (j, ph) in self.phases.iter().enumerate() {
            acc += ph * x[(j, j ^ self.flip)];
        }
        acc.re
    }

    /// `X += s P`.
    fn add_to(&self, x: &mut CMatrix, s: f64) {
        for (j, ph) in self.phases.iter().enumerate() {
            x[(j ^ self.flip, j)] += ph * s;
        }
    }
}

/// Constrained Pauli strings with targets averaged over the marginals that
/// fix them. The orthogonal projection onto the affine set overwrites
/// exactly these coefficients.
struct AffineConstraints {
    n: usize,
    strings: Vec<(PauliString, f64)>,
}

impl AffineConstraints {
    fn new(inst: &CldmInstance) -> Self {
        let n = inst.n;
        let mut targets: BTreeMap<Vec<u8>, (f64, usize)> = BTreeMap::new();
        for (support, rho) in &inst.marginals {
            let k = support.len();
            for code in 0..1usize << (2 * k) {
                let local: Vec<u8> = (0..k).map(|q| ((code >> (2 * (k - 1 - q))) & 3) as u8).collect();
                let value = PauliString::new(&local).coefficient(rho.matrix());
                let mut global = vec![0u8; n];
                for (pos, &q) in support.iter().enumerate() {
                    global[q] = local[pos];
                }
                let entry = targets.entry(global).or_insert((0.0, 0));
                entry.0 += value;
                entry.1 += 1;
            }
        }
        if inst.marginals.is_empty() {
            targets.insert(vec![0u8; n], (1.0, 1));
        }
        let strings = targets
            .into_iter()
            .map(|(codes, (sum, count))| (PauliString::new(&codes), sum / count as f64))
            .collect();
        Self { n, strings }
    }

    fn project(&self, x: &CMatrix) -> CMatrix {
        let mut out = x.clone();
        let scale = 1.0 / (1usize << self.n) as f64;
        for (p, target) in &self.strings {
            let c = p.coefficient(x);
            p.add_to(&mut out, (target - c) * scale);
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Feasibility search
// ---------------------------------------------------------------------------

/// Gauss-Newton refinement of `σ = V V†`, with `V` seeded from the
/// eigenvectors of `sigma` above `threshold`. Each step is the minimum-norm
/// change of `V` that zeroes the linearized coefficient residuals.
fn low_rank_polish(constraints: &AffineConstraints, sigma: &CMatrix, threshold: f64, steps: usize) -> Option<CMatrix> {
    let e = linalg::eigh(sigma);
    let dim = sigma.nrows();
    let keep: Vec<usize> = (0..dim).filter(|&k| e.values[k] > threshold).collect();
    if keep.is_empty() {
        return None;
    }
    let r = keep.len();
    let mut v = CMatrix::zeros(dim, r);
    for (dst, &src) in keep.iter().enumerate() {
        v.set_column(dst, &(e.vectors.column(src) * C64::new(e.values[src].sqrt(), 0.0)));
    }
    let s = constraints.strings.len();
    for _ in 0..steps {
        let rho = &v * v.adjoint();
        let residual: Vec<f64> = constraints.strings.iter().map(|(p, t)| p.coefficient(&rho) - t).collect();
        if residual.iter().all(|x| x.abs() < 1e-15) {
            break;
        }
        let grads: Vec<CMatrix> = constraints
            .strings
            .iter()
            .map(|(p, _)| {
                let mut pv = CMatrix::zeros(dim, r);
                for col in 0..r {
                    for (j, ph) in p.phases.iter().enumerate() {
                        pv[(j ^ p.flip, col)] += ph * v[(j, col)] * 2.0;
                    }
                }
                pv
            })
            .collect();
        let mut gram = nalgebra::DMatrix::<f64>::zeros(s, s);
        for a in 0..s {
            for b in a..s {
                let g = grads[a].iter().zip(grads[b].iter()).map(|(x, z)| (x.conj() * z).re).sum::<f64>();
                gram[(a, b)] = g;
                gram[(b, a)] = g;
            }
        }
        let rhs = nalgebra::DVector::<f64>::from_iterator(s, residual.iter().map(|x| -x));
        if !rhs.iter().chain(gram.iter()).all(|x| x.is_finite()) {
            return None;
        }
        // pseudo-inverse through the spectrum of the PSD Gram matrix
        let eig = nalgebra::SymmetricEigen::try_new(gram, 1e-14, 10_000)?;
        let top = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
        let mut lambda = nalgebra::DVector::<f64>::zeros(s);
        for k in 0..s {
            let ev = eig.eigenvalues[k];
            if ev > 1e-12 * top {
                let u = eig.eigenvectors.column(k);
                lambda += u * (u.dot(&rhs) / ev);
            }
        }
        for (g, l) in grads.iter().zip(lambda.iter()) {
            v += g.scale(*l);
        }
    }
    let out = linalg::hermitian_part(&(&v * v.adjoint()));
    out.iter().all(|z| z.re.is_finite() && z.im.is_finite()).then_some(out)
}

/// Certified lower bound on `min_σ max_i ‖Tr(σ) − ρ_i‖_1` from the
/// operators `W_i = ρ_i − Tr(σ)`: for every state `τ`,
/// `Σ_i tr(W_i(ρ_i − τ_i)) ≥ Σ_i tr(W_i ρ_i) − λ_max(Σ_i W_i ⊗ I)` and the
/// left side is at most `Σ_i ‖W_i‖_∞ · max_i ‖ρ_i − τ_i‖_1`.
pub fn separation_bound(inst: &CldmInstance, sigma: &CMatrix) -> Result<f64> {
    let n = inst.n;
    let dim = 1usize << n;
    let mut total = CMatrix::zeros(dim, dim);
    let mut gain = 0.0;
    let mut norm = 0.0;
    for (support, rho) in &inst.marginals {
        let w = rho.matrix() - reduce_matrix(sigma, n, support)?;
        let w = linalg::hermitian_part(&w);
        gain += crate::operator::Operator::trace_with(&w, rho.matrix()).re;
        norm += linalg::op_norm_hermitian(&w);
        let term = crate::operator::LocalTerm {
            n,
            support: support.clone(),
            matrix: w,
        };
        for (i, j, v) in term.to_sparse().triplets() {
            total[(i, j)] += v;
        }
    }
    if norm <= 0.0 {
        return Ok(0.0);
    }
    let g = gain - linalg::eigh(&total).max();
    Ok((g / norm).max(0.0))
}

/// Alternating projection between density matrices and the affine set of
/// matrices with the prescribed marginals. Returns `consistent` only with a
/// witness, and `inconsistent` only with a certified separation of at least
/// `β/2`.
pub fn consistency_decide(inst: &CldmInstance, cfg: &ConsistencyConfig) -> Result<Verdict> {
    if inst.n > MAX_CLDM_QUBITS {
        return Err(HamlabError::DimensionBudget {
            needed: inst.n,
            budget: MAX_CLDM_QUBITS,
        });
    }
    if cfg.restarts == 0 || cfg.max_iter == 0 || cfg.window == 0 {
        return Err(HamlabError::InvalidParameter("search limits must be positive".into()));
    }
    let dim = 1usize << inst.n;
    let constraints = AffineConstraints::new(inst);
    let mut master = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut best_bound: f64 = 0.0;
    let mut best_residual = f64::INFINITY;
    let mut iterations = 0;

    let consistent = |sigma: CMatrix, best_bound: f64, iterations: usize| -> Result<Verdict> {
        let residual = inst.max_deviation(&sigma)?;
        Ok(Verdict {
            outcome: Consistency::Consistent,
            witness: Some(DensityMatrix::from_parts_unchecked(sigma, QubitLayout::free(inst.n))),
            max_violation: best_bound,
            best_residual: residual,
            iterations,
        })
    };

    for _ in 0..cfg.restarts {
        let mut x = linalg::random_density_matrix(dim, dim, &mut master);
        let mut window_start = f64::INFINITY;
        for iter in 1..=cfg.max_iter {
            iterations += 1;
            let a = constraints.project(&x);
            x = linalg::project_to_density(&a);
            let residual = inst.max_deviation(&x)?;
            best_residual = best_residual.min(residual);
            if residual <= cfg.tol {
                return consistent(x, best_bound, iterations);
            }
            if iter % cfg.window != 0 {
                continue;
            }
            for threshold in [1e-3, 1e-5, 1e-7, -1.0] {
                if let Some(candidate) = low_rank_polish(&constraints, &x, threshold, 30) {
                    let r = inst.max_deviation(&candidate)?;
                    best_residual = best_residual.min(r);
                    if r <= cfg.tol {
                        return consistent(candidate, best_bound, iterations);
                    }
                }
            }
            let stalled = residual > 0.99 * window_start;
            window_start = residual;
            if stalled && residual > inst.beta / 2.0 {
                best_bound = best_bound.max(separation_bound(inst, &x)?);
                if best_bound >= inst.beta / 2.0 {
                    return Ok(Verdict {
                        outcome: Consistency::Inconsistent,
                        witness: None,
                        max_violation: best_bound,
                        best_residual,
                        iterations,
                    });
                }
                break;
            }
        }
        best_bound = best_bound.max(separation_bound(inst, &x)?);
        if best_bound >= inst.beta / 2.0 {
            return Ok(Verdict {
                outcome: Consistency::Inconsistent,
                witness: None,
                max_violation: best_bound,
                best_residual,
                iterations,
            });
        }
    }
    Ok(Verdict {
        outcome: Consistency::Indeterminate,
        witness: None,
        max_violation: best_bound,
        best_residual,
        iterations,
    })
}

/// Black-box consistency decision used by the verifier.
pub trait ConsistencyOracle {
    fn decide(&self, inst: &CldmInstance) -> Result<Verdict>;
}

/// The alternating-projection search as an oracle.
#[derive(Clone, Copy, Debug, Default)]
pub struct ProjectionOracle {
    pub config: ConsistencyConfig,
}

impl ConsistencyOracle for ProjectionOracle {
    fn decide(&self, inst: &CldmInstance) -> Result<Verdict> {
        consistency_decide(inst, &self.config)
    }
}

// ---------------------------------------------------------------------------
// Separable local Hamiltonian proofs
// ---------------------------------------------------------------------------

/// Per-term classical marginals `(ρ^{A_i}, ρ^{B_i})`. `A_i` lists the
/// support qubits on side A in support order; an empty side is the 1×1
/// matrix `[1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SLHProof {
    pub marginals: Vec<(DensityMatrix, DensityMatrix)>,
}

impl SLHProof {
    /// Number of complex entries, `Σ_i 4^{|A_i|} + 4^{|B_i|}`.
    pub fn num_entries(&self) -> usize {
        self.marginals
            .iter()
            .map(|(a, b)| a.dim() * a.dim() + b.dim() * b.dim())
            .sum()
    }
}

/// Support qubits of `support` on each side, in support order.
pub fn split_support(inst: &SLHInstance, support: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let side_a = inst.partition().side_a();
    support.iter().copied().partition(|q| side_a.contains(q))
}

fn positions(qubits: &[usize], side: &[usize]) -> Vec<usize> {
    qubits
        .iter()
        .map(|q| side.iter().position(|s| s == q).expect("qubit lies on this side"))
        .collect()
}

fn scalar_state() -> DensityMatrix {
    DensityMatrix::from_parts_unchecked(CMatrix::from_element(1, 1, C64::new(1.0, 0.0)), QubitLayout::free(0))
}

fn reduce_or_scalar(rho: &DensityMatrix, keep: &[usize]) -> Result<DensityMatrix> {
    if keep.is_empty() {
        Ok(scalar_state())
    } else {
        partial_trace(rho, keep)
    }
}

/// Honest proof from states `ρ_A` (qubits ordered as `side_a`) and `ρ_B`.
pub fn honest_prover_from_sides(inst: &SLHInstance, rho_a: &DensityMatrix, rho_b: &DensityMatrix) -> Result<SLHProof> {
    let side_a = inst.partition().side_a();
    let side_b = inst.partition().side_b();
    if rho_a.num_qubits() != side_a.len() || rho_b.num_qubits() != side_b.len() {
        return Err(HamlabError::DimensionMismatch {
            expected: 1 << side_a.len(),
            actual: rho_a.dim(),
        });
    }
    let marginals = inst
        .terms()
        .iter()
        .map(|term| {
            let (ai, bi) = split_support(inst, &term.support);
            Ok((
                reduce_or_scalar(rho_a, &positions(&ai, side_a))?,
                reduce_or_scalar(rho_b, &positions(&bi, side_b))?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SLHProof { marginals })
}

/// Honest proof from a global product state `ρ_A ⊗ ρ_B` over the instance
/// register.
pub fn honest_prover(inst: &SLHInstance, product_state: &DensityMatrix) -> Result<SLHProof> {
    let side_a = inst.partition().side_a().to_vec();
    let side_b = inst.partition().side_b().to_vec();
    if product_state.num_qubits() != inst.n() {
        return Err(HamlabError::DimensionMismatch {
            expected: 1 << inst.n(),
            actual: product_state.dim(),
        });
    }
    let rho_a = reduce_or_scalar(product_state, &side_a)?;
    let rho_b = reduce_or_scalar(product_state, &side_b)?;
    // Rebuild ρ_A ⊗ ρ_B in (side_a, side_b) order and compare.
    let mut order = side_a.clone();
    order.extend(&side_b);
    let arranged = permute_qubits(product_state.matrix(), &order)?;
    let joined = rho_a.tensor(&rho_b)?;
    let defect = linalg::max_abs_diff(&arranged, joined.matrix());
    if defect > PRODUCT_TOL {
        return Err(HamlabError::NotProduct(defect));
    }
    honest_prover_from_sides(inst, &rho_a, &rho_b)
}

/// `β = (b − a)/(8m)`.
pub fn protocol_beta(inst: &SLHInstance) -> f64 {
    (inst.b() - inst.a()) / (8.0 * inst.terms().len().max(1) as f64)
}

/// Energy `Σ_i tr(H_i (ρ^{A_i} ⊗ ρ^{B_i}))` claimed by a proof.
pub fn proof_energy(inst: &SLHInstance, proof: &SLHProof) -> Result<f64> {
    check_proof_shape(inst, proof)?;
    let mut total = 0.0;
    for (term, (ra, rb)) in inst.terms().iter().zip(&proof.marginals) {
        let (ai, bi) = split_support(inst, &term.support);
        let joint = ra.matrix().kronecker(rb.matrix());
        let mut listed = ai.clone();
        listed.extend(&bi);
        let order: Vec<usize> = term
            .support
            .iter()
            .map(|q| listed.iter().position(|x| x == q).expect("support split covers every qubit"))
            .collect();
        let local = permute_qubits(&joint, &order)?;
        total += crate::operator::Operator::trace_with(&term.matrix, &local).re;
    }
    Ok(total)
}

fn check_proof_shape(inst: &SLHInstance, proof: &SLHProof) -> Result<()> {
    if proof.marginals.len() != inst.terms().len() {
        return Err(HamlabError::MalformedProof(format!(
            "proof has {} entries for {} terms",
            proof.marginals.len(),
            inst.terms().len()
        )));
    }
    for (i, (term, (ra, rb))) in inst.terms().iter().zip(&proof.marginals).enumerate() {
        let (ai, bi) = split_support(inst, &term.support);
        if ra.num_qubits() != ai.len() || rb.num_qubits() != bi.len() {
            return Err(HamlabError::MalformedProof(format!(
                "term {i}: expected {}+{} qubits, got {}+{}",
                ai.len(),
                bi.len(),
                ra.num_qubits(),
                rb.num_qubits()
            )));
        }
    }
    Ok(())
}

/// Consistency instance formed by one side's claimed marginals, with qubits
/// renumbered to positions within that side.
pub fn side_instance(inst: &SLHInstance, proof: &SLHProof, side_a: bool) -> Result<CldmInstance> {
    check_proof_shape(inst, proof)?;
    let side = if side_a { inst.partition().side_a() } else { inst.partition().side_b() };
    let mut marginals = Vec::new();
    let mut k = 0;
    for (term, (ra, rb)) in inst.terms().iter().zip(&proof.marginals) {
        let (ai, bi) = split_support(inst, &term.support);
        let (qubits, rho) = if side_a { (ai, ra) } else { (bi, rb) };
        if qubits.is_empty() {
            continue;
        }
        k = k.max(qubits.len());
        marginals.push((positions(&qubits, side), rho.clone()));
    }
    CldmInstance::new(side.len(), marginals, protocol_beta(inst), k.max(1))
}

#[derive(Clone, Debug, Serialize)]
pub struct SlhVerdict {
    pub accept: bool,
    pub energy: f64,
    pub threshold: f64,
    pub beta: f64,
    pub side_a: Consistency,
    pub side_b: Consistency,
}

/// Accepts iff both sides' marginals are consistent and the claimed energy
/// is below `(a + b)/2`. Indeterminate consistency verdicts reject.
pub fn slh_verifier(inst: &SLHInstance, proof: &SLHProof, consistency: &dyn ConsistencyOracle) -> Result<SlhVerdict> {
    let energy = proof_energy(inst, proof)?;
    let side_a = consistency.decide(&side_instance(inst, proof, true)?)?.outcome;
    let side_b = consistency.decide(&side_instance(inst, proof, false)?)?.outcome;
    let threshold = (inst.a() + inst.b()) / 2.0;
    Ok(SlhVerdict {
        accept: side_a == Consistency::Consistent && side_b == Consistency::Consistent && energy < threshold,
        energy,
        threshold,
        beta: protocol_beta(inst),
        side_a,
        side_b,
    })
}
