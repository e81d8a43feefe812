//! Row-sparse operators behind a row oracle, Hamiltonian evolution,
//! simulated phase estimation and the energy-verification tests built on it.

use std::f64::consts::TAU;
use std::fmt;
use std::sync::Arc;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::FftPlanner;

use crate::error::{HamlabError, Result};
use crate::linalg::{self, CMatrix, CVector, C64};
use crate::operator::{LocalTerm, Operator, SparseMatrix};
use crate::qstate::PureState;
use crate::DEFAULT_MAX_QUBITS;

/// Hermiticity tolerance for row oracles.
pub const ORACLE_HERMITIAN_TOL: f64 = 1e-10;
/// Slack on the `[0, 1]` spectrum requirement of verifier terms.
pub const SPECTRUM_TOL: f64 = 1e-9;

type RowFn = dyn Fn(usize) -> Vec<(usize, C64)> + Send + Sync;

/// Operator known only through `i -> [(j, A_ij)]`.
#[derive(Clone)]
pub struct RowSparseOperator {
    dim: usize,
    declared_sparsity: usize,
    oracle: Arc<RowFn>,
}

impl fmt::Debug for RowSparseOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RowSparseOperator")
            .field("dim", &self.dim)
            .field("declared_sparsity", &self.declared_sparsity)
            .finish_non_exhaustive()
    }
}

/// Inputs accepted by [`row_oracle_for_term`].
pub enum Term<'a> {
    Sparse(&'a SparseMatrix),
    Local(&'a LocalTerm),
}

impl<'a> From<&'a SparseMatrix> for Term<'a> {
    fn from(s: &'a SparseMatrix) -> Self {
        Term::Sparse(s)
    }
}

impl<'a> From<&'a LocalTerm> for Term<'a> {
    fn from(t: &'a LocalTerm) -> Self {
        Term::Local(t)
    }
}

/// Wraps a propagation term or a local term in a row oracle. The declared
/// sparsity is the exact maximum row length.
pub fn row_oracle_for_term<'a>(term: impl Into<Term<'a>>) -> Result<RowSparseOperator> {
    let sparse = match term.into() {
        Term::Sparse(s) => s.clone(),
        Term::Local(t) => t.to_sparse(),
    };
    let defect = sparse.hermiticity_defect();
    if defect > ORACLE_HERMITIAN_TOL {
        return Err(HamlabError::NotHermitian(defect));
    }
    let dim = sparse.dim();
    let declared_sparsity = sparse.max_row_nnz();
    let sparse = Arc::new(sparse);
    Ok(RowSparseOperator {
        dim,
        declared_sparsity,
        oracle: Arc::new(move |i| sparse.row(i).to_vec()),
    })
}

impl RowSparseOperator {
    /// Operator from an arbitrary oracle. Rows are not validated here; use
    /// [`RowSparseOperator::check`] for that.
    pub fn from_oracle(
        dim: usize,
        declared_sparsity: usize,
        oracle: impl Fn(usize) -> Vec<(usize, C64)> + Send + Sync + 'static,
    ) -> Self {
        Self {
            dim,
            declared_sparsity,
            oracle: Arc::new(oracle),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn declared_sparsity(&self) -> usize {
        self.declared_sparsity
    }

    pub fn row(&self, i: usize) -> Vec<(usize, C64)> {
        (self.oracle)(i)
    }

    /// Scans every row: lengths within the declared sparsity and each entry
    /// mirrored by its conjugate.
    pub fn check(&self) -> Result<()> {
        let rows: Vec<_> = (0..self.dim).map(|i| self.row(i)).collect();
        for (i, row) in rows.iter().enumerate() {
            if row.len() > self.declared_sparsity {
                return Err(HamlabError::InvalidParameter(format!(
                    "row {i} has {} entries, declared {}",
                    row.len(),
                    self.declared_sparsity
                )));
            }
            for &(j, v) in row {
                let mirror = rows[j]
                    .iter()
                    .find(|&&(c, _)| c == i)
                    .map(|&(_, w)| w)
                    .unwrap_or_default();
                let defect = (v - mirror.conj()).norm();
                if defect > ORACLE_HERMITIAN_TOL {
                    return Err(HamlabError::NotHermitian(defect));
                }
            }
        }
        Ok(())
    }

    pub fn to_dense(&self) -> CMatrix {
        let mut m = CMatrix::zeros(self.dim, self.dim);
        for i in 0..self.dim {
            for (j, v) in self.row(i) {
                m[(i, j)] += v;
            }
        }
        m
    }
}

impl Operator for RowSparseOperator {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, v: &CVector) -> CVector {
        CVector::from_fn(self.dim, |i, _| {
            self.row(i).into_iter().map(|(j, a)| a * v[j]).sum()
        })
    }

    fn trace_with(&self, rho: &CMatrix) -> C64 {
        (0..self.dim)
            .flat_map(|i| self.row(i).into_iter().map(move |(j, a)| (i, j, a)))
            .map(|(i, j, a)| a * rho[(j, i)])
            .sum()
    }
}

// ---------------------------------------------------------------------------
// Evolution
// ---------------------------------------------------------------------------

/// A unitary acting on states of a fixed dimension.
#[derive(Clone, Debug)]
pub struct UnitaryAction {
    matrix: CMatrix,
}

impl UnitaryAction {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        let defect = linalg::unitarity_defect(&matrix);
        if defect > 1e-9 {
            return Err(HamlabError::NotUnitary(defect));
        }
        Ok(Self { matrix })
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn apply(&self, state: &PureState) -> Result<PureState> {
        if state.dim() != self.dim() {
            return Err(HamlabError::DimensionMismatch {
                expected: self.dim(),
                actual: state.dim(),
            });
        }
        PureState::normalized(&self.matrix * state.amplitudes(), state.layout().clone())
    }
}

/// `exp(−iH·time)` to accuracy `alpha`. The dense spectral exponential is
/// exact up to rounding, so any positive `alpha` is honored.
pub fn evolve(h: &RowSparseOperator, time: f64, alpha: f64) -> Result<UnitaryAction> {
    if !(alpha > 0.0) {
        return Err(HamlabError::InvalidParameter(format!(
            "accuracy must be positive, got {alpha}"
        )));
    }
    let budget = 1usize << DEFAULT_MAX_QUBITS;
    if h.dim() > budget {
        return Err(HamlabError::DimensionBudget {
            needed: h.dim().trailing_zeros() as usize,
            budget: DEFAULT_MAX_QUBITS,
        });
    }
    let dense = h.to_dense();
    let defect = linalg::hermiticity_defect(&dense);
    if defect > ORACLE_HERMITIAN_TOL {
        return Err(HamlabError::NotHermitian(defect));
    }
    Ok(UnitaryAction {
        matrix: linalg::expm_hermitian(&dense, time),
    })
}

// ---------------------------------------------------------------------------
// Phase estimation
// ---------------------------------------------------------------------------

/// Smallest `k ≥ 0` with `2^k ≥ x`.
fn ceil_log2(x: f64) -> usize {
    let mut k = 0usize;
    // A relative slack keeps exact powers of two from rounding up.
    while ((1u64 << k) as f64) < x * (1.0 - 1e-12) {
        k += 1;
    }
    k
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhaseEstimateConfig {
    epsilon: f64,
    delta: f64,
    t: usize,
}

impl PhaseEstimateConfig {
    /// Register size `ceil(log2(1/δ)) + ceil(log2(2 + 1/(2ε)))`.
    pub fn new(epsilon: f64, delta: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(HamlabError::InvalidParameter(format!(
                "failure probability must lie in (0, 1), got {epsilon}"
            )));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(HamlabError::InvalidParameter(format!(
                "precision must lie in (0, 1), got {delta}"
            )));
        }
        let t = ceil_log2(1.0 / delta) + ceil_log2(2.0 + 1.0 / (2.0 * epsilon));
        Ok(Self { epsilon, delta, t })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Number of phase-register qubits.
    pub fn t(&self) -> usize {
        self.t
    }

    pub fn outcomes(&self) -> usize {
        1 << self.t
    }

    /// Phase in `[0, 2π)` reported for register outcome `m`.
    pub fn phase_of(&self, m: usize) -> f64 {
        TAU * m as f64 / self.outcomes() as f64
    }
}

/// Distance between two phases on the circle.
pub fn circular_distance(x: f64, y: f64) -> f64 {
    let d = (x - y).rem_euclid(TAU);
    d.min(TAU - d)
}

/// Exact outcome distribution of the phase register.
///
/// The register ends in `Σ_m |m⟩ ⊗ a_m` with
/// `a_m = 2^{−t} Σ_k e^{−2πikm/2^t} U^k|ψ⟩`, so `Pr[m] = ‖a_m‖²`.
pub fn phase_distribution(u: &UnitaryAction, state: &PureState, cfg: &PhaseEstimateConfig) -> Result<Vec<f64>> {
    if state.dim() != u.dim() {
        return Err(HamlabError::DimensionMismatch {
            expected: u.dim(),
            actual: state.dim(),
        });
    }
    let big_t = cfg.outcomes();
    let dim = u.dim();
    let mut powers = Vec::with_capacity(big_t);
    let mut current = state.amplitudes().clone();
    for _ in 0..big_t {
        let next = u.matrix() * &current;
        powers.push(current);
        current = next;
    }
    let fft = FftPlanner::<f64>::new().plan_fft_forward(big_t);
    let mut probs = vec![0.0; big_t];
    let mut buffer = vec![C64::new(0.0, 0.0); big_t];
    for x in 0..dim {
        for (k, slot) in buffer.iter_mut().enumerate() {
            *slot = powers[k][x];
        }
        fft.process(&mut buffer);
        for (m, a) in buffer.iter().enumerate() {
            probs[m] += a.norm_sqr();
        }
    }
    let scale = (big_t as f64).powi(2);
    for p in &mut probs {
        *p /= scale;
    }
    Ok(probs)
}

/// Sampler over a precomputed phase distribution.
#[derive(Clone, Debug)]
pub struct PhaseEstimator {
    cfg: PhaseEstimateConfig,
    probabilities: Vec<f64>,
    sampler: WeightedIndex<f64>,
}

impl PhaseEstimator {
    pub fn new(u: &UnitaryAction, state: &PureState, cfg: PhaseEstimateConfig) -> Result<Self> {
        let probabilities = phase_distribution(u, state, &cfg)?;
        let sampler = WeightedIndex::new(&probabilities)
            .map_err(|e| HamlabError::InvalidParameter(format!("phase distribution: {e}")))?;
        Ok(Self {
            cfg,
            probabilities,
            sampler,
        })
    }

    pub fn config(&self) -> &PhaseEstimateConfig {
        &self.cfg
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    /// Exact probability that the output lies within δ of `phase`.
    pub fn hit_probability(&self, phase: f64) -> f64 {
        self.probabilities
            .iter()
            .enumerate()
            .filter(|(m, _)| circular_distance(self.cfg.phase_of(*m), phase) <= self.cfg.delta)
            .map(|(_, p)| p)
            .sum()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.cfg.phase_of(self.sampler.sample(rng))
    }
}

/// One phase-estimation run with a seeded generator.
pub fn phase_estimate(
    u: &UnitaryAction,
    state: &PureState,
    cfg: PhaseEstimateConfig,
    rng_seed: u64,
) -> Result<f64> {
    let est = PhaseEstimator::new(u, state, cfg)?;
    Ok(est.sample(&mut ChaCha8Rng::seed_from_u64(rng_seed)))
}

// ---------------------------------------------------------------------------
// Energy verifiers
// ---------------------------------------------------------------------------

/// Probability of rejecting on estimated phase `phase`: phases above π are
/// read as negative, then clamped to `[0, 1]`.
pub fn reject_probability_for_phase(phase: f64) -> f64 {
    let signed = if phase > std::f64::consts::PI { phase - TAU } else { phase };
    signed.clamp(0.0, 1.0)
}

/// Single-term test: estimate the phase of `exp(iH_j)` on `ψ` and reject
/// with probability equal to the estimate.
#[derive(Clone, Debug)]
pub struct QjVerifier {
    estimator: PhaseEstimator,
    reject_probability: f64,
}

impl QjVerifier {
    pub fn new(h_j: &RowSparseOperator, state: &PureState, a: f64, b: f64) -> Result<Self> {
        if !(b > a) {
            return Err(HamlabError::InvalidParameter(format!(
                "thresholds need b > a, got a = {a}, b = {b}"
            )));
        }
        let precision = (b - a) / 6.0;
        let cfg = PhaseEstimateConfig::new(precision, precision)?;
        let dense = h_j.to_dense();
        let spectrum = linalg::eigenvalues(&dense);
        let (lo, hi) = (spectrum[0], spectrum[spectrum.len() - 1]);
        if lo < -SPECTRUM_TOL || hi > 1.0 + SPECTRUM_TOL {
            return Err(HamlabError::SpectrumOutOfRange(format!(
                "spectrum [{lo:.3e}, {hi:.3e}] leaves [0, 1]"
            )));
        }
        let u = evolve(h_j, -1.0, f64::EPSILON)?;
        let estimator = PhaseEstimator::new(&u, state, cfg)?;
        let reject_probability = estimator
            .probabilities()
            .iter()
            .enumerate()
            .map(|(m, p)| p * reject_probability_for_phase(cfg.phase_of(m)))
            .sum::<f64>()
            .clamp(0.0, 1.0);
        Ok(Self {
            estimator,
            reject_probability,
        })
    }

    pub fn config(&self) -> &PhaseEstimateConfig {
        self.estimator.config()
    }

    /// Exact rejection probability of one run.
    pub fn reject_probability(&self) -> f64 {
        self.reject_probability
    }

    /// One run; `true` means accept.
    pub fn run<R: Rng + ?Sized>(&self, rng: &mut R) -> bool {
        let phase = self.estimator.sample(rng);
        !rng.random_bool(reject_probability_for_phase(phase))
    }
}

pub fn qj_verifier(h_j: &RowSparseOperator, state: &PureState, a: f64, b: f64, rng_seed: u64) -> Result<bool> {
    let v = QjVerifier::new(h_j, state, a, b)?;
    Ok(v.run(&mut ChaCha8Rng::seed_from_u64(rng_seed)))
}

/// Picks a term uniformly at random and runs its single-term test.
#[derive(Clone, Debug)]
pub struct QVerifier {
    tests: Vec<QjVerifier>,
}

impl QVerifier {
    pub fn new(terms: &[RowSparseOperator], state: &PureState, a: f64, b: f64) -> Result<Self> {
        if terms.is_empty() {
            return Err(HamlabError::InvalidParameter("no Hamiltonian terms".into()));
        }
        let tests = terms
            .iter()
            .map(|h| QjVerifier::new(h, state, a, b))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { tests })
    }

    pub fn terms(&self) -> &[QjVerifier] {
        &self.tests
    }

    pub fn accept_probability(&self) -> f64 {
        let mean_reject: f64 =
            self.tests.iter().map(QjVerifier::reject_probability).sum::<f64>() / self.tests.len() as f64;
        1.0 - mean_reject
    }

    pub fn run<R: Rng + ?Sized>(&self, rng: &mut R) -> bool {
        let j = rng.random_range(0..self.tests.len());
        self.tests[j].run(rng)
    }
}

pub fn q_verifier(
    terms: &[RowSparseOperator],
    state: &PureState,
    a: f64,
    b: f64,
    rng_seed: u64,
) -> Result<bool> {
    let v = QVerifier::new(terms, state, a, b)?;
    Ok(v.run(&mut ChaCha8Rng::seed_from_u64(rng_seed)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::ONE;

    #[test]
    fn register_size_formula() {
        let cfg = PhaseEstimateConfig::new(0.1, 0.1).unwrap();
        // ceil(log2 10) = 4, ceil(log2 7) = 3
        assert_eq!(cfg.t(), 7);
        let cfg = PhaseEstimateConfig::new(0.25, 0.5).unwrap();
        // ceil(log2 2) = 1, ceil(log2 4) = 2
        assert_eq!(cfg.t(), 3);
        assert!(PhaseEstimateConfig::new(0.0, 0.1).is_err());
        assert!(PhaseEstimateConfig::new(0.1, 1.0).is_err());
    }

    #[test]
    fn identity_oracle_has_one_entry_per_row() {
        let op = row_oracle_for_term(&SparseMatrix::identity(8)).unwrap();
        assert_eq!(op.declared_sparsity(), 1);
        op.check().unwrap();
    }

    #[test]
    fn non_hermitian_term_is_rejected() {
        let s = SparseMatrix::from_triplets(2, vec![(0, 1, ONE)]);
        assert!(matches!(row_oracle_for_term(&s), Err(HamlabError::NotHermitian(_))));
    }

    #[test]
    fn zero_hamiltonian_evolves_trivially() {
        let op = row_oracle_for_term(&SparseMatrix::zeros(4)).unwrap();
        let u = evolve(&op, 2.0, 1e-12).unwrap();
        assert!(linalg::max_abs_diff(u.matrix(), &linalg::identity(4)) < 1e-15);
        assert!(evolve(&op, 1.0, 0.0).is_err());
    }

    #[test]
    fn exact_phase_is_read_with_certainty() {
        let cfg = PhaseEstimateConfig::new(0.25, 0.5).unwrap();
        let phase = TAU * 3.0 / 8.0;
        let u = UnitaryAction::new(CMatrix::from_element(1, 1, C64::from_polar(1.0, phase))).unwrap();
        let probs = phase_distribution(&u, &PureState::from_amplitudes(CVector::from_element(1, ONE)).unwrap(), &cfg).unwrap();
        assert!((probs[3] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn reject_probability_mapping() {
        assert_eq!(reject_probability_for_phase(0.3), 0.3);
        assert_eq!(reject_probability_for_phase(2.0), 1.0);
        assert_eq!(reject_probability_for_phase(TAU - 0.1), 0.0);
    }
}
