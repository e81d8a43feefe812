//! Ground-state and product-state energy minimization, and the three-valued
//! decision procedure for separable local Hamiltonian instances.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{HamlabError, Result};
use crate::linalg::{self, CMatrix, CVector, C64, ZERO};
use crate::operator::{sum_terms_dense, LocalTerm};
use crate::qstate::{product_state_along_cut, Bipartition, PureState, QubitLayout};

/// Hermiticity tolerance for Hamiltonians handed to the minimizers.
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Slack on `0 ⪯ H_i ⪯ I`.
pub const TERM_BOUND_TOL: f64 = 1e-9;
/// Tolerance used by [`decide_slh`] when comparing against thresholds.
pub const DECISION_TOL: f64 = 1e-9;
/// Default number of random restarts of the alternating minimizer.
pub const DEFAULT_RESTARTS: usize = 50;
/// Default convergence tolerance of the alternating minimizer.
pub const DEFAULT_TOL: f64 = 1e-12;
/// Sweep cap per restart.
pub const MAX_SWEEPS: usize = 1000;

fn check_hermitian(h: &CMatrix) -> Result<()> {
    let defect = linalg::hermiticity_defect(h);
    if defect > HERMITIAN_TOL {
        return Err(HamlabError::NotHermitian(defect));
    }
    Ok(())
}

/// Smallest eigenvalue and a normalized eigenvector.
pub fn ground_energy(h: &CMatrix) -> Result<(f64, PureState)> {
    check_hermitian(h)?;
    let e = linalg::eigh(h);
    let v = e.vector(0);
    let state = match PureState::from_amplitudes(v.clone()) {
        Ok(s) => s,
        Err(_) => PureState::normalized(v, QubitLayout::free(h.nrows().trailing_zeros() as usize))?,
    };
    Ok((e.min(), state))
}

// ---------------------------------------------------------------------------
// Product-state search
// ---------------------------------------------------------------------------

/// `H` reindexed as `H[(a, b), (a', b')]` along a cut.
#[derive(Clone, Debug)]
struct CutHamiltonian {
    da: usize,
    db: usize,
    /// Row-major over `(a, b)` pairs: entry `((a*db+b), (a'*db+b'))`.
    m: CMatrix,
}

impl CutHamiltonian {
    fn new(h: &CMatrix, cut: &Bipartition) -> Result<Self> {
        let n = cut.total_qubits();
        if h.nrows() != 1 << n || h.ncols() != 1 << n {
            return Err(HamlabError::DimensionMismatch {
                expected: 1 << n,
                actual: h.nrows(),
            });
        }
        let table = cut.index_table();
        let da = table.len();
        let db = table[0].len();
        let flat: Vec<usize> = table.iter().flatten().copied().collect();
        let m = CMatrix::from_fn(da * db, da * db, |i, j| h[(flat[i], flat[j])]);
        Ok(Self { da, db, m })
    }

    /// `⟨χ_B| H |χ_B⟩` as an operator on side A.
    fn effective_a(&self, chi_b: &CVector) -> CMatrix {
        let (da, db) = (self.da, self.db);
        CMatrix::from_fn(da, da, |a, a2| {
            let mut acc = ZERO;
            for b in 0..db {
                let cb = chi_b[b].conj();
                if cb == ZERO {
                    continue;
                }
                for b2 in 0..db {
                    acc += cb * self.m[(a * db + b, a2 * db + b2)] * chi_b[b2];
                }
            }
            acc
        })
    }

    /// `⟨χ_A| H |χ_A⟩` as an operator on side B.
    fn effective_b(&self, chi_a: &CVector) -> CMatrix {
        let (da, db) = (self.da, self.db);
        CMatrix::from_fn(db, db, |b, b2| {
            let mut acc = ZERO;
            for a in 0..da {
                let ca = chi_a[a].conj();
                if ca == ZERO {
                    continue;
                }
                for a2 in 0..da {
                    acc += ca * self.m[(a * db + b, a2 * db + b2)] * chi_a[a2];
                }
            }
            acc
        })
    }

    fn energy(&self, chi_a: &CVector, chi_b: &CVector) -> f64 {
        let eff = self.effective_b(chi_a);
        chi_b.dotc(&(eff * chi_b)).re
    }
}

/// Lowest eigenpair; ties resolve to the lowest index of the sorted basis.
fn lowest(m: &CMatrix) -> (f64, CVector) {
    let e = linalg::eigh(m);
    let v = e.vector(0);
    let n = v.norm();
    (e.min(), v.unscale(n))
}

#[derive(Clone, Debug)]
pub struct ProductMinResult {
    /// `⟨χ_A⊗χ_B|H|χ_A⊗χ_B⟩` of the returned states.
    pub value: f64,
    pub left_state: PureState,
    pub right_state: PureState,
    /// Sweeps performed by the best restart.
    pub iterations: usize,
    pub restarts_used: usize,
    pub converged: bool,
    /// Energy after every half-sweep of the best restart.
    pub history: Vec<f64>,
    /// Final energy of every restart, in restart order.
    pub restart_values: Vec<f64>,
}

impl ProductMinResult {
    /// `χ_A ⊗ χ_B` embedded in the full register.
    pub fn product_state(&self, cut: &Bipartition) -> Result<PureState> {
        let v = product_state_along_cut(self.left_state.amplitudes(), self.right_state.amplitudes(), cut)?;
        PureState::normalized(v, QubitLayout::free(cut.total_qubits()))
    }
}

struct RestartOutcome {
    value: f64,
    chi_a: CVector,
    chi_b: CVector,
    sweeps: usize,
    converged: bool,
    history: Vec<f64>,
}

fn alternate(cut_h: &CutHamiltonian, mut chi_b: CVector, tol: f64) -> RestartOutcome {
    let mut history = Vec::new();
    let mut chi_a = CVector::zeros(cut_h.da);
    let mut previous = f64::INFINITY;
    let mut converged = false;
    let mut sweeps = 0;
    while sweeps < MAX_SWEEPS {
        sweeps += 1;
        let (ea, va) = lowest(&cut_h.effective_a(&chi_b));
        chi_a = va;
        history.push(ea);
        let (eb, vb) = lowest(&cut_h.effective_b(&chi_a));
        chi_b = vb;
        history.push(eb);
        if (previous - eb).abs() <= tol {
            converged = true;
            break;
        }
        previous = eb;
    }
    RestartOutcome {
        value: cut_h.energy(&chi_a, &chi_b),
        chi_a,
        chi_b,
        sweeps,
        converged,
        history,
    }
}

/// Best product state found by alternating minimization from `restarts`
/// Haar-random right states. Each restart has its own seed drawn from
/// `rng_seed`, so results do not depend on scheduling.
pub fn min_product_energy(
    h: &CMatrix,
    cut: &Bipartition,
    restarts: usize,
    tol: f64,
    rng_seed: u64,
) -> Result<ProductMinResult> {
    if restarts < 1 {
        return Err(HamlabError::InvalidParameter("restarts must be at least 1".into()));
    }
    if !(tol > 0.0) {
        return Err(HamlabError::InvalidParameter(format!("tolerance must be positive, got {tol}")));
    }
    check_hermitian(h)?;
    let cut_h = CutHamiltonian::new(h, cut)?;
    let mut master = ChaCha8Rng::seed_from_u64(rng_seed);
    let seeds: Vec<u64> = (0..restarts).map(|_| master.random()).collect();
    let outcomes: Vec<RestartOutcome> = seeds
        .par_iter()
        .map(|&s| {
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            let start = linalg::random_unit_vector(cut_h.db, &mut rng);
            alternate(&cut_h, start, tol)
        })
        .collect();
    let restart_values: Vec<f64> = outcomes.iter().map(|o| o.value).collect();
    let best = outcomes
        .into_iter()
        .enumerate()
        .min_by(|(i, x), (j, y)| x.value.total_cmp(&y.value).then(i.cmp(j)))
        .map(|(_, o)| o)
        .expect("at least one restart");
    Ok(ProductMinResult {
        value: best.value,
        left_state: PureState::from_parts_unchecked(best.chi_a, QubitLayout::free(cut.side_a().len())),
        right_state: PureState::from_parts_unchecked(best.chi_b, QubitLayout::free(cut.side_b().len())),
        iterations: best.sweeps,
        restarts_used: restarts,
        converged: best.converged,
        history: best.history,
        restart_values,
    })
}

// ---------------------------------------------------------------------------
// Grid oracle
// ---------------------------------------------------------------------------

/// Angles of a pure state on one or two qubits. One qubit: (θ, φ).
/// Two qubits: three amplitude angles in `[0, π/2]` and three phases.
fn parametrized_state(qubits: usize, p: &[f64]) -> CVector {
    match qubits {
        0 => CVector::from_element(1, C64::new(1.0, 0.0)),
        1 => CVector::from_vec(vec![
            C64::new((p[0] / 2.0).cos(), 0.0),
            C64::from_polar((p[0] / 2.0).sin(), p[1]),
        ]),
        2 => {
            let (s1, s2) = (p[0].sin(), p[1].sin());
            CVector::from_vec(vec![
                C64::new(p[0].cos(), 0.0),
                C64::from_polar(s1 * p[1].cos(), p[3]),
                C64::from_polar(s1 * s2 * p[2].cos(), p[4]),
                C64::from_polar(s1 * s2 * p[2].sin(), p[5]),
            ])
        }
        _ => unreachable!("grid oracle handles at most two qubits per side"),
    }
}

fn parameter_ranges(qubits: usize) -> Vec<(f64, f64)> {
    use std::f64::consts::{FRAC_PI_2, PI, TAU};
    match qubits {
        0 => vec![],
        1 => vec![(0.0, PI), (0.0, TAU)],
        _ => vec![
            (0.0, FRAC_PI_2),
            (0.0, FRAC_PI_2),
            (0.0, FRAC_PI_2),
            (0.0, TAU),
            (0.0, TAU),
            (0.0, TAU),
        ],
    }
}

/// Product minimum by exhaustive search: the smaller side is scanned on a
/// grid of `grid_resolution` points per angle (twice that for azimuthal
/// angles of a single qubit), the other side is minimized exactly, and the
/// best grid points are refined by a shrinking pattern search.
pub fn brute_force_product_min(h: &CMatrix, cut: &Bipartition, grid_resolution: usize) -> Result<f64> {
    let (na, nb) = (cut.side_a().len(), cut.side_b().len());
    if na > 2 || nb > 2 {
        return Err(HamlabError::InvalidParameter(format!(
            "grid oracle needs at most two qubits per side, got {na}+{nb}"
        )));
    }
    if grid_resolution < 2 {
        return Err(HamlabError::InvalidParameter("grid resolution must be at least 2".into()));
    }
    check_hermitian(h)?;
    let cut_h = CutHamiltonian::new(h, cut)?;
    let scan_a = na <= nb;
    let qubits = if scan_a { na } else { nb };
    let objective = |p: &[f64]| -> f64 {
        let chi = parametrized_state(qubits, p);
        let eff = if scan_a { cut_h.effective_b(&chi) } else { cut_h.effective_a(&chi) };
        linalg::eigh(&eff).min()
    };
    let ranges = parameter_ranges(qubits);
    if ranges.is_empty() {
        return Ok(objective(&[]));
    }

    let axes: Vec<Vec<f64>> = ranges
        .iter()
        .enumerate()
        .map(|(k, &(lo, hi))| {
            let azimuth = qubits == 1 && k == 1;
            let points = if azimuth { 2 * grid_resolution } else { grid_resolution + 1 };
            let step = if azimuth { (hi - lo) / points as f64 } else { (hi - lo) / (points - 1) as f64 };
            (0..points).map(|i| lo + step * i as f64).collect()
        })
        .collect();
    let total: usize = axes.iter().map(Vec::len).product();
    let mut scored: Vec<(f64, Vec<f64>)> = (0..total)
        .into_par_iter()
        .map(|mut idx| {
            let p: Vec<f64> = axes
                .iter()
                .map(|axis| {
                    let v = axis[idx % axis.len()];
                    idx /= axis.len();
                    v
                })
                .collect();
            (objective(&p), p)
        })
        .collect();
    scored.sort_by(|x, y| x.0.total_cmp(&y.0));

    let spacing: Vec<f64> = axes.iter().map(|a| a[1] - a[0]).collect();
    let refined = scored
        .iter()
        .take(8)
        .map(|(value, p)| pattern_search(&objective, p.clone(), *value, &spacing))
        .fold(scored[0].0, f64::min);
    Ok(refined)
}

/// Coordinate pattern search with step halving down to 1e-10 radians.
fn pattern_search(f: &impl Fn(&[f64]) -> f64, mut p: Vec<f64>, mut best: f64, spacing: &[f64]) -> f64 {
    let mut steps: Vec<f64> = spacing.to_vec();
    while steps.iter().any(|&s| s > 1e-10) {
        let mut improved = false;
        for k in 0..p.len() {
            for dir in [-1.0, 1.0] {
                let mut q = p.clone();
                q[k] += dir * steps[k];
                let v = f(&q);
                if v < best {
                    best = v;
                    p = q;
                    improved = true;
                }
            }
        }
        if !improved {
            for s in &mut steps {
                *s *= 0.5;
            }
        }
    }
    best
}

// ---------------------------------------------------------------------------
// Instances and decisions
// ---------------------------------------------------------------------------

/// Separable local Hamiltonian instance: `H = Σ_i H_i` with `0 ⪯ H_i ⪯ I`,
/// a bipartition and thresholds `a < b`.
#[derive(Clone, Debug)]
pub struct SLHInstance {
    n: usize,
    terms: Vec<LocalTerm>,
    partition: Bipartition,
    a: f64,
    b: f64,
}

impl SLHInstance {
    pub fn new(n: usize, terms: Vec<LocalTerm>, partition: Bipartition, a: f64, b: f64) -> Result<Self> {
        if !(b > a) {
            return Err(HamlabError::InvalidParameter(format!(
                "thresholds need b > a, got a = {a}, b = {b}"
            )));
        }
        if partition.total_qubits() != n {
            return Err(HamlabError::InvalidBipartition(format!(
                "partition covers {} qubits, instance has {n}",
                partition.total_qubits()
            )));
        }
        for (i, term) in terms.iter().enumerate() {
            if term.n != n {
                return Err(HamlabError::MalformedInstance(format!(
                    "term {i} is defined on {} qubits, instance has {n}",
                    term.n
                )));
            }
            check_hermitian(&term.matrix)?;
            let e = linalg::eigenvalues(&term.matrix);
            let (lo, hi) = (e[0], e[e.len() - 1]);
            if lo < -TERM_BOUND_TOL || hi > 1.0 + TERM_BOUND_TOL {
                return Err(HamlabError::SpectrumOutOfRange(format!(
                    "term {i} has spectrum [{lo:.3e}, {hi:.3e}] outside [0, 1]"
                )));
            }
        }
        Ok(Self {
            n,
            terms,
            partition,
            a,
            b,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn terms(&self) -> &[LocalTerm] {
        &self.terms
    }

    pub fn partition(&self) -> &Bipartition {
        &self.partition
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn hamiltonian(&self) -> CMatrix {
        sum_terms_dense(self.n, &self.terms)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SlhOutcome {
    Yes,
    No,
    Indeterminate,
}

impl SlhOutcome {
    pub fn as_str(&self) -> &'static str {
        match self {
            SlhOutcome::Yes => "yes",
            SlhOutcome::No => "no",
            SlhOutcome::Indeterminate => "indeterminate",
        }
    }
}

#[derive(Clone, Debug)]
pub struct SlhDecision {
    pub outcome: SlhOutcome,
    /// Upper bound on the product minimum from the alternating search.
    pub product_upper: f64,
    /// Global minimum; a lower bound on the product minimum.
    pub global_min: f64,
    /// Grid-oracle value when both sides have at most two qubits.
    pub exhaustive: Option<f64>,
}

/// Grid resolution used by [`decide_slh`] for a scanned side of `qubits`.
fn decision_grid(qubits: usize) -> usize {
    if qubits <= 1 {
        90
    } else {
        6
    }
}

pub fn decide_slh(inst: &SLHInstance, restarts: usize, rng_seed: u64) -> Result<SlhDecision> {
    let h = inst.hamiltonian();
    let cut = inst.partition();
    let product = min_product_energy(&h, cut, restarts, DEFAULT_TOL, rng_seed)?;
    let (global_min, _) = ground_energy(&h)?;
    let (na, nb) = (cut.side_a().len(), cut.side_b().len());
    let exhaustive = if na <= 2 && nb <= 2 {
        Some(brute_force_product_min(&h, cut, decision_grid(na.min(nb)))?)
    } else {
        None
    };
    let outcome = if product.value <= inst.a() + DECISION_TOL {
        SlhOutcome::Yes
    } else if global_min >= inst.b() - DECISION_TOL
        || exhaustive.is_some_and(|v| v >= inst.b() - DECISION_TOL)
    {
        SlhOutcome::No
    } else {
        SlhOutcome::Indeterminate
    };
    Ok(SlhDecision {
        outcome,
        product_upper: product.value,
        global_min,
        exhaustive,
    })
}

/// Two-qubit SWAP.
pub fn swap_matrix() -> CMatrix {
    let mut m = CMatrix::zeros(4, 4);
    for (i, j) in [(0, 0), (1, 2), (2, 1), (3, 3)] {
        m[(i, j)] = C64::new(1.0, 0.0);
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_ground_energy() {
        let h = CMatrix::from_diagonal(&CVector::from_vec(vec![
            C64::new(0.4, 0.0),
            C64::new(-0.2, 0.0),
            C64::new(1.0, 0.0),
            C64::new(0.0, 0.0),
        ]));
        let (e, v) = ground_energy(&h).unwrap();
        assert_eq!(e, -0.2);
        assert!((v.amplitudes()[1].norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn swap_product_minimum_is_zero() {
        let cut = Bipartition::contiguous(1, 2).unwrap();
        let r = min_product_energy(&swap_matrix(), &cut, 10, 1e-12, 1).unwrap();
        assert!(r.value.abs() < 1e-9);
        let (g, _) = ground_energy(&swap_matrix()).unwrap();
        assert!((g + 1.0).abs() < 1e-12);
        let grid = brute_force_product_min(&swap_matrix(), &cut, 180).unwrap();
        assert!(grid.abs() < 1e-6);
    }

    #[test]
    fn identity_grid_minimum_is_one() {
        let cut = Bipartition::contiguous(1, 2).unwrap();
        let v = brute_force_product_min(&linalg::identity(4), &cut, 10).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn grid_oracle_rejects_wide_sides() {
        let cut = Bipartition::contiguous(3, 4).unwrap();
        assert!(brute_force_product_min(&linalg::identity(16), &cut, 4).is_err());
    }

    #[test]
    fn restarts_and_tol_are_validated() {
        let cut = Bipartition::contiguous(1, 2).unwrap();
        assert!(min_product_energy(&swap_matrix(), &cut, 0, 1e-9, 0).is_err());
        assert!(min_product_energy(&swap_matrix(), &cut, 1, 0.0, 0).is_err());
    }

    #[test]
    fn alternating_history_never_increases() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let h = linalg::random_hermitian(16, &mut rng);
        let cut = Bipartition::contiguous(2, 4).unwrap();
        let r = min_product_energy(&h, &cut, 5, 1e-12, 9).unwrap();
        for w in r.history.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
        let psi = r.product_state(&cut).unwrap();
        let direct = psi.amplitudes().dotc(&(&h * psi.amplitudes())).re;
        assert!((direct - r.value).abs() < 1e-10);
    }
}
