//! End-to-end property checks run by the `acceptance` test target and by
//! `hamlab selftest`.
//!
//! Every criterion is deterministic for a given seed and returns a JSON
//! record with its numbers, so failures can be inspected without rerunning.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::circuit::{hm_wrap, product_test_circuit, random_circuit, VerificationCircuit};
use crate::cldm::{
    self, honest_prover_from_sides, reduce_all, slh_verifier, CldmInstance, Consistency, ConsistencyConfig,
    ProjectionOracle, SLHProof,
};
use crate::error::{HamlabError, Result};
use crate::kitaev::{self, compile, history_state, propagation_term, ClockEncoding};
use crate::linalg::{self, CMatrix, CVector, C64, ONE, ZERO};
use crate::operator::{LocalTerm, Operator, SparseMatrix};
use crate::optimize::{self, brute_force_product_min, ground_energy, min_product_energy, SLHInstance};
use crate::qstate::{max_product_overlap, qubit_bit, Bipartition, DensityMatrix, PureState, QubitLayout, Tensor};
use crate::sparse_sim::{circular_distance, row_oracle_for_term, PhaseEstimateConfig, PhaseEstimator, QjVerifier, UnitaryAction};
use crate::spectral::{self, extract_left_state, history_subspace, step_three_bound, verify_clock_angle, verify_geometric_bound};

/// Slack allowed on inequalities that hold exactly in exact arithmetic.
pub const SLACK: f64 = 1e-9;

#[derive(Clone, Copy, Debug)]
pub struct AcceptanceConfig {
    pub seed: u64,
    /// Restarts for alternating product minimization.
    pub restarts: usize,
}

impl Default for AcceptanceConfig {
    fn default() -> Self {
        Self {
            seed: 20_240_601,
            restarts: optimize::DEFAULT_RESTARTS,
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct CriterionInfo {
    pub id: u32,
    pub slug: &'static str,
    pub tags: &'static [&'static str],
}

#[derive(Clone, Debug, Serialize)]
pub struct CriterionResult {
    pub id: u32,
    pub slug: &'static str,
    pub tags: &'static [&'static str],
    pub passed: bool,
    pub seconds: f64,
    pub details: Value,
}

impl CriterionResult {
    /// `PASS  5 clock-angle ...` style summary line.
    pub fn line(&self) -> String {
        format!(
            "{} {:>2} {:<22} {:.2}s",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.slug,
            self.seconds
        )
    }
}

pub const CRITERIA: [CriterionInfo; 12] = [
    CriterionInfo { id: 1, slug: "history-kernel", tags: &["kitaev", "history"] },
    CriterionInfo { id: 2, slug: "energy-identity", tags: &["kitaev", "history"] },
    CriterionInfo { id: 3, slug: "sparsity", tags: &["kitaev", "circuit"] },
    CriterionInfo { id: 4, slug: "separability", tags: &["kitaev", "circuit", "history"] },
    CriterionInfo { id: 5, slug: "clock-angle", tags: &["spectral", "gap"] },
    CriterionInfo { id: 6, slug: "geometric-lemma", tags: &["spectral", "gap"] },
    CriterionInfo { id: 7, slug: "step-lemmas", tags: &["spectral", "soundness"] },
    CriterionInfo { id: 8, slug: "phase-estimation", tags: &["sparse_sim", "phase"] },
    CriterionInfo { id: 9, slug: "qj-contract", tags: &["sparse_sim", "phase"] },
    CriterionInfo { id: 10, slug: "product-optimization", tags: &["optimize"] },
    CriterionInfo { id: 11, slug: "cldm-oracle", tags: &["cldm"] },
    CriterionInfo { id: 12, slug: "slh-protocol", tags: &["cldm", "optimize"] },
];

/// Criteria whose id, slug or one of whose tags equals `filter`.
pub fn select(filter: Option<&str>) -> Vec<CriterionInfo> {
    CRITERIA
        .iter()
        .filter(|c| match filter {
            None => true,
            Some(f) => c.slug == f || c.id.to_string() == f || c.tags.contains(&f),
        })
        .copied()
        .collect()
}

pub fn run_criterion(id: u32, cfg: &AcceptanceConfig) -> Result<CriterionResult> {
    let info = *CRITERIA
        .iter()
        .find(|c| c.id == id)
        .ok_or_else(|| HamlabError::InvalidParameter(format!("no criterion {id}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ (u64::from(id) << 40));
    let start = Instant::now();
    let outcome = match id {
        1 => history_kernel(&mut rng),
        2 => energy_identity(&mut rng),
        3 => sparsity(),
        4 => separability(&mut rng),
        5 => clock_angle(&mut rng),
        6 => geometric_lemma(&mut rng),
        7 => step_lemmas(&mut rng, cfg),
        8 => phase_estimation(&mut rng),
        9 => qj_contract(&mut rng),
        10 => product_optimization(&mut rng, cfg),
        11 => cldm_oracle(&mut rng, cfg),
        _ => slh_protocol(&mut rng, cfg),
    };
    let (passed, details) = match outcome {
        Ok(pair) => pair,
        Err(e) => (false, json!({ "error": e.to_string() })),
    };
    Ok(CriterionResult {
        id: info.id,
        slug: info.slug,
        tags: info.tags,
        passed,
        seconds: start.elapsed().as_secs_f64(),
        details,
    })
}

pub fn run_all(cfg: &AcceptanceConfig, filter: Option<&str>) -> Vec<CriterionResult> {
    select(filter)
        .iter()
        .map(|c| run_criterion(c.id, cfg).expect("criterion ids come from the table"))
        .collect()
}

type Outcome = Result<(bool, Value)>;

// ---------------------------------------------------------------------------
// helpers
// ---------------------------------------------------------------------------

fn random_shape(rng: &mut ChaCha8Rng) -> Result<VerificationCircuit> {
    loop {
        let m = rng.random_range(1..=2);
        let p1 = rng.random_range(1..=2);
        let p2 = rng.random_range(0..=2);
        if m + p1 + p2 > 6 {
            continue;
        }
        let steps = rng.random_range(1..=8);
        return random_circuit(m, p1, p2, steps, rng);
    }
}

/// Every fifth circuit is a product-test wrapper, so controlled swaps are
/// covered alongside generic gates.
fn mixed_circuit(i: usize, rng: &mut ChaCha8Rng) -> Result<VerificationCircuit> {
    if i % 5 == 4 {
        let inner_steps = rng.random_range(1..=4);
        let inner = random_circuit(1, 1, 0, inner_steps, rng)?;
        hm_wrap(&inner, &[1])
    } else {
        random_shape(rng)
    }
}

fn max_of(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(f64::NEG_INFINITY, f64::max)
}

fn min_of(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(f64::INFINITY, f64::min)
}

/// `(C, A, P1) | (P2)` cut of a history state.
fn history_cut(c: &VerificationCircuit) -> Result<Bipartition> {
    let clock = ClockEncoding::new(c.steps())?;
    let n = clock.qubits() + c.workspace_qubits();
    Bipartition::contiguous(n - c.proof2(), n)
}

fn near_product(rng: &mut ChaCha8Rng, qubits_a: usize, qubits_b: usize, noise: f64) -> Result<PureState> {
    let a = PureState::random(qubits_a, rng);
    let b = PureState::random(qubits_b, rng);
    let base = a.tensor(&b)?;
    let g = linalg::random_unit_vector(base.dim(), rng);
    PureState::normalized(base.amplitudes() + g * C64::new(noise, 0.0), QubitLayout::free(qubits_a + qubits_b))
}

fn sigma_binomial(p: f64, n: usize) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

// ---------------------------------------------------------------------------
// 1, 2: history states
// ---------------------------------------------------------------------------

fn history_kernel(rng: &mut ChaCha8Rng) -> Outcome {
    let mut worst: f64 = 0.0;
    for i in 0..50 {
        let c = mixed_circuit(i, rng)?;
        let k = compile(&c)?;
        let psi = PureState::random(c.witness_qubits(), rng);
        let eta = history_state(&c, &psi)?;
        worst = worst.max(k.kernel_part().apply(eta.state.amplitudes()).norm());
    }
    Ok((worst <= 1e-9, json!({ "circuits": 50, "max_residual": worst, "tol": 1e-9 })))
}

fn energy_identity(rng: &mut ChaCha8Rng) -> Outcome {
    let mut worst: f64 = 0.0;
    for i in 0..50 {
        let c = mixed_circuit(i, rng)?;
        let k = compile(&c)?;
        let psi = PureState::random(c.witness_qubits(), rng);
        let eta = history_state(&c, &psi)?;
        let e = kitaev::energy(&k, &eta.state)?;
        let expected = (1.0 - c.acceptance_probability(&psi)?) / (c.steps() + 1) as f64;
        worst = worst.max((e - expected).abs());
    }
    Ok((worst <= 1e-9, json!({ "instances": 50, "max_error": worst, "tol": 1e-9 })))
}

// ---------------------------------------------------------------------------
// 3, 4: product-test circuits
// ---------------------------------------------------------------------------

fn sparsity() -> Outcome {
    let layouts: [&[usize]; 7] = [&[1], &[2], &[3], &[1, 1], &[1, 2], &[2, 1], &[1, 1, 1]];
    let mut rows = Vec::new();
    let mut ok = true;
    for regs in layouts {
        let c = product_test_circuit(regs)?;
        let clock = ClockEncoding::new(c.steps())?;
        let w = c.workspace_qubits();
        for (k, gate) in c.gates().iter().enumerate() {
            if !gate.is_controlled_swap() {
                continue;
            }
            let raw = gate.to_sparse(w);
            let raw_exact = raw.rows().iter().all(|r| r.len() == 1);
            let term = propagation_term(k + 1, gate, &clock, w)?;
            let term_max = term.rows().iter().map(Vec::len).max().unwrap_or(0);
            ok &= raw_exact && term_max <= 2;
            rows.push(json!({
                "registers": regs,
                "step": k + 1,
                "raw_rows_all_one": raw_exact,
                "term_max_row_nnz": term_max,
            }));
        }
    }
    Ok((ok, json!({ "terms": rows })))
}

fn separability(rng: &mut ChaCha8Rng) -> Outcome {
    let mut identical = Vec::new();
    let mut generic = Vec::new();
    for i in 0..12 {
        let regs: &[usize] = if i % 3 == 2 { &[1, 1] } else { &[1] };
        let total: usize = regs.iter().sum();
        let inner_steps = rng.random_range(1..=3);
        let inner = random_circuit(1, total, 0, inner_steps, rng)?;
        let c = hm_wrap(&inner, regs)?;
        let cut = history_cut(&c)?;

        let mut chi = PureState::random(regs[0], rng);
        for &s in &regs[1..] {
            chi = chi.tensor(&PureState::random(s, rng))?;
        }
        let same = history_state(&c, &chi.tensor(&chi)?)?;
        identical.push(max_product_overlap(&same.state, &cut)?.value);

        let witness = if i % 2 == 0 {
            PureState::random(2 * total, rng)
        } else {
            PureState::random(total, rng).tensor(&PureState::random(total, rng))?
        };
        let other = history_state(&c, &witness)?;
        generic.push(max_product_overlap(&other.state, &cut)?.value);
    }
    let worst_identical = max_of(identical.iter().map(|v| (v - 1.0).abs()));
    let worst_generic = max_of(generic.iter().copied());
    Ok((
        worst_identical <= 1e-9 && worst_generic < 1.0 - 1e-3,
        json!({
            "identical_max_deviation": worst_identical,
            "generic_max_overlap": worst_generic,
            "instances": identical.len(),
        }),
    ))
}

// ---------------------------------------------------------------------------
// 5, 6, 7: spectral
// ---------------------------------------------------------------------------

fn clock_angle(rng: &mut ChaCha8Rng) -> Outcome {
    let mut rows = Vec::new();
    let mut ok = true;
    for steps in 1..=6 {
        for m in 1..=3 {
            let c = random_circuit(m, 1, 0, steps, rng)?;
            let r = verify_clock_angle(&c, true)?;
            let compiled = r.cos_sq_theta_compiled.unwrap_or(r.cos_sq_theta);
            let pass = r.cos_sq_theta <= r.bound + SLACK && compiled <= r.bound + SLACK;
            ok &= pass;
            rows.push(json!({
                "T": steps,
                "m": m,
                "cos_sq_theta": r.cos_sq_theta,
                "cos_sq_theta_compiled": r.cos_sq_theta_compiled,
                "bound": r.bound,
                "holds": pass,
            }));
        }
    }
    Ok((ok, json!({ "cases": rows })))
}

/// PSD matrix `Q B Q` with `Q = I − ss†` (when `shared` is given) and `B`
/// of random rank-deficient spectrum.
fn random_psd_with_kernel(dim: usize, shared: Option<&CVector>, rng: &mut ChaCha8Rng) -> CMatrix {
    let zeros = rng.random_range(1..dim);
    let v = linalg::random_unitary(dim, rng);
    let mut diag = CMatrix::zeros(dim, dim);
    for k in zeros..dim {
        diag[(k, k)] = C64::new(rng.random_range(0.1..2.0), 0.0);
    }
    let b = &v * diag * v.adjoint();
    let b = match shared {
        Some(s) => {
            let q = linalg::identity(dim) - linalg::outer(s, s);
            &q * b * &q
        }
        None => b,
    };
    linalg::hermitian_part(&b)
}

fn geometric_lemma(rng: &mut ChaCha8Rng) -> Outcome {
    let mut random_fail = 0;
    let mut vacuous = 0;
    let mut worst_margin = f64::INFINITY;
    for i in 0..100 {
        let dim = rng.random_range(3..=8);
        let shared = (i % 2 == 0).then(|| linalg::random_unit_vector(dim, rng));
        let a1 = random_psd_with_kernel(dim, shared.as_ref(), rng);
        let a2 = random_psd_with_kernel(dim, shared.as_ref(), rng);
        let r = verify_geometric_bound(&a1, &a2, spectral::ZERO_TOL)?;
        worst_margin = worst_margin.min(r.delta_sum - r.bound);
        vacuous += usize::from(r.vacuous);
        random_fail += usize::from(!r.holds);
    }
    let mut compiled = Vec::new();
    let mut compiled_fail = 0;
    for steps in 1..=5 {
        for p2 in 0..=1 {
            let c = random_circuit(1, 1, p2, steps, rng)?;
            let (a1, a2) = spectral::rotated_pair(&compile(&c)?)?;
            let r = verify_geometric_bound(&a1, &a2, spectral::ZERO_TOL)?;
            compiled_fail += usize::from(!r.holds);
            compiled.push(json!({
                "T": steps,
                "p2": p2,
                "delta_sum": r.delta_sum,
                "v": r.v,
                "cos_theta": r.cos_theta,
                "bound": r.bound,
                "holds": r.holds,
            }));
        }
    }
    Ok((
        random_fail == 0 && compiled_fail == 0,
        json!({
            "random_pairs": 100,
            "random_failures": random_fail,
            "random_vacuous": vacuous,
            "random_min_margin": worst_margin,
            "compiled": compiled,
        }),
    ))
}

const STEP_TRIALS: usize = 10_000;

struct Prepared {
    circuit: VerificationCircuit,
    kernel_dense: CMatrix,
    total: SparseMatrix,
    gap: f64,
    history: CMatrix,
}

fn prepare(c: VerificationCircuit) -> Result<Prepared> {
    let k = compile(&c)?;
    let kernel_dense = k.kernel_part().to_dense();
    let gap = spectral::smallest_nonzero_eigenvalue(&kernel_dense, spectral::ZERO_TOL)?;
    let history = history_subspace(&c)?.basis().clone();
    Ok(Prepared {
        total: k.total(),
        circuit: c,
        kernel_dense,
        gap,
        history,
    })
}

/// Largest acceptance probability over product witnesses of a 1+1-qubit
/// circuit, from the grid search and alternating minimization combined.
fn max_product_acceptance(c: &VerificationCircuit, restarts: usize, seed: u64) -> Result<f64> {
    let w = c.workspace_qubits();
    let u = c.prefix_unitary(c.steps())?;
    let wit = 1usize << c.witness_qubits();
    let accept = c.accept_qubit();
    // Columns 0..wit of U are the images of |0^m⟩ ⊗ |k⟩.
    let mut m = CMatrix::zeros(wit, wit);
    for x in (0..1usize << w).filter(|&x| qubit_bit(x, accept, w) == 1) {
        for j in 0..wit {
            for k in 0..wit {
                m[(j, k)] += u[(x, j)].conj() * u[(x, k)];
            }
        }
    }
    let neg = -linalg::hermitian_part(&m);
    let cut = Bipartition::contiguous(c.proof1(), c.witness_qubits())?;
    let grid = -brute_force_product_min(&neg, &cut, 90)?;
    let alt = -min_product_energy(&neg, &cut, restarts, optimize::DEFAULT_TOL, seed)?.value;
    Ok(grid.max(alt))
}

fn step_lemmas(rng: &mut ChaCha8Rng, cfg: &AcceptanceConfig) -> Outcome {
    let prepared = (1..=4)
        .map(|steps| prepare(random_circuit(1, 1, 1, steps, rng)?))
        .collect::<Result<Vec<_>>>()?;

    // Step one: ω = √(1−p) η + √p η⊥.
    let mut one_overlap: f64 = 0.0;
    let mut one_violations = 0;
    for trial in 0..STEP_TRIALS {
        let pr = &prepared[trial % prepared.len()];
        let s = &pr.history;
        let coeffs = linalg::random_unit_vector(s.ncols(), rng);
        let eta = s * coeffs;
        let g = linalg::random_unit_vector(s.nrows(), rng);
        let perp = &g - s * (s.adjoint() * &g);
        let perp = perp.unscale(perp.norm());
        let p: f64 = rng.random();
        let omega = eta * C64::new((1.0 - p).sqrt(), 0.0) + perp * C64::new(p.sqrt(), 0.0);
        let in_history = (s.adjoint() * &omega).norm_squared();
        one_overlap = one_overlap.max((in_history - (1.0 - p)).abs());
        let energy = linalg::inner(&omega, &(&pr.kernel_dense * &omega)).re;
        if energy < p * pr.gap - SLACK {
            one_violations += 1;
        }
    }

    // Step two: the t = 0 component of the left Schmidt vector.
    let mut two_violations = 0;
    let mut two_nontrivial = 0;
    let mut two_min_margin = f64::INFINITY;
    for trial in 0..STEP_TRIALS {
        let pr = &prepared[trial % prepared.len()];
        let c = &pr.circuit;
        let noise = rng.random_range(0.0..0.3);
        let psi = near_product(rng, c.proof1(), c.proof2(), noise)?;
        let eta = history_state(c, &psi)?;
        let cut = history_cut(c)?;
        let best = max_product_overlap(&eta.state, &cut)?;
        // Perturb the product state half the time; the lemma covers any.
        let (left, right) = if trial % 2 == 1 {
            let jitter = rng.random_range(0.0..0.1);
            let l = best.left.amplitudes() + linalg::random_unit_vector(best.left.dim(), rng) * C64::new(jitter, 0.0);
            let r = best.right.amplitudes() + linalg::random_unit_vector(best.right.dim(), rng) * C64::new(jitter, 0.0);
            (l.unscale(l.norm()), r.unscale(r.norm()))
        } else {
            (best.left.amplitudes().clone(), best.right.amplitudes().clone())
        };
        let product = crate::qstate::product_state_along_cut(&left, &right, &cut)?;
        let eps = 1.0 - linalg::inner(eta.state.amplitudes(), &product).norm_sqr();
        let bound = 1.0 - eps * (c.steps() + 1) as f64;
        if bound <= 0.0 {
            continue;
        }
        two_nontrivial += 1;
        let Some(l) = extract_left_state(c, &left)? else {
            two_violations += 1;
            continue;
        };
        let candidate = l.kronecker(&right);
        let value = linalg::inner(psi.amplitudes(), &candidate).norm_sqr();
        two_min_margin = two_min_margin.min(value - bound);
        if value < bound - SLACK {
            two_violations += 1;
        }
    }

    // Step three: near-product witnesses of circuits with bounded product
    // acceptance.
    let caps = prepared
        .iter()
        .enumerate()
        .map(|(i, pr)| max_product_acceptance(&pr.circuit, cfg.restarts, cfg.seed ^ i as u64))
        .collect::<Result<Vec<_>>>()?;
    let mut three_violations = 0;
    let mut three_min_margin = f64::INFINITY;
    for trial in 0..STEP_TRIALS {
        let idx = trial % prepared.len();
        let pr = &prepared[idx];
        let c = &pr.circuit;
        let noise = rng.random_range(0.0..0.5);
        let psi = near_product(rng, c.proof1(), c.proof2(), noise)?;
        let cut = Bipartition::contiguous(c.proof1(), c.witness_qubits())?;
        let eps = 1.0 - max_product_overlap(&psi, &cut)?.value;
        let eta = history_state(c, &psi)?;
        let energy = kitaev::energy(&pr.total, &eta.state)?;
        let bound = step_three_bound(caps[idx], eps, c.steps());
        three_min_margin = three_min_margin.min(energy - bound);
        if energy < bound - SLACK {
            three_violations += 1;
        }
    }

    // Close vectors give close expectations: |⟨v1|Π|v1⟩ − ⟨v2|Π|v2⟩| ≤ √δ when |⟨v1|v2⟩|² ≥ 1 − δ.
    let mut overlap_violations = 0;
    let mut overlap_min_margin = f64::INFINITY;
    for _ in 0..STEP_TRIALS {
        let dim = rng.random_range(2..=8);
        let rank = rng.random_range(1..=dim);
        let u = linalg::random_unitary(dim, rng);
        let cols = u.columns(0, rank);
        let proj = &cols * cols.adjoint();
        let v1 = linalg::random_unit_vector(dim, rng);
        let g = linalg::random_unit_vector(dim, rng);
        let w = &g - &v1 * linalg::inner(&v1, &g);
        let w = w.unscale(w.norm());
        let d: f64 = rng.random::<f64>().powi(2);
        let v2 = &v1 * C64::new((1.0 - d).sqrt(), 0.0) + w * C64::new(d.sqrt(), 0.0);
        let delta = 1.0 - linalg::inner(&v1, &v2).norm_sqr();
        let q1 = linalg::inner(&v1, &(&proj * &v1)).re;
        let q2 = linalg::inner(&v2, &(&proj * &v2)).re;
        let margin = delta.max(0.0).sqrt() - (q1 - q2).abs();
        overlap_min_margin = overlap_min_margin.min(margin);
        if margin < -SLACK {
            overlap_violations += 1;
        }
    }

    let ok = one_overlap <= 1e-9
        && one_violations == 0
        && two_violations == 0
        && three_violations == 0
        && overlap_violations == 0;
    Ok((
        ok,
        json!({
            "trials_each": STEP_TRIALS,
            "step_one": { "max_overlap_error": one_overlap, "violations": one_violations,
                          "gaps": prepared.iter().map(|p| p.gap).collect::<Vec<_>>() },
            "step_two": { "violations": two_violations, "nontrivial": two_nontrivial, "min_margin": two_min_margin },
            "step_three": { "violations": three_violations, "min_margin": three_min_margin, "product_caps": caps },
            "overlap_continuity": { "violations": overlap_violations, "min_margin": overlap_min_margin },
        }),
    ))
}

// ---------------------------------------------------------------------------
// 8, 9: phase estimation
// ---------------------------------------------------------------------------

const SHOTS: usize = 10_000;

fn phase_estimation(rng: &mut ChaCha8Rng) -> Outcome {
    let cfg = PhaseEstimateConfig::new(0.1, 0.1)?;
    let mut rows = Vec::new();
    let mut ok = true;
    for _ in 0..5 {
        let phases: Vec<f64> = (0..8).map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect();
        let v = linalg::random_unitary(8, rng);
        let diag = CMatrix::from_diagonal(&CVector::from_iterator(
            8,
            phases.iter().map(|&p| C64::from_polar(1.0, p)),
        ));
        let u = UnitaryAction::new(&v * diag * v.adjoint())?;
        let psi = PureState::random(3, rng);
        let est = PhaseEstimator::new(&u, &psi, cfg)?;
        let samples: Vec<f64> = (0..SHOTS).map(|_| est.sample(rng)).collect();
        for (i, &theta) in phases.iter().enumerate() {
            let weight = linalg::inner(&v.column(i).into_owned(), psi.amplitudes()).norm_sqr();
            let target = weight * (1.0 - cfg.epsilon());
            let hits = samples.iter().filter(|&&s| circular_distance(s, theta) <= cfg.delta()).count();
            let freq = hits as f64 / SHOTS as f64;
            let sigma = sigma_binomial(target, SHOTS);
            let pass = freq >= target - 3.0 * sigma;
            ok &= pass;
            rows.push(json!({
                "phase": theta,
                "weight": weight,
                "frequency": freq,
                "exact_hit_probability": est.hit_probability(theta),
                "threshold": target - 3.0 * sigma,
                "pass": pass,
            }));
        }
    }
    Ok((ok, json!({ "t": cfg.t(), "shots": SHOTS, "components": rows })))
}

fn qj_contract(rng: &mut ChaCha8Rng) -> Outcome {
    let mut rows = Vec::new();
    let mut ok = true;
    for gap in [0.3, 0.6] {
        for k in 0..4 {
            let qubits = if k == 3 { 3 } else { 2 };
            let h = linalg::random_effect(1 << qubits, rng);
            let psi = PureState::random(qubits, rng);
            let energy = linalg::inner(psi.amplitudes(), &(&h * psi.amplitudes())).re;
            let a = 0.05;
            let op = row_oracle_for_term(&SparseMatrix::from_dense(&h))?;
            let verifier = QjVerifier::new(&op, &psi, a, a + gap)?;
            let rejects = (0..SHOTS).filter(|_| !verifier.run(rng)).count();
            let freq = rejects as f64 / SHOTS as f64;
            let sigma = sigma_binomial(verifier.reject_probability(), SHOTS);
            let limit = gap / 3.0 + 3.0 * sigma;
            let pass = (freq - energy).abs() <= limit;
            ok &= pass;
            rows.push(json!({
                "gap": gap,
                "energy": energy,
                "reject_frequency": freq,
                "exact_reject_probability": verifier.reject_probability(),
                "limit": limit,
                "pass": pass,
            }));
        }
    }
    Ok((ok, json!({ "shots": SHOTS, "instances": rows })))
}

// ---------------------------------------------------------------------------
// 10: product minimization
// ---------------------------------------------------------------------------

fn product_optimization(rng: &mut ChaCha8Rng, cfg: &AcceptanceConfig) -> Outcome {
    let cut = Bipartition::contiguous(2, 4)?;
    let mut worst: f64 = 0.0;
    let mut rows = Vec::new();
    for i in 0..20 {
        let h = linalg::random_hermitian(16, rng);
        let alt = min_product_energy(&h, &cut, cfg.restarts, optimize::DEFAULT_TOL, cfg.seed.wrapping_add(i))?;
        let grid = brute_force_product_min(&h, &cut, 6)?;
        worst = worst.max((alt.value - grid).abs());
        rows.push(json!({ "alternating": alt.value, "grid": grid }));
    }
    let swap = optimize::swap_matrix();
    let swap_cut = Bipartition::contiguous(1, 2)?;
    let product = min_product_energy(&swap, &swap_cut, cfg.restarts, optimize::DEFAULT_TOL, cfg.seed)?.value;
    let product_grid = brute_force_product_min(&swap, &swap_cut, 90)?;
    let (global, _) = ground_energy(&swap)?;
    let swap_ok = product.abs() <= 1e-3
        && product_grid.abs() <= 1e-3
        && (global + 1.0).abs() <= 1e-9
        && product - global >= 0.99;
    Ok((
        worst <= 1e-3 && swap_ok,
        json!({
            "random": rows,
            "max_difference": worst,
            "swap": { "product": product, "product_grid": product_grid, "global": global, "gap": product - global },
        }),
    ))
}

// ---------------------------------------------------------------------------
// 11, 12: consistency and the classical-proof protocol
// ---------------------------------------------------------------------------

fn random_supports(n: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let count = rng.random_range(2..=4);
    let mut supports: Vec<Vec<usize>> = Vec::new();
    // A chain guarantees overlapping supports.
    for q in 0..n - 1 {
        supports.push(vec![q, q + 1]);
    }
    while supports.len() < count + n - 1 {
        let a = rng.random_range(0..n);
        let mut s = vec![a];
        if rng.random_bool(0.6) {
            let b = rng.random_range(0..n);
            if b != a {
                s.push(b);
            }
        }
        supports.push(s);
    }
    supports
}

fn bloch_state(r: f64, theta: f64, phi: f64) -> CMatrix {
    let (x, y, z) = (r * theta.sin() * phi.cos(), r * theta.sin() * phi.sin(), r * theta.cos());
    CMatrix::from_row_slice(
        2,
        2,
        &[
            C64::new((1.0 + z) / 2.0, 0.0),
            C64::new(x / 2.0, -y / 2.0),
            C64::new(x / 2.0, y / 2.0),
            C64::new((1.0 - z) / 2.0, 0.0),
        ],
    )
}

/// Single-qubit state with Bloch length in `[0.9, 1)`.
fn random_bloch(rng: &mut ChaCha8Rng) -> CMatrix {
    let r = rng.random_range(0.9..1.0);
    let theta = rng.random::<f64>() * std::f64::consts::PI;
    let phi = rng.random::<f64>() * std::f64::consts::TAU;
    bloch_state(r, theta, phi)
}

/// `exp(-i angle n·σ/2)` for a unit axis `n`.
fn single_qubit_rotation(axis: [f64; 3], angle: f64) -> CMatrix {
    let (c, s) = ((angle / 2.0).cos(), (angle / 2.0).sin());
    let [x, y, z] = axis;
    CMatrix::from_row_slice(
        2,
        2,
        &[C64::new(c, -z * s), C64::new(-y * s, -x * s), C64::new(y * s, -x * s), C64::new(c, z * s)],
    )
}

/// Random unit vector orthogonal to the Bloch vector of `rho`.
fn perpendicular_axis(rho: &CMatrix, rng: &mut ChaCha8Rng) -> [f64; 3] {
    let b = [2.0 * rho[(1, 0)].re, 2.0 * rho[(1, 0)].im, (rho[(0, 0)] - rho[(1, 1)]).re];
    let nb = (b[0] * b[0] + b[1] * b[1] + b[2] * b[2]).sqrt();
    let b = b.map(|v| v / nb);
    let g = [rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5];
    let d = g[0] * b[0] + g[1] * b[1] + g[2] * b[2];
    let p = [g[0] - d * b[0], g[1] - d * b[1], g[2] - d * b[2]];
    let np = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
    p.map(|v| v / np)
}

fn cldm_oracle(rng: &mut ChaCha8Rng, cfg: &AcceptanceConfig) -> Outcome {
    let beta = 0.1;
    let oracle_cfg = ConsistencyConfig {
        seed: cfg.seed,
        ..ConsistencyConfig::default()
    };
    let mut consistent_ok = 0;
    let mut consistent_worst: f64 = 0.0;
    for _ in 0..20 {
        let n = rng.random_range(2..=4);
        let rank = rng.random_range(1..=1usize << n);
        let sigma = DensityMatrix::random(n, rank, rng);
        let supports = random_supports(n, rng);
        let marginals = reduce_all(&sigma, &supports)?;
        let inst = CldmInstance::new(n, supports.into_iter().zip(marginals).collect(), beta, 2)?;
        let v = cldm::consistency_decide(&inst, &oracle_cfg)?;
        if v.outcome == Consistency::Consistent {
            consistent_ok += 1;
            consistent_worst = consistent_worst.max(inst.max_deviation(v.witness.as_ref().expect("witness").matrix())?);
        }
    }

    let mut inconsistent_ok = 0;
    let mut perturbations = Vec::new();
    let mut certified = Vec::new();
    for _ in 0..20 {
        let n = rng.random_range(2..=4);
        // Nearly pure product state, so a rotated shared qubit contradicts
        // its other marginals.
        let first = random_bloch(rng);
        let mut sigma = DensityMatrix::from_matrix(first.clone())?;
        for _ in 1..n {
            sigma = sigma.tensor(&DensityMatrix::from_matrix(random_bloch(rng))?)?;
        }
        let mut supports = random_supports(n, rng);
        if !supports[1..].iter().any(|s| s.contains(&0)) {
            supports.push(vec![0]);
        }
        let mut marginals = reduce_all(&sigma, &supports)?;
        // Rotate qubit 0 inside the first marginal; another support also
        // holds qubit 0, so the rotated copy contradicts it.
        let target = 0;
        let axis = perpendicular_axis(&first, rng);
        let rot = single_qubit_rotation(axis, rng.random_range(1.5..3.0));
        let full = rot.kronecker(&linalg::identity(1 << (supports[target].len() - 1)));
        let original = marginals[target].matrix().clone();
        let rotated = linalg::hermitian_part(&(&full * &original * full.adjoint()));
        let td = linalg::trace_norm_hermitian(&(&rotated - &original)) / 2.0;
        perturbations.push(td);
        marginals[target] = DensityMatrix::from_matrix(rotated)?;
        let inst = CldmInstance::new(n, supports.into_iter().zip(marginals).collect(), beta, 2)?;
        let v = cldm::consistency_decide(&inst, &oracle_cfg)?;
        certified.push(v.max_violation);
        if v.outcome == Consistency::Inconsistent && td >= beta {
            inconsistent_ok += 1;
        }
    }
    Ok((
        consistent_ok == 20 && inconsistent_ok == 20,
        json!({
            "consistent_reported": consistent_ok,
            "consistent_max_witness_residual": consistent_worst,
            "inconsistent_reported": inconsistent_ok,
            "min_perturbation_trace_distance": min_of(perturbations.iter().copied()),
            "min_certified_violation": min_of(certified.iter().copied()),
        }),
    ))
}

fn projector_one() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[ZERO, ZERO, ZERO, ONE])
}

fn projector_zero() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, ZERO])
}

fn symmetric_projector() -> CMatrix {
    (linalg::identity(4) + optimize::swap_matrix()).scale(0.5)
}

/// Yes-instance: `|1⟩⟨1|` on every qubit of a 2+2 register.
pub fn yes_instance() -> Result<SLHInstance> {
    let terms = (0..4)
        .map(|q| LocalTerm::new(4, vec![q], projector_one()))
        .collect::<Result<Vec<_>>>()?;
    SLHInstance::new(4, terms, Bipartition::contiguous(2, 4)?, 0.1, 0.5)
}

/// No-instance: `|1⟩⟨1| + |0⟩⟨0|` on qubit 0 plus symmetric projectors
/// coupling qubit 1 to qubits 2 and 3. The product minimum is 2.
pub fn no_instance() -> Result<SLHInstance> {
    let terms = vec![
        LocalTerm::new(4, vec![0], projector_one())?,
        LocalTerm::new(4, vec![0], projector_zero())?,
        LocalTerm::new(4, vec![1, 2], symmetric_projector())?,
        LocalTerm::new(4, vec![1, 3], symmetric_projector())?,
    ];
    SLHInstance::new(4, terms, Bipartition::contiguous(2, 4)?, 0.5, 1.9)
}

fn pure(v: &CMatrix) -> Result<DensityMatrix> {
    DensityMatrix::from_matrix(v.clone())
}

fn random_mixed(qubits: usize, rng: &mut ChaCha8Rng) -> Result<DensityMatrix> {
    if qubits == 0 {
        return DensityMatrix::new(CMatrix::from_element(1, 1, ONE), QubitLayout::free(0));
    }
    let rank = rng.random_range(1..=1usize << qubits);
    Ok(DensityMatrix::random(qubits, rank, rng))
}

/// Cheating proofs for the no-instance, in four families of 25.
fn cheating_proof(inst: &SLHInstance, k: usize, rng: &mut ChaCha8Rng) -> Result<SLHProof> {
    let shape: Vec<(usize, usize)> = inst
        .terms()
        .iter()
        .map(|t| {
            let (a, b) = cldm::split_support(inst, &t.support);
            (a.len(), b.len())
        })
        .collect();
    match k % 4 {
        // independent random marginals
        0 => Ok(SLHProof {
            marginals: shape
                .iter()
                .map(|&(a, b)| Ok((random_mixed(a, rng)?, random_mixed(b, rng)?)))
                .collect::<Result<Vec<_>>>()?,
        }),
        // honest reductions of a random product state
        1 => honest_prover_from_sides(inst, &random_mixed(2, rng)?, &random_mixed(2, rng)?),
        // each term minimized on its own
        2 => {
            let one = pure(&projector_one())?;
            let zero = pure(&projector_zero())?;
            let scalar = random_mixed(0, rng)?;
            let flip = rng.random_bool(0.5);
            let (x, y) = if flip { (one.clone(), zero.clone()) } else { (zero.clone(), one.clone()) };
            Ok(SLHProof {
                marginals: vec![
                    (zero.clone(), scalar.clone()),
                    (one.clone(), scalar),
                    (x.clone(), y.clone()),
                    (y, x),
                ],
            })
        }
        // honest proof with every marginal mixed toward a random state
        _ => {
            let honest = honest_prover_from_sides(inst, &random_mixed(2, rng)?, &random_mixed(2, rng)?)?;
            let weight = rng.random_range(0.01..0.3);
            let blend = |d: &DensityMatrix, rng: &mut ChaCha8Rng| -> Result<DensityMatrix> {
                if d.num_qubits() == 0 {
                    return Ok(d.clone());
                }
                let noise = random_mixed(d.num_qubits(), rng)?;
                DensityMatrix::new(
                    d.matrix().scale(1.0 - weight) + noise.matrix().scale(weight),
                    QubitLayout::free(d.num_qubits()),
                )
            };
            let marginals = honest
                .marginals
                .iter()
                .map(|(a, b)| Ok((blend(a, rng)?, blend(b, rng)?)))
                .collect::<Result<Vec<_>>>()?;
            Ok(SLHProof { marginals })
        }
    }
}

fn slh_protocol(rng: &mut ChaCha8Rng, cfg: &AcceptanceConfig) -> Outcome {
    let oracle = ProjectionOracle {
        config: ConsistencyConfig {
            seed: cfg.seed,
            ..ConsistencyConfig::default()
        },
    };

    let yes = yes_instance()?;
    let zero2 = pure(&CMatrix::from_diagonal(&CVector::from_vec(vec![ONE, ZERO, ZERO, ZERO])))?;
    let honest = honest_prover_from_sides(&yes, &zero2, &zero2)?;
    let yes_verdict = slh_verifier(&yes, &honest, &oracle)?;
    let yes_ok = yes_verdict.accept && yes_verdict.energy <= yes.a();

    let no = no_instance()?;
    let decision = optimize::decide_slh(&no, cfg.restarts, cfg.seed)?;
    let certified = decision.product_upper >= no.b() && decision.exhaustive.is_some_and(|g| g >= no.b());
    let threshold = (no.a() + no.b()) / 2.0;
    let mut accepted = 0;
    let mut consistent = 0;
    let mut consistent_low = 0;
    let mut min_consistent_energy = f64::INFINITY;
    let mut min_energy = f64::INFINITY;
    for k in 0..100 {
        let proof = cheating_proof(&no, k, rng)?;
        let v = slh_verifier(&no, &proof, &oracle)?;
        accepted += usize::from(v.accept);
        min_energy = min_energy.min(v.energy);
        if v.side_a == Consistency::Consistent && v.side_b == Consistency::Consistent {
            consistent += 1;
            min_consistent_energy = min_consistent_energy.min(v.energy);
            if v.energy < threshold - 1e-6 {
                consistent_low += 1;
            }
        }
    }
    Ok((
        yes_ok && certified && accepted == 0 && consistent_low == 0,
        json!({
            "yes": { "accept": yes_verdict.accept, "energy": yes_verdict.energy, "a": yes.a() },
            "no": {
                "product_minimum": decision.product_upper,
                "global_minimum": decision.global_min,
                "exhaustive": decision.exhaustive,
                "b": no.b(),
                "proofs": 100,
                "accepted": accepted,
                "consistent": consistent,
                "min_consistent_energy": min_consistent_energy,
                "min_energy": min_energy,
                "threshold": threshold,
            },
        }),
    ))
}
