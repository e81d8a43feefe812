use hamlab::acceptance::{no_instance, yes_instance};
use hamlab::cldm::{
    consistency_decide, honest_prover, honest_prover_from_sides, proof_energy, reduce_all, separation_bound,
    slh_verifier, CldmInstance, Consistency, ConsistencyConfig, ProjectionOracle,
};
use hamlab::linalg::{self, CMatrix, C64};
use hamlab::qstate::{trace_distance, DensityMatrix, PureState, Tensor};
use hamlab::CVector;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn trace_norm(a: &DensityMatrix, b: &DensityMatrix) -> f64 {
    linalg::trace_norm_hermitian(&(a.matrix() - b.matrix()))
}

fn diag(entries: &[f64]) -> DensityMatrix {
    let d = entries.len();
    let mut m = CMatrix::zeros(d, d);
    for (i, &x) in entries.iter().enumerate() {
        m[(i, i)] = C64::new(x, 0.0);
    }
    DensityMatrix::from_matrix(m).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn effects_see_at_most_the_trace_distance(seed in any::<u64>(), n in 1usize..4) {
        let mut r = rng(seed);
        let rho = DensityMatrix::random(n, 2, &mut r);
        let sigma = DensityMatrix::random(n, 3, &mut r);
        let h = linalg::random_effect(1 << n, &mut r);
        let gap = (&h * (rho.matrix() - sigma.matrix())).trace().re.abs();
        prop_assert!(gap <= trace_distance(&rho, &sigma).unwrap() + 1e-12);
    }

    #[test]
    fn tensor_products_add_trace_norms(seed in any::<u64>(), na in 1usize..3, nb in 1usize..3) {
        let mut r = rng(seed);
        let (ra, sa) = (DensityMatrix::random(na, 2, &mut r), DensityMatrix::random(na, 1, &mut r));
        let (rb, sb) = (DensityMatrix::random(nb, 2, &mut r), DensityMatrix::random(nb, 4, &mut r));
        let joint = trace_norm(&ra.tensor(&rb).unwrap(), &sa.tensor(&sb).unwrap());
        prop_assert!(joint <= trace_norm(&ra, &sa) + trace_norm(&rb, &sb) + 1e-12);
    }

    #[test]
    fn separation_bound_never_exceeds_a_deviation(seed in any::<u64>()) {
        let mut r = rng(seed);
        let marginals = vec![
            (vec![0, 1], DensityMatrix::random(2, 2, &mut r)),
            (vec![1, 2], DensityMatrix::random(2, 1, &mut r)),
            (vec![2], DensityMatrix::random(1, 1, &mut r)),
        ];
        let inst = CldmInstance::new(3, marginals, 0.1, 2).unwrap();
        let sigma = DensityMatrix::random(3, 4, &mut r);
        let bound = separation_bound(&inst, sigma.matrix()).unwrap();
        for _ in 0..8 {
            let tau = DensityMatrix::random(3, 1 + (seed % 8) as usize, &mut r);
            prop_assert!(bound <= inst.max_deviation(tau.matrix()).unwrap() + 1e-10);
        }
    }

    #[test]
    fn honest_proof_energy_matches_the_product_state(seed in any::<u64>()) {
        let mut r = rng(seed);
        let inst = no_instance().unwrap();
        let rho_a = DensityMatrix::random(2, 1, &mut r);
        let rho_b = DensityMatrix::random(2, 2, &mut r);
        let product = rho_a.tensor(&rho_b).unwrap();
        let expected = (inst.hamiltonian() * product.matrix()).trace().re;
        let proof = honest_prover_from_sides(&inst, &rho_a, &rho_b).unwrap();
        prop_assert!((proof_energy(&inst, &proof).unwrap() - expected).abs() < 1e-10);
        let same = honest_prover(&inst, &product).unwrap();
        prop_assert!((proof_energy(&inst, &same).unwrap() - expected).abs() < 1e-10);
    }
}

#[test]
fn marginals_of_a_global_state_are_consistent() {
    let mut r = rng(21);
    let supports = vec![vec![0, 1], vec![1, 2], vec![0, 2]];
    for _ in 0..5 {
        let rho = DensityMatrix::random(3, 3, &mut r);
        let marginals = supports.iter().cloned().zip(reduce_all(&rho, &supports).unwrap()).collect();
        let inst = CldmInstance::new(3, marginals, 0.1, 2).unwrap();
        let v = consistency_decide(&inst, &ConsistencyConfig::default()).unwrap();
        assert_eq!(v.outcome, Consistency::Consistent);
        let witness = v.witness.unwrap();
        assert!(inst.max_deviation(witness.matrix()).unwrap() < 0.05);
    }
}

#[test]
fn contradictory_single_qubit_marginals_are_inconsistent() {
    let marginals = vec![(vec![0], diag(&[1.0, 0.0])), (vec![0], diag(&[0.7, 0.3]))];
    let inst = CldmInstance::new(1, marginals, 0.1, 1).unwrap();
    let v = consistency_decide(&inst, &ConsistencyConfig::default()).unwrap();
    assert_eq!(v.outcome, Consistency::Inconsistent);
    assert!(v.max_violation >= 0.05);
}

#[test]
fn pure_marginals_rule_out_a_bell_pair() {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let bell = CVector::from_vec(vec![C64::new(s, 0.0), C64::default(), C64::default(), C64::new(s, 0.0)]);
    let bell = PureState::from_amplitudes(bell).unwrap().to_density();
    let zero = diag(&[1.0, 0.0]);
    let marginals = vec![(vec![0], zero.clone()), (vec![1], zero), (vec![0, 1], bell)];
    let inst = CldmInstance::new(2, marginals, 0.1, 2).unwrap();
    let v = consistency_decide(&inst, &ConsistencyConfig::default()).unwrap();
    assert_eq!(v.outcome, Consistency::Inconsistent);
}

#[test]
fn verifier_accepts_honest_yes_proof() {
    let inst = yes_instance().unwrap();
    let zeros = PureState::basis(2, 0).unwrap().to_density();
    let proof = honest_prover_from_sides(&inst, &zeros, &zeros).unwrap();
    let v = slh_verifier(&inst, &proof, &ProjectionOracle::default()).unwrap();
    assert!(v.accept);
    assert!(v.energy.abs() < 1e-12);
}

#[test]
fn verifier_rejects_inconsistent_side() {
    let inst = no_instance().unwrap();
    let mut proof = honest_prover_from_sides(
        &inst,
        &PureState::basis(2, 0).unwrap().to_density(),
        &PureState::basis(2, 0).unwrap().to_density(),
    )
    .unwrap();
    // The two terms on qubit 0 now disagree about its state.
    let one = diag(&[0.0, 1.0]);
    proof.marginals[1].0 = one;
    let v = slh_verifier(&inst, &proof, &ProjectionOracle::default()).unwrap();
    assert_eq!(v.side_a, Consistency::Inconsistent);
    assert!(!v.accept);
}
