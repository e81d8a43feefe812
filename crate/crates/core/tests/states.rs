use hamlab::linalg::{self, CMatrix};
use hamlab::qstate::{
    max_product_overlap, partial_trace, permute_qubits, product_state_along_cut, trace_distance, Bipartition,
    DensityMatrix, PureState, Tensor,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn partial_trace_keeps_a_state(seed in any::<u64>(), n in 2usize..5, rank in 1usize..6) {
        let mut r = rng(seed);
        let rho = DensityMatrix::random(n, rank, &mut r);
        let keep: Vec<usize> = (0..n).filter(|q| (seed >> q) & 1 == 1).collect();
        prop_assume!(!keep.is_empty());
        let red = partial_trace(&rho, &keep).unwrap();
        prop_assert!((red.trace() - 1.0).abs() < 1e-12);
        prop_assert!(linalg::eigenvalues(red.matrix())[0] > -1e-12);
    }

    #[test]
    fn partial_trace_contracts_trace_distance(seed in any::<u64>(), n in 2usize..5) {
        let mut r = rng(seed);
        let rho = DensityMatrix::random(n, 2, &mut r);
        let sigma = DensityMatrix::random(n, 3, &mut r);
        let keep = vec![0, n - 1];
        let before = trace_distance(&rho, &sigma).unwrap();
        let after = trace_distance(&partial_trace(&rho, &keep).unwrap(), &partial_trace(&sigma, &keep).unwrap()).unwrap();
        prop_assert!(after <= before + 1e-12);
    }

    #[test]
    fn partial_trace_of_product_returns_factor(seed in any::<u64>(), na in 1usize..3, nb in 1usize..3) {
        let mut r = rng(seed);
        let a = DensityMatrix::random(na, 2, &mut r);
        let b = DensityMatrix::random(nb, 2, &mut r);
        let ab = a.tensor(&b).unwrap();
        let back = partial_trace(&ab, &(0..na).collect::<Vec<_>>()).unwrap();
        prop_assert!(linalg::max_abs_diff(back.matrix(), a.matrix()) < 1e-12);
    }

    #[test]
    fn permutation_round_trips(seed in any::<u64>()) {
        let mut r = rng(seed);
        let m = linalg::random_hermitian(8, &mut r);
        let order = [2usize, 0, 1];
        let inverse = [1usize, 2, 0];
        let back = permute_qubits(&permute_qubits(&m, &order).unwrap(), &inverse).unwrap();
        prop_assert!(linalg::max_abs_diff(&back, &m) < 1e-14);
    }

    #[test]
    fn product_overlap_is_attained_and_bounded(seed in any::<u64>(), na in 1usize..4, nb in 1usize..4) {
        let mut r = rng(seed);
        let psi = PureState::random(na + nb, &mut r);
        let cut = Bipartition::contiguous(na, na + nb).unwrap();
        let best = max_product_overlap(&psi, &cut).unwrap();
        prop_assert!(best.value <= 1.0 + 1e-12);
        let phi = product_state_along_cut(best.left.amplitudes(), best.right.amplitudes(), &cut).unwrap();
        prop_assert!((phi.dotc(psi.amplitudes()).norm_sqr() - best.value).abs() < 1e-10);
        // no random product state beats the optimum
        for _ in 0..5 {
            let x = PureState::random(na, &mut r);
            let y = PureState::random(nb, &mut r);
            let v = product_state_along_cut(x.amplitudes(), y.amplitudes(), &cut).unwrap();
            prop_assert!(v.dotc(psi.amplitudes()).norm_sqr() <= best.value + 1e-12);
        }
    }
}

#[test]
fn orthonormal_span_handles_rank_deficient_input() {
    let mut r = rng(77);
    for _ in 0..500 {
        let a = linalg::ginibre(8, 2, &mut r);
        let b = linalg::ginibre(2, 3, &mut r);
        let m: CMatrix = &a * &b;
        let q = linalg::orthonormal_span(&m, 1e-8);
        assert_eq!(q.ncols(), 2);
        assert!(linalg::max_abs_diff(&(q.adjoint() * &q), &linalg::identity(2)) < 1e-12);
        let residual = &m - &q * (q.adjoint() * &m);
        assert!(residual.norm() < 1e-10 * m.norm().max(1.0));
        let top = linalg::largest_singular_value(&m);
        let gram_top = linalg::eigenvalues(&(m.adjoint() * &m)).last().copied().unwrap().sqrt();
        assert!((top - gram_top).abs() < 1e-10 * top);
    }
}

#[test]
fn random_unitaries_are_unitary() {
    let mut r = rng(3);
    for dim in [2, 4, 8, 16] {
        let u = linalg::random_unitary(dim, &mut r);
        assert!(linalg::unitarity_defect(&u) < 1e-12);
    }
}
