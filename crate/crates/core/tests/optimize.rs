use hamlab::linalg;
use hamlab::optimize::{brute_force_product_min, decide_slh, ground_energy, min_product_energy, SlhOutcome};
use hamlab::acceptance::{no_instance, yes_instance};
use hamlab::qstate::Bipartition;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn product_minimum_sits_above_the_ground_energy(seed in any::<u64>(), na in 1usize..3, nb in 1usize..3) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let h = linalg::random_hermitian(1 << (na + nb), &mut r);
        let cut = Bipartition::contiguous(na, na + nb).unwrap();
        let best = min_product_energy(&h, &cut, 5, 1e-12, seed).unwrap();
        let (ground, _) = ground_energy(&h).unwrap();
        prop_assert!(best.value >= ground - 1e-10);
        // reported value is the energy of the reported product state
        let phi = best.product_state(&cut).unwrap();
        let e = phi.amplitudes().dotc(&(&h * phi.amplitudes())).re;
        prop_assert!((e - best.value).abs() < 1e-10);
        // alternating minimization never goes uphill
        for w in best.history.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-10);
        }
    }
}

#[test]
fn grid_search_agrees_with_restarts_on_two_qubits() {
    let mut r = ChaCha8Rng::seed_from_u64(9);
    let cut = Bipartition::contiguous(1, 2).unwrap();
    for k in 0..5 {
        let h = linalg::random_hermitian(4, &mut r);
        let restarts = min_product_energy(&h, &cut, 50, 1e-12, k).unwrap().value;
        let grid = brute_force_product_min(&h, &cut, 24).unwrap();
        assert!((restarts - grid).abs() < 1e-3, "{restarts} vs {grid}");
    }
}

#[test]
fn reference_instances_are_decided() {
    assert_eq!(decide_slh(&yes_instance().unwrap(), 20, 1).unwrap().outcome, SlhOutcome::Yes);
    assert_eq!(decide_slh(&no_instance().unwrap(), 20, 1).unwrap().outcome, SlhOutcome::No);
}

#[test]
fn same_seed_same_minimum() {
    let mut r = ChaCha8Rng::seed_from_u64(2);
    let h = linalg::random_hermitian(8, &mut r);
    let cut = Bipartition::contiguous(1, 3).unwrap();
    let a = min_product_energy(&h, &cut, 7, 1e-12, 42).unwrap();
    let b = min_product_energy(&h, &cut, 7, 1e-12, 42).unwrap();
    assert_eq!(a.restart_values, b.restart_values);
}
