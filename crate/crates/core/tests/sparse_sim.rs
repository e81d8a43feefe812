use hamlab::linalg;
use hamlab::operator::LocalTerm;
use hamlab::qstate::PureState;
use hamlab::sparse_sim::{evolve, row_oracle_for_term, PhaseEstimateConfig, PhaseEstimator, QjVerifier};
use hamlab::CVector;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn effect_term(seed: u64) -> LocalTerm {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    LocalTerm::new(3, vec![0, 2], linalg::random_effect(4, &mut r)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn evolution_is_unitary(seed in any::<u64>(), time in -3.0f64..3.0) {
        let h = row_oracle_for_term(&effect_term(seed)).unwrap();
        let u = evolve(&h, time, 1e-9).unwrap();
        prop_assert!(linalg::unitarity_defect(u.matrix()) < 1e-10);
    }

    #[test]
    fn phase_distribution_sums_to_one(seed in any::<u64>(), eps in 0.05f64..0.4, delta in 0.05f64..0.4) {
        let h = row_oracle_for_term(&effect_term(seed)).unwrap();
        let u = evolve(&h, -1.0, 1e-9).unwrap();
        let psi = PureState::random(3, &mut ChaCha8Rng::seed_from_u64(seed ^ 1));
        let est = PhaseEstimator::new(&u, &psi, PhaseEstimateConfig::new(eps, delta).unwrap()).unwrap();
        let total: f64 = est.probabilities().iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-10);
        prop_assert!(est.probabilities().iter().all(|&p| p >= -1e-15));
    }

    #[test]
    fn eigenstates_land_within_precision(seed in any::<u64>(), k in 0usize..8) {
        let term = effect_term(seed);
        let h = row_oracle_for_term(&term).unwrap();
        let e = linalg::eigh(&h.to_dense());
        let psi = PureState::from_amplitudes(e.vector(k)).unwrap();
        let u = evolve(&h, -1.0, 1e-9).unwrap();
        let cfg = PhaseEstimateConfig::new(0.1, 0.1).unwrap();
        let est = PhaseEstimator::new(&u, &psi, cfg).unwrap();
        prop_assert!(est.hit_probability(e.values[k]) >= 1.0 - 0.1);
    }

    #[test]
    fn qj_rejection_tracks_the_energy(seed in any::<u64>()) {
        let term = effect_term(seed);
        let h = row_oracle_for_term(&term).unwrap();
        let psi = PureState::random(3, &mut ChaCha8Rng::seed_from_u64(!seed));
        let (a, b) = (0.2, 0.8);
        let v = QjVerifier::new(&h, &psi, a, b).unwrap();
        let dense = h.to_dense();
        let energy = psi.amplitudes().dotc(&(&dense * psi.amplitudes())).re;
        prop_assert!((v.reject_probability() - energy).abs() <= (b - a) / 3.0);
    }
}

#[test]
fn register_size_follows_the_precision() {
    assert_eq!(PhaseEstimateConfig::new(0.1, 0.1).unwrap().t(), 7);
    assert!(PhaseEstimateConfig::new(0.0, 0.1).is_err());
    assert!(PhaseEstimateConfig::new(0.1, 1.0).is_err());
}

#[test]
fn oracle_rows_match_the_dense_term() {
    let term = effect_term(4);
    let h = row_oracle_for_term(&term).unwrap();
    let dense = term.embed();
    assert!(linalg::max_abs_diff(&h.to_dense(), &dense) < 1e-15);
    for i in 0..h.dim() {
        assert!(h.row(i).len() <= h.declared_sparsity());
    }
    let zero = CVector::zeros(8);
    assert!(PureState::from_amplitudes(zero).is_err());
}
