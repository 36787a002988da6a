use proptest::prelude::*;
use qbound::linalg::{kron, max_entangled};
use qbound::rains::{
    max_overlap_ppt_prime, ppt_prime_violation, rains_relative_entropy, rmax_state, sandwiched_rains, FwOptions,
    SDP_TOL,
};
use qbound::random;

const CHAIN_SLACK: f64 = 1e-5;

#[test]
fn maximally_entangled_overlap_with_ppt_prime_is_one_over_m() {
    for m in [2usize, 3] {
        let v = max_overlap_ppt_prime(&max_entangled(m), [m, m], SDP_TOL).unwrap();
        assert!((v - 1.0 / m as f64).abs() <= 1e-6, "M={m}: {v}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn rmax_is_local_unitary_invariant(seed in any::<u64>(), da in 2usize..4) {
        let mut r = random::rng(seed);
        let db = 2;
        let rho = random::density(da * db, 2, &mut r);
        let u = kron(&random::unitary(da, &mut r), &random::unitary(db, &mut r));
        let rot = &u * &rho * u.adjoint();
        let a = rmax_state(&rho, [da, db], SDP_TOL).unwrap().value;
        let b = rmax_state(&rot, [da, db], SDP_TOL).unwrap().value;
        prop_assert!((a - b).abs() <= 1e-6, "{a} vs {b}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(3))]

    /// Lower ends of the Frank–Wolfe brackets (value − gap) keep the chain honest.
    #[test]
    fn rains_chain_and_ppt_prime_optimizers(seed in any::<u64>()) {
        let mut r = random::rng(seed);
        let dims = [2, 2];
        let rho = random::full_rank_density(4, &mut r);
        let opts = FwOptions::default();
        let re = rains_relative_entropy(&rho, dims, opts).unwrap();
        let sw = sandwiched_rains(&rho, dims, 1.5, opts).unwrap();
        let rm = rmax_state(&rho, dims, SDP_TOL).unwrap().value;
        prop_assert!(re.value - re.gap <= sw.value + CHAIN_SLACK, "{} > {}", re.value, sw.value);
        prop_assert!(sw.value - sw.gap <= rm + CHAIN_SLACK, "{} > {rm}", sw.value);
        for s in [&re.sigma, &sw.sigma] {
            prop_assert!(ppt_prime_violation(s, dims).unwrap() <= 1e-8);
        }
    }
}
