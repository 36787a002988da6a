use proptest::prelude::*;
use qbound::infomeasures::{conditional_entropy, dmax, entropy, purify, relative_entropy, sandwiched_renyi, Base};
use qbound::linalg::{partial_trace, proj, CMat};
use qbound::qcore::KrausChannel;
use qbound::random::{self, Rng};

const DPI_SLACK: f64 = 1e-8;

fn instance(seed: u64, din: usize, dout: usize) -> (KrausChannel, CMat, CMat) {
    let mut r: Rng = random::rng(seed);
    let nk = din.div_ceil(dout) + 1;
    let ch = KrausChannel::new(random::kraus_ops(din, dout, nk, &mut r)).unwrap();
    let rho = random::density(din, 1 + (seed as usize % din), &mut r);
    let sigma = random::full_rank_density(din, &mut r);
    (ch, rho, sigma)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn data_processing(seed in any::<u64>(), din in 2usize..4, dout in 2usize..4) {
        let (ch, rho, sigma) = instance(seed, din, dout);
        let (nr, ns) = (ch.apply(&rho).unwrap(), ch.apply(&sigma).unwrap());
        let before = relative_entropy(&rho, &sigma, Base::Bits).unwrap().value();
        let after = relative_entropy(&nr, &ns, Base::Bits).unwrap().value();
        prop_assert!(before - after >= -DPI_SLACK, "D: {before} < {after}");
        let before = dmax(&rho, &sigma, Base::Bits).unwrap().value();
        let after = dmax(&nr, &ns, Base::Bits).unwrap().value();
        prop_assert!(before - after >= -DPI_SLACK, "Dmax: {before} < {after}");
        for alpha in [0.6, 2.0] {
            let before = sandwiched_renyi(&rho, &sigma, alpha, Base::Bits).unwrap().value();
            let after = sandwiched_renyi(&nr, &ns, alpha, Base::Bits).unwrap().value();
            prop_assert!(before - after >= -DPI_SLACK, "alpha {alpha}: {before} < {after}");
        }
    }

    #[test]
    fn conditional_entropy_duality(seed in any::<u64>(), da in 1usize..4, db in 1usize..4) {
        let mut r = random::rng(seed);
        let n = da * db;
        let rho = random::density(n, 1 + (seed as usize % n), &mut r);
        let (psi, de) = purify(&rho).unwrap();
        let full = proj(&psi);
        let rho_ae = partial_trace(&full, &[da, db, de], &[0, 2]).unwrap();
        let ab = conditional_entropy(&rho, [da, db], Base::Bits).unwrap();
        let ae = conditional_entropy(&rho_ae, [da, de], Base::Bits).unwrap();
        prop_assert!((ab + ae).abs() <= 1e-9);
    }

    #[test]
    fn bits_and_nats_differ_by_ln2(seed in any::<u64>(), n in 2usize..5) {
        let mut r = random::rng(seed);
        let rho = random::full_rank_density(n, &mut r);
        let sigma = random::full_rank_density(n, &mut r);
        let ln2 = std::f64::consts::LN_2;
        let (sb, sn) = (entropy(&rho, Base::Bits).unwrap(), entropy(&rho, Base::Nats).unwrap());
        prop_assert!((sb * ln2 - sn).abs() <= 1e-12);
        let db = relative_entropy(&rho, &sigma, Base::Bits).unwrap().value();
        let dn = relative_entropy(&rho, &sigma, Base::Nats).unwrap().value();
        prop_assert!((db * ln2 - dn).abs() <= 1e-12 * (1.0 + dn));
    }
}
