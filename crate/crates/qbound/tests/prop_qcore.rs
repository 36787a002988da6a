use proptest::prelude::*;
use qbound::linalg::{eye, lambda_min, max_abs, partial_trace, CMat, C64};
use qbound::qcore::{
    choi_of, choi_simulate, depolarizing, erasure, gadc, hw_group, KrausChannel,
};
use qbound::random;

fn zoo() -> Vec<(String, KrausChannel)> {
    let mut v = Vec::new();
    for d in 2..4 {
        for q in [0.0, 0.3, 1.0] {
            v.push((format!("depolarizing({d},{q})"), depolarizing(d, q).unwrap()));
            v.push((format!("erasure({d},{q})"), erasure(d, q).unwrap()));
        }
        v.push((format!("identity({d})"), KrausChannel::identity(d)));
    }
    for (eta, theta) in [(0.0, 0.0), (0.4, 0.5), (1.0, 0.2), (0.7, 1.0)] {
        v.push((format!("gadc({eta},{theta})"), gadc(eta, theta).unwrap()));
    }
    v
}

#[test]
fn zoo_choi_operators_are_psd_with_identity_marginal() {
    for (name, ch) in zoo() {
        let j = choi_of(&ch);
        assert!(lambda_min(&j.matrix) >= -1e-12, "{name}");
        let tr_out = partial_trace(&j.matrix, &[ch.in_dim, ch.out_dim], &[0]).unwrap();
        assert!(max_abs(&(tr_out - eye(ch.in_dim))) <= 1e-12, "{name}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn channels_preserve_trace(seed in any::<u64>(), din in 1usize..4, dout in 1usize..4, extra in 0usize..3) {
        let mut r = random::rng(seed);
        let nk = din.div_ceil(dout) + extra;
        let ch = KrausChannel::new(random::kraus_ops(din, dout, nk, &mut r)).unwrap();
        let rho = random::density(din, 1 + extra.min(din - 1), &mut r);
        prop_assert!((ch.apply(&rho).unwrap().trace().re - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn heisenberg_weyl_twirl_is_maximally_mixed(seed in any::<u64>(), d in 2usize..5) {
        let mut r = random::rng(seed);
        let rho = random::full_rank_density(d, &mut r);
        let g = hw_group(d);
        let mut acc = CMat::zeros(d, d);
        for u in &g.unitaries {
            acc += u * &rho * u.adjoint();
        }
        let pi = eye(d) / C64::new(d as f64, 0.0);
        prop_assert!(max_abs(&(acc / C64::new((d * d) as f64, 0.0) - pi)) <= 1e-12);
    }

    #[test]
    fn post_selected_teleportation(seed in any::<u64>(), din in 1usize..4, dout in 1usize..4) {
        let mut r = random::rng(seed);
        let ch = KrausChannel::new(random::kraus_ops(din, dout, din.div_ceil(dout) + 1, &mut r)).unwrap();
        let rho = random::full_rank_density(din, &mut r);
        let sim = choi_simulate(&choi_of(&ch), &rho);
        prop_assert!(max_abs(&(sim - ch.apply(&rho).unwrap())) <= 1e-9);
    }
}
