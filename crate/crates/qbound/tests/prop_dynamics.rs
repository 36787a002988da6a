use std::sync::Arc;

use proptest::prelude::*;
use qbound::dynamics::{
    depolarizing_nonunitarity, entropy_rate, evolve, evolve_with, markov_lower_bound, nonunitarity, random_generator,
    witness_f, LindbladGenerator,
};
use qbound::infomeasures::{entropy, Base};
use qbound::linalg::CMat;
use qbound::qcore::depolarizing;
use qbound::random;

const H: f64 = 1e-3;

fn five_point(f: impl Fn(f64) -> f64, t: f64) -> f64 {
    (f(t - 2.0 * H) - 8.0 * f(t - H) + 8.0 * f(t + H) - f(t + 2.0 * H)) / (12.0 * H)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn entropy_rate_matches_finite_differences(seed in any::<u64>(), d in 2usize..4, cp in any::<bool>()) {
        let mut r = random::rng(seed);
        let gen = random_generator(d, 2, cp, &mut r);
        let rho0 = random::full_rank_density(d, &mut r);
        for &t in &[0.3, 0.7, 1.2] {
            let grid: Vec<f64> = std::iter::once(0.0).chain((-2..=2).map(|k| t + k as f64 * H)).collect();
            let tr = evolve_with(&gen, &rho0, &grid, 1e-12).unwrap();
            let s: Vec<f64> = tr.states.iter().map(|x| entropy(x, Base::Nats).unwrap()).collect();
            let fd = (s[1] - 8.0 * s[2] + 8.0 * s[4] - s[5]) / (12.0 * H);
            let rate = entropy_rate(&tr.states[3], &tr.derivatives[3]).unwrap();
            prop_assert!((rate - fd).abs() <= 1e-6 * (1.0 + rate.abs()), "t={t}: {rate} vs {fd}");
        }
    }

    #[test]
    fn cp_divisible_dynamics_respect_the_markov_bound(seed in any::<u64>(), d in 2usize..4) {
        let mut r = random::rng(seed);
        let gen = random_generator(d, 3, true, &mut r);
        let rho0 = random::full_rank_density(d, &mut r);
        let grid: Vec<f64> = (0..21).map(|k| 0.1 * k as f64).collect();
        let tr = evolve(&gen, &rho0, &grid).unwrap();
        for ((&t, rho), dot) in grid.iter().zip(&tr.states).zip(&tr.derivatives) {
            let rate = entropy_rate(rho, dot).unwrap();
            let lb = markov_lower_bound(rho, &gen, t).unwrap().projector_form;
            prop_assert!(rate - lb >= -1e-8, "t={t}: {rate} < {lb}");
        }
    }

    #[test]
    fn unital_generators_annihilate_the_trace_of_the_adjoint(seed in any::<u64>(), d in 2usize..5) {
        let mut r = random::rng(seed);
        let mut gen = LindbladGenerator::new(d).with_constant_hamiltonian(random::hermitian(d, &mut r)).unwrap();
        for _ in 0..3 {
            let a = random::hermitian(d, &mut r);
            let g = random::uniform(&mut r, 0.1, 2.0);
            gen = gen.with_constant_term(g, a).unwrap();
        }
        let rho = random::full_rank_density(d, &mut r);
        prop_assert!(gen.adjoint_apply(0.0, &rho).unwrap().trace().re.abs() <= 1e-10);
    }
}

#[test]
fn entropy_rate_finite_difference_helper_is_exact_on_quartics() {
    let f = |t: f64| t.powi(4) - 2.0 * t;
    assert!((five_point(f, 0.5) - (4.0 * 0.125 - 2.0)).abs() < 1e-9);
}

#[test]
fn depolarizing_nonunitarity_closed_form() {
    for d in [2usize, 3] {
        let d2 = (d * d) as f64;
        let qmax = d2 / (d2 - 1.0);
        for k in 0..11 {
            let q = qmax * k as f64 / 10.0;
            let v = nonunitarity(&depolarizing(d, q).unwrap(), 1e-9).unwrap().value;
            assert!((v - depolarizing_nonunitarity(d, q)).abs() <= 1e-5, "d={d} q={q}: {v}");
        }
    }
}

#[test]
fn witness_entropies_are_in_nats() {
    let gen = qbound::dynamics::pure_decoherence(Arc::new(|_| 1.0));
    let rho0 = qbound::dynamics::bloch_state(1.0, 0.3, 0.8);
    let grid = [0.0, 0.5, 1.0];
    let tr = evolve(&gen, &rho0, &grid).unwrap();
    for (w, rho) in witness_f(&tr, &gen).unwrap().iter().zip(&tr.states) {
        let bits = entropy(rho as &CMat, Base::Bits).unwrap();
        assert!((w.entropy - bits * std::f64::consts::LN_2).abs() <= 1e-12);
    }
}
