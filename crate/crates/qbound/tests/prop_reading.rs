use proptest::prelude::*;
use qbound::infomeasures::{holevo, Base, CQEnsemble};
use qbound::qcore::{erasure, hw_group, MemoryCell};
use qbound::random;
use qbound::reading::{
    choi_resources, covariant_cell_capacity, env_cell_capacity, secure_reading_deltas, SecurePreset, BA_KKT_TOL,
};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn covariant_erasure_capacity_matches_the_choi_ensemble(q in 0.0f64..=1.0) {
        let g = hw_group(2);
        let base = erasure(2, q).unwrap();
        let cov = covariant_cell_capacity(&base, &g, &g.direct_sum_identity()).unwrap();
        let states = choi_resources(&MemoryCell::rotated(&base, &g).unwrap());
        let uniform = vec![1.0 / states.len() as f64; states.len()];
        let at_uniform = holevo(&CQEnsemble::new(uniform, states.clone()).unwrap(), Base::Bits).unwrap();
        let ba = env_cell_capacity(&states).unwrap();
        prop_assert!((cov - at_uniform).abs() <= 1e-6, "{cov} vs {at_uniform}");
        prop_assert!((cov - ba.capacity).abs() <= 1e-6, "{cov} vs {}", ba.capacity);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn blahut_arimoto_is_monotone_and_kkt_stationary(seed in any::<u64>(), n in 2usize..5, d in 2usize..4) {
        let mut r = random::rng(seed);
        let states: Vec<_> = (0..n).map(|k| random::density(d, 1 + k % d, &mut r)).collect();
        let cap = env_cell_capacity(&states).unwrap();
        prop_assert!(cap.monotone);
        prop_assert!(cap.converged);
        prop_assert!(cap.kkt_residual <= BA_KKT_TOL, "{}", cap.kkt_residual);
    }

    #[test]
    fn incognito_equals_covert_for_the_presets(eta0 in 0.05f64..0.95, delta in -0.05f64..0.05, q in 0.0f64..0.2, gadc in any::<bool>()) {
        let eta1 = (eta0 + delta).clamp(0.0, 1.0);
        let preset = if gadc { SecurePreset::Gadc { theta: 0.5, eta0, eta1 } } else { SecurePreset::Depolarizing { d: 2, eta0, eta1 } };
        let s = secure_reading_deltas(preset, q, 1).unwrap();
        prop_assert!((s.d_i - s.d_c).abs() <= 1e-9, "{} vs {}", s.d_i, s.d_c);
    }

    #[test]
    fn security_parameter_shrinks_as_codewords_merge(eta0 in 0.1f64..0.9, theta in 0.05f64..0.95, gadc in any::<bool>()) {
        let mut prev = f64::INFINITY;
        for k in 0..8 {
            let eta1 = eta0 - 0.1 * 0.5f64.powi(k);
            let preset = if gadc { SecurePreset::Gadc { theta, eta0, eta1 } } else { SecurePreset::Depolarizing { d: 2, eta0, eta1 } };
            let s = secure_reading_deltas(preset, 0.01, 1000).unwrap();
            prop_assert!(s.n_d_i <= prev + 1e-15, "k={k}: {} > {prev}", s.n_d_i);
            prev = s.n_d_i;
        }
    }
}

#[test]
fn incognito_and_covert_split_away_from_the_unital_gadc() {
    let s = secure_reading_deltas(SecurePreset::Gadc { theta: 0.3, eta0: 0.45, eta1: 0.4 }, 0.0166, 1).unwrap();
    assert!(s.d_i - s.d_c > 1e-8, "{} vs {}", s.d_i, s.d_c);
}
