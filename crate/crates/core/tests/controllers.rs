mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use simgap::controllers::{spectral_norm, ConditioningVector, GainSet, RnnController, EPS_A, N_COND, N_STATE};
use simgap::plant::{PlantParams, State};

#[test]
fn sensitivity_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for case in 0..100 {
        let ctrl = common::random_controller(&mut rng, 12, 300.0);
        let (s, cond, h) = common::random_case(&mut rng, 12);
        let err = common::sensitivity_fd_error(&ctrl, &s, &cond, &h);
        assert!(err < 1e-6, "case {case}: relative error {err:e}");
    }
}

#[test]
fn proportional_force_is_negated_gain_product() {
    let g = GainSet::default();
    let k = g.nominal();
    let s = State::new(0.2, -0.1, 0.05, 0.3);
    let f = simgap::controllers::proportional_force(&s, &g);
    let want = -(k[0] * 0.2 - k[1] * 0.1 + k[2] * 0.05 + k[3] * 0.3);
    assert!((f - want).abs() < 1e-12);
}

#[test]
fn nominal_conditioning_is_unit() {
    let c = ConditioningVector::from_plant(&PlantParams::nominal());
    assert!(c.0.iter().all(|v| (v - 1.0).abs() < 1e-12), "{:?}", c.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn effective_recurrence_is_bounded(seed in any::<u64>(), n in 1usize..10, gain in 0.01f64..20.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let base = common::random_controller(&mut rng, n, 300.0);
        let a: Vec<f64> = base.a_raw.iter().map(|v| v * gain).collect();
        let ctrl = RnnController::from_parts(n, N_STATE + N_COND, a.clone(), base.b.clone(), base.c.clone(), base.b1.clone(), 0.0, 300.0).unwrap();
        let rho = spectral_norm(ctrl.a_effective(), n);
        prop_assert!(rho <= (1.0 + EPS_A) * (1.0 + 1e-8), "rho {}", rho);
        if spectral_norm(&a, n) <= 1.0 + EPS_A {
            prop_assert_eq!(ctrl.a_effective(), &a[..]);
        }
    }

    #[test]
    fn output_is_bounded_by_readout_norm(seed in any::<u64>(), x in -5.0f64..5.0, w in -20.0f64..20.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ctrl = common::random_controller(&mut rng, 6, 300.0);
        let (f, h) = ctrl.rnn_step(&[0.0; 6], &State::new(x, 0.0, 0.1, w), &[1.0; N_COND]).unwrap();
        prop_assert!(f.abs() <= ctrl.output_bound() + 1e-9);
        prop_assert!(h.iter().all(|v| v.abs() <= 1.0));
    }
}
