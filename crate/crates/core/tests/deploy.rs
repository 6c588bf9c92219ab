use proptest::prelude::*;
use simgap::controllers::{ConditioningVector, GainSet, ProportionalPolicy};
use simgap::deploy::{duty_to_force, emulate_loop, force_to_duty, EmaFilter, EmulatorConfig, JitterSpec, MotorModel};
use simgap::evaluation::{settling_time, Signal, Status};
use simgap::plant::{PlantParams, SimLimits, State};

proptest! {
    #[test]
    fn duty_roundtrip(duty in -1.0f64..=1.0, v_bat in 5.0f64..9.0, c_emp in 0.5f64..3.0) {
        let mm = MotorModel::with_c_emp(c_emp).unwrap();
        let f = duty_to_force(duty, v_bat, &mm).unwrap();
        let back = force_to_duty(f, v_bat, &mm).unwrap();
        prop_assert!(!back.saturated);
        prop_assert!((back.duty - duty).abs() <= 1e-12 * duty.abs().max(1e-300));
    }

    #[test]
    fn force_is_linear_in_duty(a in -0.5f64..0.5, b in -0.5f64..0.5) {
        let mm = MotorModel::default();
        let fa = duty_to_force(a, 7.8, &mm).unwrap();
        let fb = duty_to_force(b, 7.8, &mm).unwrap();
        let fab = duty_to_force(a + b, 7.8, &mm).unwrap();
        prop_assert!((fab - fa - fb).abs() <= 1e-12 * mm.force_per_duty(7.8));
    }

    #[test]
    fn oversized_force_saturates(f in 30.0f64..1e6) {
        let mm = MotorModel::default();
        let d = force_to_duty(f, 7.8, &mm).unwrap();
        prop_assert_eq!((d.duty, d.saturated), (1.0, true));
        let d = force_to_duty(-f, 7.8, &mm).unwrap();
        prop_assert_eq!((d.duty, d.saturated), (-1.0, true));
    }

    #[test]
    fn ema_stays_within_sample_range(xs in prop::collection::vec(-100.0f64..100.0, 1..200), alpha in 0.01f64..=1.0) {
        let mut ema = EmaFilter::new(alpha).unwrap();
        let (lo, hi) = xs.iter().fold((f64::MAX, f64::MIN), |(l, h), x| (l.min(*x), h.max(*x)));
        for x in &xs {
            let e = ema.update(*x);
            prop_assert!(e >= lo - 1e-9 && e <= hi + 1e-9);
        }
    }
}

#[test]
fn ema_of_constant_is_exact() {
    let mut ema = EmaFilter::with_estimate(0.2, 0.0).unwrap();
    for _ in 0..200 {
        ema.update(3.0);
    }
    assert!((ema.estimate().unwrap() - 3.0).abs() < 1e-15);
    ema.reset();
    assert_eq!(ema.update(-1.5), -1.5);
}

#[test]
fn under_powered_plant_motor_degrades_settling() {
    let plant = PlantParams::nominal();
    let lim = SimLimits::default();
    let cond = ConditioningVector::nominal();
    let run = |plant_c_emp: f64| {
        let cfg = EmulatorConfig {
            motor: MotorModel::with_c_emp(1.2).unwrap(),
            plant_motor: Some(MotorModel::with_c_emp(plant_c_emp).unwrap()),
            jitter: JitterSpec::default(),
            ..EmulatorConfig::default()
        };
        let mut policy = ProportionalPolicy {
            gains: GainSet::default(),
        };
        emulate_loop(&mut policy, &plant, &cond, State::new(0.0, 0.0, 0.1, 0.0), &cfg, &lim).unwrap()
    };
    let matched = run(1.2);
    assert_eq!(matched.status, Status::Ok);
    let ts = settling_time(&matched, Signal::Theta, 0.05)
        .unwrap()
        .settling_time
        .unwrap();
    assert!(ts < 5.0, "{ts}");
    let weak = run(0.6);
    let duty = weak.duty.as_ref().unwrap();
    assert!(duty.iter().all(|d| d.abs() <= 1.0));
    assert!(weak.v_bat.as_ref().unwrap().iter().all(|v| *v == 7.8));
    let tw = settling_time(&weak, Signal::Theta, 0.05)
        .unwrap()
        .settling_time
        .unwrap();
    assert!(tw > ts, "weak {tw} vs matched {ts}");
}
