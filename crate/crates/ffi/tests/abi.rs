use std::ffi::{CStr, CString};
use std::ptr;

use simgap::controllers::RnnController;
use simgap::plant::{rk4_step, PlantParams, SimLimits, State};
use simgap_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(simgap_last_error()) }
        .to_string_lossy()
        .into_owned()
}

#[test]
fn proportional_handle_steps_and_reports_gains() {
    let gains = [13.0, 15.0, 31.0, 1.6];
    let mut h = ptr::null_mut();
    unsafe {
        assert_eq!(simgap_controller_proportional(gains.as_ptr(), &mut h), SimgapStatus::Ok);
        assert_eq!(simgap_controller_n_cond(h), 0);
        let s = [0.1, 0.2, -0.3, 0.5];
        let (mut f, mut sens) = (0.0, [0.0; 4]);
        assert_eq!(
            simgap_controller_step(h, s.as_ptr(), ptr::null(), 0, &mut f, sens.as_mut_ptr()),
            SimgapStatus::Ok
        );
        assert_eq!(f, -(13.0 * 0.1 + 15.0 * 0.2 - 31.0 * 0.3 + 1.6 * 0.5));
        assert_eq!(sens, [-13.0, -15.0, -31.0, -1.6]);
        simgap_controller_free(h);
    }
}

#[test]
fn rnn_handle_matches_library_rollout() {
    use rand::SeedableRng;
    let ctrl = RnnController::init_weights(&mut rand_chacha::ChaCha8Rng::seed_from_u64(2), 8, 9, 300.0).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("w.json");
    ctrl.save(&path).unwrap();
    let cpath = CString::new(path.to_str().unwrap()).unwrap();
    let cond = [1.0; 5];
    let mut h = ptr::null_mut();
    unsafe {
        assert_eq!(simgap_controller_load(cpath.as_ptr(), &mut h), SimgapStatus::Ok);
        assert_eq!(simgap_controller_n_cond(h), 5);
        let mut hidden = vec![0.0; 8];
        for k in 0..3 {
            let s = State::new(0.0, 0.1 * k as f64, 0.05, -0.2);
            let mut f = 0.0;
            let mut sens = [0.0; 4];
            let st = simgap_controller_step(h, s.to_array().as_ptr(), cond.as_ptr(), 5, &mut f, sens.as_mut_ptr());
            assert_eq!(st, SimgapStatus::Ok);
            let want_sens = ctrl.instantaneous_sensitivity(&s, &cond, &hidden).unwrap();
            let (want_f, next) = ctrl.rnn_step(&hidden, &s, &cond).unwrap();
            assert_eq!(f, want_f);
            assert_eq!(sens, want_sens);
            hidden = next;
        }
        assert_eq!(simgap_controller_reset(h), SimgapStatus::Ok);
        let s = [0.0, 0.0, 0.05, -0.2];
        let mut f = 0.0;
        simgap_controller_step(h, s.as_ptr(), cond.as_ptr(), 5, &mut f, ptr::null_mut());
        let (want, _) = ctrl.rnn_step(&[0.0; 8], &State::from_array(s), &cond).unwrap();
        assert_eq!(f, want);

        let mut g = 0.0;
        let st = simgap_controller_step(h, s.as_ptr(), cond.as_ptr(), 4, &mut g, ptr::null_mut());
        assert_eq!(st, SimgapStatus::InvalidArgument);
        assert!(last_error().contains("dimension"), "{}", last_error());
        simgap_controller_free(h);
    }
}

#[test]
fn load_errors_are_reported() {
    let mut h = ptr::null_mut();
    let missing = CString::new("/nonexistent/w.json").unwrap();
    unsafe {
        assert_eq!(simgap_controller_load(missing.as_ptr(), &mut h), SimgapStatus::Io);
        assert!(h.is_null());
        assert!(!last_error().is_empty());
        assert_eq!(simgap_controller_load(ptr::null(), &mut h), SimgapStatus::NullPointer);
        assert_eq!(simgap_controller_reset(ptr::null_mut()), SimgapStatus::NullPointer);
        simgap_controller_free(ptr::null_mut());
    }
}

#[test]
fn rk4_step_matches_library_and_allows_aliasing() {
    let mut p = SimgapPlant {
        m: 0.0,
        m_c: 0.0,
        total_mass: 0.0,
        l: 0.0,
        j: 0.0,
        g: 0.0,
        d_c: 0.0,
        d_p: 0.0,
    };
    unsafe {
        assert_eq!(simgap_plant_nominal(&mut p), SimgapStatus::Ok);
        let mut s = [0.01, 0.0, 0.2, 0.1];
        let want = rk4_step(
            &State::from_array(s),
            1.5,
            &PlantParams::nominal(),
            &SimLimits::default(),
        )
        .unwrap();
        let sp = s.as_mut_ptr();
        assert_eq!(simgap_rk4_step(&p, sp, 1.5, 0.01, 10.0, sp), SimgapStatus::Ok);
        assert_eq!(s, want.to_array());
        assert_eq!(simgap_plant_force(2.0), -2.0);

        let mut bad = p;
        bad.m = -1.0;
        let mut out = [0.0; 4];
        assert_ne!(
            simgap_rk4_step(&bad, s.as_ptr(), 0.0, 0.01, 10.0, out.as_mut_ptr()),
            SimgapStatus::Ok
        );
        assert_eq!(
            simgap_rk4_step(&p, s.as_ptr(), f64::NAN, 0.01, 10.0, out.as_mut_ptr()),
            SimgapStatus::Numerical
        );
        assert_eq!(
            simgap_rk4_step(&p, s.as_ptr(), 0.0, 0.0, 10.0, out.as_mut_ptr()),
            SimgapStatus::InvalidArgument
        );
    }
}

#[test]
fn motor_conversions() {
    unsafe {
        let mut f = 0.0;
        assert_eq!(simgap_duty_to_force(1.0, 7.6, 1.5, &mut f), SimgapStatus::Ok);
        assert!((f - 20.62292749658003).abs() < 1e-9);
        let (mut d, mut sat) = (0.0, -1);
        assert_eq!(
            simgap_force_to_duty(f / 2.0, 7.6, 1.5, &mut d, &mut sat),
            SimgapStatus::Ok
        );
        assert!((d - 0.5).abs() < 1e-15);
        assert_eq!(sat, 0);
        assert_eq!(
            simgap_force_to_duty(100.0, 7.6, 1.5, &mut d, &mut sat),
            SimgapStatus::Ok
        );
        assert_eq!((d, sat), (1.0, 1));
        assert_eq!(
            simgap_duty_to_force(1.5, 7.6, 1.5, &mut f),
            SimgapStatus::InvalidArgument
        );
        assert_eq!(
            simgap_force_to_duty(1.0, -1.0, 1.5, &mut d, ptr::null_mut()),
            SimgapStatus::InvalidArgument
        );
    }
}

#[test]
fn settling_time_through_abi() {
    let dt = 1e-3;
    let t: Vec<f64> = (0..8000).map(|k| k as f64 * dt).collect();
    let y: Vec<f64> = t.iter().map(|t| (-t).exp()).collect();
    let (mut ts, mut ok) = (0.0, 0);
    unsafe {
        assert_eq!(
            simgap_settling_time(t.as_ptr(), y.as_ptr(), t.len(), 0.05, &mut ts, &mut ok),
            SimgapStatus::Ok
        );
        assert_eq!(ok, 1);
        assert!((ts - 20f64.ln()).abs() <= dt);
        let flat = vec![1.0; t.len()];
        assert_eq!(
            simgap_settling_time(t.as_ptr(), flat.as_ptr(), t.len(), 0.05, &mut ts, &mut ok),
            SimgapStatus::Ok
        );
        assert_eq!(ok, 0);
        assert!(ts.is_nan());
        assert_eq!(
            simgap_settling_time(t.as_ptr(), y.as_ptr(), 0, 0.05, &mut ts, &mut ok),
            SimgapStatus::InvalidArgument
        );
    }
}
