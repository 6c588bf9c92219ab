#![allow(dead_code)]

use rand::Rng;
use simgap::controllers::{RnnController, N_COND, N_STATE};
use simgap::plant::State;

/// Controller with O(1) readout weights so the sensitivities are not tiny.
pub fn random_controller<R: Rng>(rng: &mut R, n_h: usize, c_out: f64) -> RnnController {
    let n_in = N_STATE + N_COND;
    let mut draw = |n: usize, s: f64| (0..n).map(|_| rng.gen_range(-s..s)).collect::<Vec<_>>();
    let a = draw(n_h * n_h, 1.5 / (n_h as f64).sqrt());
    let b = draw(n_h * n_in, 1.0);
    let c = draw(n_h, 1.0 / n_h as f64);
    let b1 = draw(n_h, 0.5);
    RnnController::from_parts(n_h, n_in, a, b, c, b1, 0.3, c_out).unwrap()
}

/// Largest componentwise relative error between the analytic sensitivity and
/// central differences of the force, with the previous hidden state held fixed.
pub fn sensitivity_fd_error(ctrl: &RnnController, s: &State, cond: &[f64], h: &[f64]) -> f64 {
    let analytic = ctrl.instantaneous_sensitivity(s, cond, h).unwrap();
    let base = s.to_array();
    let scale = analytic.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut worst = 0.0f64;
    for j in 0..4 {
        let step = 1e-6 * base[j].abs().max(1.0);
        let (mut up, mut dn) = (base, base);
        up[j] += step;
        dn[j] -= step;
        let fu = ctrl.rnn_step(h, &State::from_array(up), cond).unwrap().0;
        let fd = ctrl.rnn_step(h, &State::from_array(dn), cond).unwrap().0;
        let numeric = (fu - fd) / (2.0 * step);
        let denom = analytic[j].abs().max(numeric.abs()).max(1e-6 * scale);
        worst = worst.max((analytic[j] - numeric).abs() / denom);
    }
    worst
}

/// Random state, conditioning vector and hidden state for one sensitivity case.
pub fn random_case<R: Rng>(rng: &mut R, n_h: usize) -> (State, Vec<f64>, Vec<f64>) {
    let s = State::new(
        rng.gen_range(-0.5..0.5),
        rng.gen_range(-1.0..1.0),
        rng.gen_range(-0.6..0.6),
        rng.gen_range(-3.0..3.0),
    );
    let cond = (0..N_COND).map(|_| rng.gen_range(0.5..2.0)).collect();
    let h = (0..n_h).map(|_| rng.gen_range(-0.9..0.9)).collect();
    (s, cond, h)
}
