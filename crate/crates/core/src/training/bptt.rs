//! Recorded rollouts and their hand-derived adjoint.
//!
//! The loss is `Σ_s L_s + w·L_grad`. `L_s` depends on the weights through the
//! trajectory; `L_grad` depends on them through the closed-form sensitivity
//! `c_out Σ_i C_i (1 - h_i²) B_ij`, both directly (`B`, `C`) and through the
//! hidden activations. The backward pass below differentiates both exactly,
//! with the integrator handled by per-step RK4 Jacobians. The spectral
//! rescaling of `A` is treated as a constant.

use rayon::prelude::*;

use super::loss::{capped_term, gain_deviation, DIVERGENCE_CAP};
use super::BaseScales;
#[cfg(test)]
use super::EpisodeTrace;
use crate::controllers::{ConditioningVector, GainSet, RnnController, N_STATE};
use crate::plant::{
    clamp_position, plant_force, rk4_raw_with_jacobian, Jacobian, PlantParams, SimLimits, State, ACTUATION_SIGN,
};

/// Subgradient of `|x|`, zero at the kink.
#[inline]
fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Everything needed to start one training episode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeInput {
    pub plant: PlantParams,
    pub cond: ConditioningVector,
    pub initial: State,
    pub bias: f64,
}

/// Forward record of one RNN episode.
pub(crate) struct Tape {
    n_h: usize,
    n_in: usize,
    #[cfg_attr(not(test), allow(dead_code))]
    steps: usize,
    /// Hidden states `h(-1) = 0, h(0), ..`, flattened.
    hs: Vec<f64>,
    us: Vec<f64>,
    jacs: Vec<Jacobian>,
    saturated: Vec<bool>,
    clamped: Vec<bool>,
    forces: Vec<f64>,
    states: Vec<[f64; 4]>,
    sens: Vec<[f64; 4]>,
    #[cfg_attr(not(test), allow(dead_code))]
    initial: State,
    #[cfg_attr(not(test), allow(dead_code))]
    bias: f64,
    diverged: bool,
}

impl Tape {
    #[cfg(test)]
    pub(crate) fn to_trace(&self) -> EpisodeTrace {
        EpisodeTrace {
            initial: self.initial,
            steps: self.steps,
            states: self.states.iter().map(|a| State::from_array(*a)).collect(),
            forces: self.forces.clone(),
            sensitivities: self.sens.clone(),
            bias: self.bias,
            diverged: self.diverged,
        }
    }
}

pub(crate) fn record(ctrl: &RnnController, input: &EpisodeInput, steps: usize, lim: &SimLimits) -> Tape {
    let n_h = ctrl.n_hidden();
    let n_in = ctrl.n_inputs();
    let n_cond = ctrl.n_cond();
    let mut tape = Tape {
        n_h,
        n_in,
        steps,
        hs: Vec::with_capacity((steps + 1) * n_h),
        us: Vec::with_capacity(steps * n_in),
        jacs: Vec::with_capacity(steps),
        saturated: Vec::with_capacity(steps),
        clamped: Vec::with_capacity(steps),
        forces: Vec::with_capacity(steps),
        states: Vec::with_capacity(steps),
        sens: Vec::with_capacity(steps),
        initial: input.initial,
        bias: input.bias,
        diverged: false,
    };
    tape.hs.resize(n_h, 0.0);
    let mut u = vec![0.0; n_in];
    let mut s = input.initial.to_array();
    for t in 0..steps {
        ctrl.input(&State::from_array(s), &input.cond.0[..n_cond], &mut u);
        tape.us.extend_from_slice(&u);
        tape.hs.resize((t + 2) * n_h, 0.0);
        let (prev, next) = tape.hs.split_at_mut((t + 1) * n_h);
        let h_prev = &prev[t * n_h..];
        let f_raw = ctrl.forward_into(h_prev, &u, next);
        tape.sens.push(ctrl.sensitivity_from_hidden(next));

        let total = f_raw + input.bias;
        let sat = total > lim.f_max || total < -lim.f_max || !total.is_finite();
        let f = total.clamp(-lim.f_max, lim.f_max);
        tape.saturated.push(sat);
        tape.forces.push(f);

        let (mut sn, jac) = rk4_raw_with_jacobian(&s, plant_force(f), &input.plant, lim.dt);
        if !sn.iter().all(|c| c.is_finite()) || !f.is_finite() {
            tape.diverged = true;
            break;
        }
        tape.clamped.push(clamp_position(&mut sn, lim.x_max));
        tape.jacs.push(jac);
        tape.states.push(sn);
        s = sn;
    }
    tape
}

/// Gradient buffers laid out like [`RnnController`]'s trainable parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Grads {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub b1: Vec<f64>,
    pub b2: f64,
}

impl Grads {
    pub fn zeros(ctrl: &RnnController) -> Self {
        let (n_h, n_in) = (ctrl.n_hidden(), ctrl.n_inputs());
        Self {
            a: vec![0.0; n_h * n_h],
            b: vec![0.0; n_h * n_in],
            c: vec![0.0; n_h],
            b1: vec![0.0; n_h],
            b2: 0.0,
        }
    }

    pub fn add_assign(&mut self, o: &Grads) {
        for (x, y) in self.a.iter_mut().zip(&o.a) {
            *x += y;
        }
        for (x, y) in self.b.iter_mut().zip(&o.b) {
            *x += y;
        }
        for (x, y) in self.c.iter_mut().zip(&o.c) {
            *x += y;
        }
        for (x, y) in self.b1.iter_mut().zip(&o.b1) {
            *x += y;
        }
        self.b2 += o.b2;
    }

    pub fn slices(&self) -> [&[f64]; 5] {
        [&self.a, &self.b, &self.c, &self.b1, std::slice::from_ref(&self.b2)]
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.slices().concat()
    }

    pub fn is_finite(&self) -> bool {
        self.slices().iter().all(|s| s.iter().all(|v| v.is_finite()))
    }

    pub fn norm(&self) -> f64 {
        self.slices()
            .iter()
            .flat_map(|s| s.iter())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    pub fn scale(&mut self, k: f64) {
        for v in self
            .a
            .iter_mut()
            .chain(&mut self.b)
            .chain(&mut self.c)
            .chain(&mut self.b1)
        {
            *v *= k;
        }
        self.b2 *= k;
    }
}

/// Upstream coefficients shared by every episode of a batch.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Upstream {
    /// `1 / (s_base · n_batch · T)` per state component.
    pub state_coef: [f64; 4],
    pub base: [f64; 4],
    /// `∂L/∂(per-step sensitivity)`.
    pub lambda: [f64; 4],
}

/// Accumulates `∂L/∂θ` for one tape. The `a` gradient is with respect to the
/// effective matrix.
pub(crate) fn backward(ctrl: &RnnController, tape: &Tape, up: &Upstream, g: &mut Grads) {
    let n_h = tape.n_h;
    let n_in = tape.n_in;
    let a_eff = ctrl.a_effective();
    let c_out = ctrl.c_out;
    let use_sens = up.lambda.iter().any(|&l| l != 0.0);

    let mut gh_future = vec![0.0; n_h];
    let mut gh = vec![0.0; n_h];
    let mut dz = vec![0.0; n_h];
    let mut gs = [0.0f64; 4];

    for t in (0..tape.sens.len()).rev() {
        let h_prev = &tape.hs[t * n_h..(t + 1) * n_h];
        let h = &tape.hs[(t + 1) * n_h..(t + 2) * n_h];
        let u = &tape.us[t * n_in..(t + 1) * n_in];

        let mut gf = 0.0;
        let mut gs_t = [0.0f64; 4];
        if t < tape.states.len() {
            let mut gnext = gs;
            let sn = &tape.states[t];
            for j in 0..4 {
                if capped_term(sn[j], up.base[j]) < DIVERGENCE_CAP {
                    gnext[j] += up.state_coef[j] * sign(sn[j]);
                }
            }
            if tape.clamped[t] {
                gnext[0] = 0.0;
                gnext[1] = 0.0;
            }
            let jac = &tape.jacs[t];
            let mut gfp = 0.0;
            for i in 0..4 {
                for (c, g) in gs_t.iter_mut().enumerate() {
                    *g += jac[i][c] * gnext[i];
                }
                gfp += jac[i][4] * gnext[i];
            }
            if !tape.saturated[t] {
                gf = ACTUATION_SIGN * gfp;
            }
        }

        g.b2 += gf;
        for i in 0..n_h {
            g.c[i] += gf * c_out * h[i];
            gh[i] = gh_future[i] + gf * c_out * ctrl.c[i];
        }

        if use_sens {
            for i in 0..n_h {
                let brow = &ctrl.b[i * n_in..i * n_in + N_STATE];
                let mu: f64 = (0..N_STATE).map(|j| up.lambda[j] * brow[j]).sum();
                let d = 1.0 - h[i] * h[i];
                g.c[i] += c_out * d * mu;
                let w = c_out * ctrl.c[i] * d;
                let gb = &mut g.b[i * n_in..i * n_in + N_STATE];
                for j in 0..N_STATE {
                    gb[j] += up.lambda[j] * w;
                }
                gh[i] += -2.0 * c_out * ctrl.c[i] * h[i] * mu;
            }
        }

        for i in 0..n_h {
            dz[i] = gh[i] * (1.0 - h[i] * h[i]);
        }
        gh_future.iter_mut().for_each(|x| *x = 0.0);
        for i in 0..n_h {
            let d = dz[i];
            if d == 0.0 {
                continue;
            }
            g.b1[i] += d;
            let ga = &mut g.a[i * n_h..(i + 1) * n_h];
            for (gak, hk) in ga.iter_mut().zip(h_prev) {
                *gak += d * hk;
            }
            let arow = &a_eff[i * n_h..(i + 1) * n_h];
            for (ghk, aik) in gh_future.iter_mut().zip(arow) {
                *ghk += aik * d;
            }
            let gb = &mut g.b[i * n_in..(i + 1) * n_in];
            for (gbk, uk) in gb.iter_mut().zip(u) {
                *gbk += d * uk;
            }
            let brow = &ctrl.b[i * n_in..i * n_in + N_STATE];
            for j in 0..N_STATE {
                gs_t[j] += brow[j] * d;
            }
        }
        gs = gs_t;
    }
}

/// Loss terms of one batch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatchLoss {
    pub state: [f64; 4],
    pub gains: [f64; 4],
    /// Unweighted gain deviation.
    pub l_grad: f64,
    pub total: f64,
    pub diverged: usize,
}

/// Settings shared by the loss evaluation and its gradient.
#[derive(Debug, Clone, Copy)]
pub struct LossSpec {
    pub steps: usize,
    pub limits: SimLimits,
    pub base: BaseScales,
    pub gains: GainSet,
    pub gc_enabled: bool,
    pub gc_weight: f64,
}

pub(crate) struct BatchForward {
    pub tapes: Vec<Tape>,
    pub loss: BatchLoss,
}

pub(crate) fn forward_batch(ctrl: &RnnController, inputs: &[EpisodeInput], spec: &LossSpec) -> BatchForward {
    let tapes: Vec<Tape> = inputs
        .par_iter()
        .map(|inp| record(ctrl, inp, spec.steps, &spec.limits))
        .collect();
    let loss = batch_loss(&tapes, spec);
    BatchForward { tapes, loss }
}

fn batch_loss(tapes: &[Tape], spec: &LossSpec) -> BatchLoss {
    let base = spec.base.as_array();
    let mut sums = [0.0; 4];
    let mut sens_sum = [0.0; 4];
    let mut n_sens = 0usize;
    let mut diverged = 0;
    for tape in tapes {
        for s in &tape.states {
            for j in 0..4 {
                sums[j] += capped_term(s[j], base[j]);
            }
        }
        let missing = (spec.steps - tape.states.len()) as f64;
        for s in sums.iter_mut() {
            *s += missing * DIVERGENCE_CAP;
        }
        for s in &tape.sens {
            for j in 0..4 {
                sens_sum[j] += s[j];
            }
        }
        n_sens += tape.sens.len();
        diverged += tape.diverged as usize;
    }
    let n = (tapes.len() * spec.steps) as f64;
    let state = sums.map(|s| s / n);
    let gains = sens_sum.map(|s| -s / n_sens.max(1) as f64);
    let l_grad = gain_deviation(&gains, &spec.gains);
    let total = state.iter().sum::<f64>() + if spec.gc_enabled { spec.gc_weight * l_grad } else { 0.0 };
    BatchLoss {
        state,
        gains,
        l_grad,
        total,
        diverged,
    }
}

pub(crate) fn backward_batch(ctrl: &RnnController, fwd: &BatchForward, spec: &LossSpec) -> Grads {
    let base = spec.base.as_array();
    let n = (fwd.tapes.len() * spec.steps) as f64;
    let n_sens: usize = fwd.tapes.iter().map(|t| t.sens.len()).sum();
    let mut lambda = [0.0; 4];
    if spec.gc_enabled {
        let k = spec.gains.nominal();
        for j in 0..4 {
            let dev = fwd.loss.gains[j] - k[j];
            lambda[j] = -spec.gc_weight * 0.25 * sign(dev) / n_sens as f64;
        }
    }
    let up = Upstream {
        state_coef: base.map(|b| 1.0 / (b * n)),
        base,
        lambda,
    };
    let parts: Vec<Grads> = fwd
        .tapes
        .par_iter()
        .map(|tape| {
            let mut g = Grads::zeros(ctrl);
            backward(ctrl, tape, &up, &mut g);
            g
        })
        .collect();
    let mut total = Grads::zeros(ctrl);
    for p in &parts {
        total.add_assign(p);
    }
    let inv = 1.0 / ctrl.a_scale();
    total.a.iter_mut().for_each(|x| *x *= inv);
    total
}

/// Loss and its gradient with respect to the raw parameters.
pub fn loss_and_grad(ctrl: &RnnController, inputs: &[EpisodeInput], spec: &LossSpec) -> (BatchLoss, Grads) {
    let fwd = forward_batch(ctrl, inputs, spec);
    let g = backward_batch(ctrl, &fwd, spec);
    (fwd.loss, g)
}

/// Loss only.
pub fn loss_only(ctrl: &RnnController, inputs: &[EpisodeInput], spec: &LossSpec) -> BatchLoss {
    forward_batch(ctrl, inputs, spec).loss
}

/// Adam with bias correction.
#[derive(Debug, Clone)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(n_params: usize) -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            t: 0,
        }
    }

    pub fn step(&mut self, ctrl: &mut RnnController, g: &Grads, lr: f64) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
        let mut k = 0;
        for (params, grads) in ctrl.params_mut().into_iter().zip(g.slices()) {
            for (p, gi) in params.iter_mut().zip(grads) {
                let m = &mut self.m[k];
                let v = &mut self.v[k];
                *m = b1 * *m + (1.0 - b1) * gi;
                *v = b2 * *v + (1.0 - b2) * gi * gi;
                let mhat = *m / bc1;
                let vhat = *v / bc2;
                *p -= lr * mhat / (vhat.sqrt() + eps);
                k += 1;
            }
        }
        ctrl.refresh_stabilization();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controllers::RnnPolicy;
    use crate::training::episode::run_episode_from;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn tape_rollout_matches_policy_rollout() {
        let ctrl = RnnController::init_weights(&mut ChaCha8Rng::seed_from_u64(4), 12, 9, 30.0).unwrap();
        let input = EpisodeInput {
            plant: PlantParams::nominal(),
            cond: ConditioningVector::nominal(),
            initial: State::new(0.01, 0.0, 0.1, -0.02),
            bias: 0.4,
        };
        let lim = SimLimits::default();
        let tape = record(&ctrl, &input, 120, &lim);
        let mut pol = RnnPolicy::new(&ctrl);
        let tr = run_episode_from(
            &mut pol,
            &input.plant,
            &input.cond,
            input.initial,
            input.bias,
            120,
            &lim,
        );
        assert_eq!(tape.to_trace(), tr);
    }

    #[test]
    fn adam_moves_against_gradient() {
        let mut ctrl = RnnController::zeros(2, 4, 1.0);
        let mut g = Grads::zeros(&ctrl);
        g.b2 = 2.0;
        g.c[0] = -1.0;
        let mut opt = Adam::new(ctrl.n_params());
        opt.step(&mut ctrl, &g, 0.1);
        assert!((ctrl.b2 + 0.1).abs() < 1e-6);
        assert!((ctrl.c[0] - 0.1).abs() < 1e-6);
        assert_eq!(ctrl.c[1], 0.0);
    }
}
