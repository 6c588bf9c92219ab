//! Proportional baseline and the conditioned Elman RNN controller.
//!
//! Both controllers emit forces in the actuation frame (see
//! [`crate::plant::plant_force`]). The RNN computes
//! `f = c_out * C tanh(A h + B u + b1) + b2` with `u = [x, v, θ, ω, cond...]`.
//! Its recurrence matrix is stored raw and rescaled so that the effective
//! matrix has spectral norm at most `1 + ε_A`.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::plant::{PlantParams, State, DC_NOM, DP_NOM, L_NOM, M_NOM, POLE_MASS_NOM};

pub const N_STATE: usize = 4;
pub const N_COND: usize = 5;
pub const DEFAULT_HIDDEN: usize = 256;
pub const DEFAULT_C_OUT: f64 = 300.0;
/// Allowed excess of the recurrence matrix's spectral norm over one.
pub const EPS_A: f64 = 0.05;
pub const WEIGHT_FORMAT_VERSION: u32 = 1;

/// Relative slack below which the stabilizer leaves an already-scaled matrix alone,
/// so that reloading a saved controller reproduces it exactly.
const STABILIZE_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainRange {
    pub lower: f64,
    pub nominal: f64,
    pub upper: f64,
}

impl GainRange {
    pub const fn new(lower: f64, nominal: f64, upper: f64) -> Self {
        Self { lower, nominal, upper }
    }
}

/// Working proportional gains for `(x, v, θ, ω)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GainSet {
    pub k_x: GainRange,
    pub k_v: GainRange,
    pub k_theta: GainRange,
    pub k_omega: GainRange,
}

impl Default for GainSet {
    fn default() -> Self {
        Self {
            k_x: GainRange::new(1.0, 13.0, 20.0),
            k_v: GainRange::new(12.0, 15.0, 17.0),
            k_theta: GainRange::new(25.0, 31.0, 40.0),
            k_omega: GainRange::new(1.3, 1.6, 2.0),
        }
    }
}

impl GainSet {
    pub fn from_nominal(k: [f64; 4]) -> Self {
        Self {
            k_x: GainRange::new(k[0], k[0], k[0]),
            k_v: GainRange::new(k[1], k[1], k[1]),
            k_theta: GainRange::new(k[2], k[2], k[2]),
            k_omega: GainRange::new(k[3], k[3], k[3]),
        }
    }

    pub fn nominal(&self) -> [f64; 4] {
        [
            self.k_x.nominal,
            self.k_v.nominal,
            self.k_theta.nominal,
            self.k_omega.nominal,
        ]
    }

    fn ranges(&self) -> [(&'static str, GainRange); 4] {
        [
            ("k_x", self.k_x),
            ("k_v", self.k_v),
            ("k_theta", self.k_theta),
            ("k_omega", self.k_omega),
        ]
    }

    pub fn validate(&self) -> Result<()> {
        for (k, r) in self.ranges() {
            if !(r.lower <= r.nominal && r.nominal <= r.upper) {
                return Err(Error::invalid(k, "bounds must satisfy lower <= nominal <= upper"));
            }
            if !(r.nominal > 0.0) {
                return Err(Error::invalid(k, "nominal gain must be > 0"));
            }
        }
        Ok(())
    }
}

/// `-k_x x - k_v v - k_θ θ - k_ω ω`.
pub fn proportional_force(s: &State, k: &GainSet) -> f64 {
    let g = k.nominal();
    -g[0] * s.x - g[1] * s.v - g[2] * s.theta - g[3] * s.omega
}

/// Plant parameters normalized by their nominal values: `(M, m, l, D_c, D_p)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditioningVector(pub [f64; N_COND]);

impl ConditioningVector {
    pub fn from_plant(p: &PlantParams) -> Self {
        Self([
            p.total_mass / M_NOM,
            p.m / POLE_MASS_NOM,
            p.l / L_NOM,
            p.d_c / DC_NOM,
            p.d_p / DP_NOM,
        ])
    }

    pub fn nominal() -> Self {
        Self([1.0; N_COND])
    }

    /// Raw physical values `(M, m, l, D_c, D_p)` this vector encodes.
    pub fn physical(&self) -> [f64; N_COND] {
        let n = [M_NOM, POLE_MASS_NOM, L_NOM, DC_NOM, DP_NOM];
        let mut out = [0.0; N_COND];
        for i in 0..N_COND {
            out[i] = self.0[i] * n[i];
        }
        out
    }

    pub fn from_physical(values: [f64; N_COND]) -> Result<Self> {
        let n = [M_NOM, POLE_MASS_NOM, L_NOM, DC_NOM, DP_NOM];
        let mut out = [0.0; N_COND];
        for i in 0..N_COND {
            if !(values[i].is_finite() && values[i] > 0.0) {
                return Err(Error::invalid("context", "conditioning values must be finite and > 0"));
            }
            out[i] = values[i] / n[i];
        }
        Ok(Self(out))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Largest singular value of a row-major `n × n` matrix by power iteration on `AᵀA`.
pub fn spectral_norm(a: &[f64], n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let mut v = vec![1.0 / (n as f64).sqrt(); n];
    let mut av = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut sigma = 0.0;
    for _ in 0..5000 {
        matvec(a, n, n, &v, &mut av);
        // w = Aᵀ (A v)
        w.iter_mut().for_each(|x| *x = 0.0);
        for i in 0..n {
            let row = &a[i * n..(i + 1) * n];
            let s = av[i];
            for (wj, aij) in w.iter_mut().zip(row) {
                *wj += aij * s;
            }
        }
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        let next = norm.sqrt();
        for (vi, wi) in v.iter_mut().zip(&w) {
            *vi = wi / norm;
        }
        let done = (next - sigma).abs() <= 1e-13 * next;
        sigma = next;
        if done {
            break;
        }
    }
    sigma
}

#[inline]
fn matvec(a: &[f64], rows: usize, cols: usize, x: &[f64], out: &mut [f64]) {
    for i in 0..rows {
        let row = &a[i * cols..(i + 1) * cols];
        out[i] = row.iter().zip(x).map(|(p, q)| p * q).sum();
    }
}

/// Weights of the single-layer Elman controller.
#[derive(Debug, Clone, PartialEq)]
pub struct RnnController {
    n_h: usize,
    n_in: usize,
    /// Raw recurrence parameter, row-major `n_h × n_h`.
    pub a_raw: Vec<f64>,
    a_eff: Vec<f64>,
    a_scale: f64,
    /// Input matrix, row-major `n_h × n_in`.
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub b1: Vec<f64>,
    pub b2: f64,
    pub c_out: f64,
}

/// Output of one controller evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlOutput {
    pub force: f64,
    /// `∂f/∂(x, v, θ, ω)` with the previous hidden state held fixed.
    pub sensitivity: [f64; 4],
}

impl RnnController {
    pub fn zeros(n_h: usize, n_in: usize, c_out: f64) -> Self {
        Self {
            n_h,
            n_in,
            a_raw: vec![0.0; n_h * n_h],
            a_eff: vec![0.0; n_h * n_h],
            a_scale: 1.0,
            b: vec![0.0; n_h * n_in],
            c: vec![0.0; n_h],
            b1: vec![0.0; n_h],
            b2: 0.0,
            c_out,
        }
    }

    pub fn n_hidden(&self) -> usize {
        self.n_h
    }

    pub fn n_inputs(&self) -> usize {
        self.n_in
    }

    pub fn n_cond(&self) -> usize {
        self.n_in - N_STATE
    }

    /// Effective recurrence matrix used by the forward pass.
    pub fn a_effective(&self) -> &[f64] {
        &self.a_eff
    }

    /// Divisor applied to `a_raw`, i.e. `max(1, ρ̂(a_raw) / (1 + ε_A))`.
    pub fn a_scale(&self) -> f64 {
        self.a_scale
    }

    /// Recomputes the effective recurrence matrix from `a_raw`.
    pub fn refresh_stabilization(&mut self) {
        let rho = spectral_norm(&self.a_raw, self.n_h);
        let limit = 1.0 + EPS_A;
        self.a_scale = if rho > limit * (1.0 + STABILIZE_SLACK) {
            rho / limit
        } else {
            1.0
        };
        let inv = 1.0 / self.a_scale;
        self.a_eff.clear();
        self.a_eff.extend(self.a_raw.iter().map(|a| a * inv));
    }

    /// Recomputes the effective matrix from `a_raw` keeping the current scale.
    pub(crate) fn apply_frozen_scale(&mut self) {
        let inv = 1.0 / self.a_scale;
        for (e, r) in self.a_eff.iter_mut().zip(&self.a_raw) {
            *e = r * inv;
        }
    }

    /// Sets every trainable weight explicitly. `a` is the raw recurrence matrix.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        n_h: usize,
        n_in: usize,
        a: Vec<f64>,
        b: Vec<f64>,
        c: Vec<f64>,
        b1: Vec<f64>,
        b2: f64,
        c_out: f64,
    ) -> Result<Self> {
        if n_h == 0 {
            return Err(Error::invalid("n_h", "must be >= 1"));
        }
        if n_in < N_STATE {
            return Err(Error::invalid("n_in", "must be >= 4"));
        }
        let checks = [
            ("A", n_h * n_h, a.len()),
            ("B", n_h * n_in, b.len()),
            ("C", n_h, c.len()),
            ("b1", n_h, b1.len()),
        ];
        for (what, expected, got) in checks {
            if expected != got {
                return Err(Error::Dimension { what, expected, got });
            }
        }
        let all_finite = a
            .iter()
            .chain(&b)
            .chain(&c)
            .chain(&b1)
            .chain([&b2, &c_out])
            .all(|v| v.is_finite());
        if !all_finite {
            return Err(Error::NonFinite("controller weights"));
        }
        let mut ctrl = Self {
            n_h,
            n_in,
            a_raw: a,
            a_eff: Vec::new(),
            a_scale: 1.0,
            b,
            c,
            b1,
            b2,
            c_out,
        };
        ctrl.refresh_stabilization();
        Ok(ctrl)
    }

    /// Uniform initialization in `±1/sqrt(fan_in)`; `b2 = 0`. The readout `C`
    /// is further divided by `c_out` so the initial force is O(1) N rather
    /// than saturating the actuator.
    pub fn init_weights<R: Rng + ?Sized>(rng: &mut R, n_h: usize, n_in: usize, c_out: f64) -> Result<Self> {
        if n_h == 0 {
            return Err(Error::invalid("n_h", "must be >= 1"));
        }
        if n_in < N_STATE {
            return Err(Error::invalid("n_in", "must be >= 4"));
        }
        let bound_h = 1.0 / (n_h as f64).sqrt();
        let bound_in = 1.0 / (n_in as f64).sqrt();
        let mut draw = |n: usize, bound: f64| -> Vec<f64> { (0..n).map(|_| rng.gen_range(-bound..=bound)).collect() };
        let a = draw(n_h * n_h, bound_h);
        let b = draw(n_h * n_in, bound_in);
        let b1 = draw(n_h, bound_in);
        let c = draw(n_h, bound_h / c_out.abs().max(1.0));
        Self::from_parts(n_h, n_in, a, b, c, b1, 0.0, c_out)
    }

    fn check_dims(&self, h: &[f64], cond: &[f64]) -> Result<()> {
        if h.len() != self.n_h {
            return Err(Error::Dimension {
                what: "hidden state",
                expected: self.n_h,
                got: h.len(),
            });
        }
        if cond.len() != self.n_cond() {
            return Err(Error::Dimension {
                what: "conditioning vector",
                expected: self.n_cond(),
                got: cond.len(),
            });
        }
        Ok(())
    }

    /// Writes `u = [s, cond]` into `u`.
    #[inline]
    pub(crate) fn input(&self, s: &State, cond: &[f64], u: &mut [f64]) {
        u[..N_STATE].copy_from_slice(&s.to_array());
        u[N_STATE..].copy_from_slice(cond);
    }

    /// Computes `h' = tanh(A h + B u + b1)` into `h_out` and returns the force.
    pub(crate) fn forward_into(&self, h: &[f64], u: &[f64], h_out: &mut [f64]) -> f64 {
        let (n_h, n_in) = (self.n_h, self.n_in);
        let mut f = 0.0;
        for i in 0..n_h {
            let arow = &self.a_eff[i * n_h..(i + 1) * n_h];
            let brow = &self.b[i * n_in..(i + 1) * n_in];
            let mut z = self.b1[i];
            z += arow.iter().zip(h).map(|(a, x)| a * x).sum::<f64>();
            z += brow.iter().zip(u).map(|(b, x)| b * x).sum::<f64>();
            let hn = z.tanh();
            h_out[i] = hn;
            f += self.c[i] * hn;
        }
        self.c_out * f + self.b2
    }

    /// `c_out · C · diag(1 - h'²) · B[:, state]` for a post-activation hidden vector.
    pub fn sensitivity_from_hidden(&self, h_new: &[f64]) -> [f64; 4] {
        let mut out = [0.0; 4];
        for (i, hn) in h_new.iter().enumerate() {
            let w = self.c_out * self.c[i] * (1.0 - hn * hn);
            let brow = &self.b[i * self.n_in..i * self.n_in + N_STATE];
            for j in 0..N_STATE {
                out[j] += w * brow[j];
            }
        }
        out
    }

    /// One recurrent step from hidden state `h`. Returns the unclamped force and `h'`.
    pub fn rnn_step(&self, h: &[f64], s: &State, cond: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.check_dims(h, cond)?;
        let mut u = vec![0.0; self.n_in];
        self.input(s, cond, &mut u);
        let mut h_out = vec![0.0; self.n_h];
        let f = self.forward_into(h, &u, &mut h_out);
        Ok((f, h_out))
    }

    /// Single-step input sensitivity `∂f/∂(x, v, θ, ω)` at hidden state `h`.
    pub fn instantaneous_sensitivity(&self, s: &State, cond: &[f64], h: &[f64]) -> Result<[f64; 4]> {
        let (_, h_new) = self.rnn_step(h, s, cond)?;
        Ok(self.sensitivity_from_hidden(&h_new))
    }

    /// Bound on the pre-clamp force magnitude: `c_out ‖C‖₁ + |b2|`.
    pub fn output_bound(&self) -> f64 {
        self.c_out.abs() * self.c.iter().map(|c| c.abs()).sum::<f64>() + self.b2.abs()
    }

    pub fn to_weight_file(&self) -> WeightFile {
        WeightFile {
            format_version: WEIGHT_FORMAT_VERSION,
            n_h: self.n_h,
            n_in: self.n_in,
            c_out: self.c_out,
            b2: self.b2,
            a: self.a_eff.clone(),
            b: self.b.clone(),
            c: self.c.clone(),
            b1: self.b1.clone(),
        }
    }

    pub fn from_weight_file(w: WeightFile) -> Result<Self> {
        if w.format_version != WEIGHT_FORMAT_VERSION {
            return Err(Error::format(
                "weight file",
                format!("unsupported format_version {}", w.format_version),
            ));
        }
        let mut ctrl = Self::from_parts(w.n_h, w.n_in, w.a, w.b, w.c, w.b1, w.b2, w.c_out)?;
        // The stored matrix is already stabilized; use it verbatim.
        ctrl.a_eff.clone_from(&ctrl.a_raw);
        ctrl.a_scale = 1.0;
        Ok(ctrl)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(&self.to_weight_file())?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let w: WeightFile = serde_json::from_str(&text)?;
        Self::from_weight_file(w)
    }

    /// Trainable parameter slices in a fixed order: A (raw), B, C, b1, b2.
    pub(crate) fn params_mut(&mut self) -> [&mut [f64]; 5] {
        [
            &mut self.a_raw,
            &mut self.b,
            &mut self.c,
            &mut self.b1,
            std::slice::from_mut(&mut self.b2),
        ]
    }

    pub fn n_params(&self) -> usize {
        self.a_raw.len() + self.b.len() + self.c.len() + self.b1.len() + 1
    }
}

/// On-disk controller weights. Matrices are flat row-major arrays; `A` holds
/// the effective (already stabilized) recurrence matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightFile {
    pub format_version: u32,
    pub n_h: usize,
    pub n_in: usize,
    pub c_out: f64,
    pub b2: f64,
    #[serde(rename = "A")]
    pub a: Vec<f64>,
    #[serde(rename = "B")]
    pub b: Vec<f64>,
    #[serde(rename = "C")]
    pub c: Vec<f64>,
    pub b1: Vec<f64>,
}

/// A controller with per-episode state, stepped once per control tick.
pub trait Policy {
    fn reset(&mut self);
    fn step(&mut self, s: &State, cond: &ConditioningVector) -> ControlOutput;
}

pub struct ProportionalPolicy {
    pub gains: GainSet,
}

impl Policy for ProportionalPolicy {
    fn reset(&mut self) {}

    fn step(&mut self, s: &State, _cond: &ConditioningVector) -> ControlOutput {
        let k = self.gains.nominal();
        ControlOutput {
            force: proportional_force(s, &self.gains),
            sensitivity: [-k[0], -k[1], -k[2], -k[3]],
        }
    }
}

/// RNN weights plus a private hidden state; [`Policy::reset`] zeroes it.
pub struct RnnPolicy<'a> {
    ctrl: &'a RnnController,
    h: Vec<f64>,
    h_next: Vec<f64>,
    u: Vec<f64>,
}

impl<'a> RnnPolicy<'a> {
    pub fn new(ctrl: &'a RnnController) -> Self {
        Self {
            ctrl,
            h: vec![0.0; ctrl.n_h],
            h_next: vec![0.0; ctrl.n_h],
            u: vec![0.0; ctrl.n_in],
        }
    }

    pub fn hidden(&self) -> &[f64] {
        &self.h
    }
}

impl Policy for RnnPolicy<'_> {
    fn reset(&mut self) {
        self.h.iter_mut().for_each(|x| *x = 0.0);
    }

    fn step(&mut self, s: &State, cond: &ConditioningVector) -> ControlOutput {
        let n_cond = self.ctrl.n_cond();
        self.ctrl.input(s, &cond.0[..n_cond], &mut self.u);
        let force = self.ctrl.forward_into(&self.h, &self.u, &mut self.h_next);
        let sensitivity = self.ctrl.sensitivity_from_hidden(&self.h_next);
        std::mem::swap(&mut self.h, &mut self.h_next);
        ControlOutput { force, sensitivity }
    }
}

/// Controller choice for rollouts that do not need gradients.
pub enum AnyController {
    Proportional(GainSet),
    Rnn(RnnController),
}

impl AnyController {
    pub fn policy(&self) -> Box<dyn Policy + '_> {
        match self {
            AnyController::Proportional(g) => Box::new(ProportionalPolicy { gains: *g }),
            AnyController::Rnn(r) => Box::new(RnnPolicy::new(r)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn proportional_examples() {
        let k = GainSet::default();
        assert_eq!(proportional_force(&State::ZERO, &k), 0.0);
        assert_eq!(proportional_force(&State::new(1.0, 0.0, 0.0, 0.0), &k), -13.0);
        let f = proportional_force(&State::new(0.0, 0.0, 0.1, -0.5), &k);
        assert!((f - (-2.3)).abs() < 1e-12);
    }

    #[test]
    fn default_gains_are_valid() {
        GainSet::default().validate().unwrap();
        let mut g = GainSet::default();
        g.k_v.lower = 16.0;
        assert!(g.validate().is_err());
    }

    #[test]
    fn zero_weights_give_zero_output() {
        let ctrl = RnnController::zeros(8, 9, 300.0);
        let (f, h) = ctrl
            .rnn_step(&[0.0; 8], &State::new(0.1, 0.2, 0.3, 0.4), &[1.0; 5])
            .unwrap();
        assert_eq!(f, 0.0);
        assert!(h.iter().all(|&x| x == 0.0));
        let s = ctrl
            .instantaneous_sensitivity(&State::new(0.1, 0.2, 0.3, 0.4), &[1.0; 5], &[0.0; 8])
            .unwrap();
        assert_eq!(s, [0.0; 4]);
    }

    #[test]
    fn scalar_hand_evaluation() {
        let mut b = vec![0.0; 9];
        b[0] = 1.0;
        let ctrl = RnnController::from_parts(1, 9, vec![0.0], b, vec![1.0], vec![0.0], 0.0, 300.0).unwrap();
        let (f, h) = ctrl
            .rnn_step(&[0.0], &State::new(0.001, 0.0, 0.0, 0.0), &[0.0; 5])
            .unwrap();
        assert!((f - 300.0 * 0.001f64.tanh()).abs() < 1e-12);
        assert!((f - 0.2999999).abs() < 1e-7);
        assert_eq!(h, vec![0.001f64.tanh()]);
    }

    #[test]
    fn two_step_recurrence_unrolls_by_hand() {
        // A = [1] is within the spectral bound, so it is used as-is.
        let mut b = vec![0.0; 4];
        b[2] = 0.5;
        let ctrl = RnnController::from_parts(1, 4, vec![1.0], b, vec![2.0], vec![0.1], 0.3, 10.0).unwrap();
        assert_eq!(ctrl.a_scale(), 1.0);
        let s = State::new(0.0, 0.0, 0.2, 0.0);
        let (f1, h1) = ctrl.rnn_step(&[0.0], &s, &[]).unwrap();
        let (f2, h2) = ctrl.rnn_step(&h1, &s, &[]).unwrap();
        let h1_hand = (0.5f64 * 0.2 + 0.1).tanh();
        let h2_hand = (h1_hand + 0.5 * 0.2 + 0.1).tanh();
        assert_eq!(h1[0], h1_hand);
        assert_eq!(h2[0], h2_hand);
        assert!((f1 - (10.0 * 2.0 * h1_hand + 0.3)).abs() < 1e-12);
        assert!((f2 - (10.0 * 2.0 * h2_hand + 0.3)).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let ctrl = RnnController::zeros(4, 9, 300.0);
        assert!(ctrl.rnn_step(&[0.0; 3], &State::ZERO, &[1.0; 5]).is_err());
        assert!(ctrl.rnn_step(&[0.0; 4], &State::ZERO, &[1.0; 4]).is_err());
        assert!(
            RnnController::from_parts(2, 4, vec![0.0; 3], vec![0.0; 8], vec![0.0; 2], vec![0.0; 2], 0.0, 1.0).is_err()
        );
    }

    #[test]
    fn init_is_deterministic_and_bounded() {
        let a = RnnController::init_weights(&mut ChaCha8Rng::seed_from_u64(9), 32, 9, 300.0).unwrap();
        let b = RnnController::init_weights(&mut ChaCha8Rng::seed_from_u64(9), 32, 9, 300.0).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.b2, 0.0);
        assert!(spectral_norm(a.a_effective(), 32) <= 1.0 + EPS_A + 1e-8);
        let (f, _) = a.rnn_step(&[0.0; 32], &State::ZERO, &[0.0; 5]).unwrap();
        assert!(f.is_finite() && f.abs() <= (32.0f64).sqrt());
        assert!(a.c.iter().all(|c| c.abs() <= 1.0 / (300.0 * 32f64.sqrt())));
    }

    #[test]
    fn proportional_sensitivity_is_negative_gain() {
        let mut p = ProportionalPolicy {
            gains: GainSet::default(),
        };
        let out = p.step(&State::new(0.3, 0.1, -0.2, 0.5), &ConditioningVector::nominal());
        assert_eq!(out.sensitivity, [-13.0, -15.0, -31.0, -1.6]);
    }

    #[test]
    fn conditioning_roundtrip() {
        let c = ConditioningVector::from_plant(&PlantParams::nominal());
        assert_eq!(c, ConditioningVector::nominal());
        let far = ConditioningVector::from_physical([0.4, 0.3, 0.05, 17.06351, 0.024376]).unwrap();
        let phys = far.physical();
        assert!((phys[3] - 17.06351).abs() < 1e-12);
        assert!(ConditioningVector::from_physical([0.4, 0.0, 0.05, 3.0, 0.007]).is_err());
    }

    #[test]
    fn weight_file_roundtrip_is_lossless() {
        let ctrl = RnnController::init_weights(&mut ChaCha8Rng::seed_from_u64(1), 16, 9, 300.0).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.json");
        ctrl.save(&path).unwrap();
        let back = RnnController::load(&path).unwrap();
        assert_eq!(back.a_effective(), ctrl.a_effective());
        assert_eq!(back.b, ctrl.b);
        assert_eq!(back.c, ctrl.c);
        assert_eq!(back.b1, ctrl.b1);
        assert_eq!(back.to_weight_file(), ctrl.to_weight_file());
    }

    #[test]
    fn weight_file_rejects_unknown_fields() {
        let text = r#"{"format_version":1,"n_h":1,"n_in":4,"c_out":1,"b2":0,"A":[0],"B":[0,0,0,0],"C":[0],"b1":[0],"extra":1}"#;
        assert!(serde_json::from_str::<WeightFile>(text).is_err());
    }
}
