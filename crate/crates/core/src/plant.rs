//! Cart-pole surrogate of a two-wheeled balancing robot.
//!
//! The state is `(x, v, θ, ω)` with `θ = 0` upright. Pole inertia `J` is taken
//! about the pole's centre of mass, which sits at distance `l` from the pivot.
//! All friction is viscous.
//!
//! Controllers in this crate report forces in the robot's actuation frame,
//! which is mirrored with respect to the cart coordinate `x` used by the
//! equations of motion. [`plant_force`] performs that conversion; rollouts go
//! through it so that a proportional law `f = -k·s` with positive gains is
//! the stabilizing one.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const M_NOM: f64 = 0.4;
pub const POLE_MASS_NOM: f64 = 0.3;
pub const L_NOM: f64 = 0.05;
pub const G_NOM: f64 = 9.8;
pub const DC_NOM: f64 = 3.0;
pub const DP_NOM: f64 = 0.007;

/// Sign relating a controller force to the force term of the equations of motion.
pub const ACTUATION_SIGN: f64 = -1.0;

/// Converts a controller-frame force into the force entering [`derivatives`].
#[inline]
pub fn plant_force(f_ctrl: f64) -> f64 {
    ACTUATION_SIGN * f_ctrl
}

/// Inertia of a uniform rod about its centre when the pivot sits `l` from the centre.
#[inline]
pub fn rod_inertia(m: f64, l: f64) -> f64 {
    m * l * l / 3.0
}

/// Physical constants of the cart-pole.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlantParams {
    /// Pole mass [kg].
    pub m: f64,
    /// Cart mass [kg].
    pub m_c: f64,
    /// Total mass `m + m_c` [kg].
    pub total_mass: f64,
    /// Pivot to centre-of-mass distance [m].
    pub l: f64,
    /// Pole inertia about its centre of mass [kg m^2].
    pub j: f64,
    pub g: f64,
    /// Cart viscous damping [kg/s].
    pub d_c: f64,
    /// Pivot viscous damping [N m s/rad].
    pub d_p: f64,
}

impl Default for PlantParams {
    fn default() -> Self {
        Self::nominal()
    }
}

impl PlantParams {
    pub fn nominal() -> Self {
        Self {
            m: POLE_MASS_NOM,
            m_c: M_NOM - POLE_MASS_NOM,
            total_mass: M_NOM,
            l: L_NOM,
            j: rod_inertia(POLE_MASS_NOM, L_NOM),
            g: G_NOM,
            d_c: DC_NOM,
            d_p: DP_NOM,
        }
    }

    /// Builds parameters from the total mass and pole mass. The cart mass must
    /// be strictly positive, so `m < total_mass` is required. `J` follows the
    /// uniform-rod rule.
    pub fn from_total(total_mass: f64, m: f64, l: f64, d_c: f64, d_p: f64) -> Result<Self> {
        if !(m < total_mass) {
            return Err(Error::invalid(
                "m",
                format!("pole mass {m} must be below total mass {total_mass}"),
            ));
        }
        let p = Self {
            m,
            m_c: total_mass - m,
            total_mass,
            l,
            j: rod_inertia(m, l),
            g: G_NOM,
            d_c,
            d_p,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_inertia(mut self, j: f64) -> Result<Self> {
        self.j = j;
        self.validate()?;
        Ok(self)
    }

    pub fn with_gravity(mut self, g: f64) -> Result<Self> {
        self.g = g;
        self.validate()?;
        Ok(self)
    }

    pub fn with_damping(mut self, d_c: f64, d_p: f64) -> Result<Self> {
        self.d_c = d_c;
        self.d_p = d_p;
        self.validate()?;
        Ok(self)
    }

    /// `M(ml^2 + J) - (ml cos θ)^2`.
    #[inline]
    pub fn delta(&self, theta: f64) -> f64 {
        let ml = self.m * self.l;
        let c = theta.cos();
        self.total_mass * (ml * self.l + self.j) - ml * ml * c * c
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("m", self.m),
            ("m_c", self.m_c),
            ("M", self.total_mass),
            ("l", self.l),
            ("J", self.j),
            ("g", self.g),
            ("D_c", self.d_c),
            ("D_p", self.d_p),
        ];
        for (k, v) in fields {
            if !v.is_finite() {
                return Err(Error::invalid(k, "must be finite"));
            }
        }
        if self.m <= 0.0 {
            return Err(Error::invalid("m", "must be > 0"));
        }
        for (k, v) in [("m_c", self.m_c), ("J", self.j), ("D_c", self.d_c), ("D_p", self.d_p)] {
            if v < 0.0 {
                return Err(Error::invalid(k, "must be >= 0"));
            }
        }
        if self.l <= 0.0 {
            return Err(Error::invalid("l", "must be > 0"));
        }
        if self.g <= 0.0 {
            return Err(Error::invalid("g", "must be > 0"));
        }
        let sum = self.m + self.m_c;
        if (sum - self.total_mass).abs() > 1e-12 * self.total_mass.abs().max(1.0) {
            return Err(Error::invalid("M", "must equal m + m_c"));
        }
        // Δ is smallest at θ = 0.
        if self.delta(0.0) <= 0.0 {
            return Err(Error::DegeneratePlant(format!(
                "Δ(0) = {} <= 0 (m_c = {}, J = {})",
                self.delta(0.0),
                self.m_c,
                self.j
            )));
        }
        Ok(())
    }
}

/// Cart-pole state.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub x: f64,
    pub v: f64,
    pub theta: f64,
    pub omega: f64,
}

impl State {
    pub const ZERO: State = State {
        x: 0.0,
        v: 0.0,
        theta: 0.0,
        omega: 0.0,
    };

    pub fn new(x: f64, v: f64, theta: f64, omega: f64) -> Self {
        Self { x, v, theta, omega }
    }

    #[inline]
    pub fn to_array(self) -> [f64; 4] {
        [self.x, self.v, self.theta, self.omega]
    }

    #[inline]
    pub fn from_array(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|c| c.is_finite())
    }
}

/// Time derivative `(ẋ, v̇, θ̇, ω̇)`.
pub type StateDerivative = [f64; 4];

/// Jacobian of the derivative or of one integration step with respect to
/// `(x, v, θ, ω, f)`; row `i` holds the partials of output component `i`.
pub type Jacobian = [[f64; 5]; 4];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimLimits {
    /// Force clamp [N].
    pub f_max: f64,
    /// Position clamp [m].
    pub x_max: f64,
    /// Integration step [s].
    pub dt: f64,
}

impl Default for SimLimits {
    fn default() -> Self {
        Self {
            f_max: 20.0,
            x_max: 10.0,
            dt: 0.01,
        }
    }
}

impl SimLimits {
    pub fn validate(&self) -> Result<()> {
        for (k, v) in [("f_max", self.f_max), ("x_max", self.x_max), ("dt", self.dt)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(k, "must be finite and > 0"));
            }
        }
        Ok(())
    }
}

fn check_finite(s: &[f64; 4], f: f64) -> Result<()> {
    if s.iter().all(|c| c.is_finite()) && f.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite("plant input"))
    }
}

#[inline]
fn eval(s: &[f64; 4], f: f64, p: &PlantParams) -> (StateDerivative, f64) {
    let [_, v, th, w] = *s;
    let (sn, cs) = th.sin_cos();
    let ml = p.m * p.l;
    let inertia = ml * p.l + p.j;
    let delta = p.total_mass * inertia - ml * ml * cs * cs;
    let n = f + ml * w * w * sn - p.d_c * v;
    let vdot = (-(ml * ml) * p.g * sn * cs + inertia * n + ml * p.d_p * w * cs) / delta;
    let wdot = (p.total_mass * p.m * p.g * p.l * sn - ml * cs * n - p.total_mass * p.d_p * w) / delta;
    ([v, vdot, w, wdot], delta)
}

/// Equations of motion. `f` is the force on the cart in the `x` direction.
pub fn derivatives(s: &State, f: f64, p: &PlantParams) -> Result<StateDerivative> {
    let a = s.to_array();
    check_finite(&a, f)?;
    let (d, delta) = eval(&a, f, p);
    if !(delta > 0.0) {
        return Err(Error::DegeneratePlant(format!("Δ = {delta} at θ = {}", s.theta)));
    }
    Ok(d)
}

/// Derivative together with its Jacobian with respect to `(x, v, θ, ω, f)`.
pub fn derivatives_jacobian(s: &[f64; 4], f: f64, p: &PlantParams) -> (StateDerivative, Jacobian) {
    let [_, v, th, w] = *s;
    let (sn, cs) = th.sin_cos();
    let ml = p.m * p.l;
    let inertia = ml * p.l + p.j;
    let big_m = p.total_mass;
    let delta = big_m * inertia - ml * ml * cs * cs;
    let d_delta_th = 2.0 * ml * ml * cs * sn;

    let n = f + ml * w * w * sn - p.d_c * v;
    let n_th = ml * w * w * cs;
    let n_w = 2.0 * ml * w * sn;
    let n_v = -p.d_c;

    let pv = -(ml * ml) * p.g * sn * cs + inertia * n + ml * p.d_p * w * cs;
    let pv_th = -(ml * ml) * p.g * (cs * cs - sn * sn) + inertia * n_th - ml * p.d_p * w * sn;
    let pv_w = inertia * n_w + ml * p.d_p * cs;
    let pv_v = inertia * n_v;
    let pv_f = inertia;

    let pw = big_m * p.m * p.g * p.l * sn - ml * cs * n - big_m * p.d_p * w;
    let pw_th = big_m * p.m * p.g * p.l * cs + ml * sn * n - ml * cs * n_th;
    let pw_w = -ml * cs * n_w - big_m * p.d_p;
    let pw_v = -ml * cs * n_v;
    let pw_f = -ml * cs;

    // Same rounding as `eval` so tape rollouts match plain rollouts bit for bit.
    let vdot = pv / delta;
    let wdot = pw / delta;
    let inv = 1.0 / delta;

    let jac = [
        [0.0, 1.0, 0.0, 0.0, 0.0],
        [
            0.0,
            pv_v * inv,
            (pv_th - vdot * d_delta_th) * inv,
            pv_w * inv,
            pv_f * inv,
        ],
        [0.0, 0.0, 0.0, 1.0, 0.0],
        [
            0.0,
            pw_v * inv,
            (pw_th - wdot * d_delta_th) * inv,
            pw_w * inv,
            pw_f * inv,
        ],
    ];
    ([v, vdot, w, wdot], jac)
}

#[inline]
fn axpy(s: &[f64; 4], h: f64, k: &[f64; 4]) -> [f64; 4] {
    [s[0] + h * k[0], s[1] + h * k[1], s[2] + h * k[2], s[3] + h * k[3]]
}

/// One classical RK4 step without clamping.
pub fn rk4_raw(s: &[f64; 4], f: f64, p: &PlantParams, dt: f64) -> [f64; 4] {
    let (k1, _) = eval(s, f, p);
    let (k2, _) = eval(&axpy(s, 0.5 * dt, &k1), f, p);
    let (k3, _) = eval(&axpy(s, 0.5 * dt, &k2), f, p);
    let (k4, _) = eval(&axpy(s, dt, &k3), f, p);
    let mut out = *s;
    for i in 0..4 {
        out[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

/// One RK4 step without clamping, plus the step's Jacobian with respect to
/// `(x, v, θ, ω, f)` obtained by forward propagation through the four stages.
pub fn rk4_raw_with_jacobian(s: &[f64; 4], f: f64, p: &PlantParams, dt: f64) -> ([f64; 4], Jacobian) {
    // Tangents are stored column-wise: t[c][i] = ∂(stage input i)/∂(input c).
    let mul = |jac: &Jacobian, tin: &[[f64; 4]; 5]| -> [[f64; 4]; 5] {
        let mut out = [[0.0; 4]; 5];
        for (c, col) in out.iter_mut().enumerate() {
            for (i, o) in col.iter_mut().enumerate() {
                let mut acc = 0.0;
                for k in 0..4 {
                    acc += jac[i][k] * tin[c][k];
                }
                if c == 4 {
                    acc += jac[i][4];
                }
                *o = acc;
            }
        }
        out
    };
    let mut id = [[0.0; 4]; 5];
    for (i, col) in id.iter_mut().enumerate().take(4) {
        col[i] = 1.0;
    }
    let shift = |base: &[[f64; 4]; 5], h: f64, dk: &[[f64; 4]; 5]| -> [[f64; 4]; 5] {
        let mut out = *base;
        for c in 0..5 {
            for i in 0..4 {
                out[c][i] += h * dk[c][i];
            }
        }
        out
    };

    let (k1, j1) = derivatives_jacobian(s, f, p);
    let dk1 = mul(&j1, &id);
    let s2 = axpy(s, 0.5 * dt, &k1);
    let (k2, j2) = derivatives_jacobian(&s2, f, p);
    let dk2 = mul(&j2, &shift(&id, 0.5 * dt, &dk1));
    let s3 = axpy(s, 0.5 * dt, &k2);
    let (k3, j3) = derivatives_jacobian(&s3, f, p);
    let dk3 = mul(&j3, &shift(&id, 0.5 * dt, &dk2));
    let s4 = axpy(s, dt, &k3);
    let (k4, j4) = derivatives_jacobian(&s4, f, p);
    let dk4 = mul(&j4, &shift(&id, dt, &dk3));

    let mut out = *s;
    let mut jac = [[0.0; 5]; 4];
    for i in 0..4 {
        out[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        for c in 0..5 {
            let base = if c == i { 1.0 } else { 0.0 };
            jac[i][c] = base + dt / 6.0 * (dk1[c][i] + 2.0 * dk2[c][i] + 2.0 * dk3[c][i] + dk4[c][i]);
        }
    }
    (out, jac)
}

/// Clamps `x` to `[-x_max, x_max]`, zeroing `v` when the wall is hit.
/// Returns whether the clamp engaged.
#[inline]
pub fn clamp_position(s: &mut [f64; 4], x_max: f64) -> bool {
    if s[0] > x_max {
        s[0] = x_max;
        s[1] = 0.0;
        true
    } else if s[0] < -x_max {
        s[0] = -x_max;
        s[1] = 0.0;
        true
    } else {
        false
    }
}

/// One RK4 step of length `lim.dt` with the force held constant, followed by
/// the position clamp.
pub fn rk4_step(s: &State, f: f64, p: &PlantParams, lim: &SimLimits) -> Result<State> {
    let a = s.to_array();
    check_finite(&a, f)?;
    let mut next = rk4_raw(&a, f, p, lim.dt);
    if !next.iter().all(|c| c.is_finite()) {
        return Err(Error::NonFinite("rk4 step"));
    }
    clamp_position(&mut next, lim.x_max);
    Ok(State::from_array(next))
}

/// Adds the episode's bias force and saturates at `±f_max`.
#[inline]
pub fn apply_force_noise(f_ctrl: f64, f_bias: f64, lim: &SimLimits) -> f64 {
    (f_ctrl + f_bias).clamp(-lim.f_max, lim.f_max)
}

/// Standard deviations of the initial-state perturbation and the per-episode
/// force bias.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseScales {
    pub x: f64,
    pub v: f64,
    pub theta: f64,
    pub omega: f64,
    /// Bias force scale [N].
    pub force: f64,
}

/// Upper bound on the initial-angle scale.
pub const THETA_NOISE_MAX: f64 = 35.0 * std::f64::consts::PI / 180.0;

impl Default for NoiseScales {
    fn default() -> Self {
        Self {
            x: 0.01,
            v: 0.01,
            theta: 0.1,
            omega: 0.01,
            force: 0.0,
        }
    }
}

impl NoiseScales {
    pub const ZERO: NoiseScales = NoiseScales {
        x: 0.0,
        v: 0.0,
        theta: 0.0,
        omega: 0.0,
        force: 0.0,
    };

    pub fn validate(&self) -> Result<()> {
        for (k, v) in [
            ("x_noise", self.x),
            ("v_noise", self.v),
            ("theta_noise", self.theta),
            ("omega_noise", self.omega),
            ("f_noise", self.force),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::invalid(k, "must be finite and >= 0"));
            }
        }
        if self.theta > THETA_NOISE_MAX {
            return Err(Error::invalid("theta_noise", "must not exceed 35 degrees"));
        }
        Ok(())
    }
}

/// Draws each component as `scale * N(0, 1)`, in the order x, v, θ, ω.
pub fn sample_initial_state<R: Rng + ?Sized>(rng: &mut R, scales: &NoiseScales) -> State {
    let mut draw = |s: f64| s * rng.sample::<f64, _>(StandardNormal);
    let x = draw(scales.x);
    let v = draw(scales.v);
    let theta = draw(scales.theta);
    let omega = draw(scales.omega);
    State::new(x, v, theta, omega)
}

/// Draws the episode's constant bias force `scale * N(0, 1)`.
pub fn sample_force_bias<R: Rng + ?Sized>(rng: &mut R, scales: &NoiseScales) -> f64 {
    scales.force * rng.sample::<f64, _>(StandardNormal)
}

/// Total mechanical energy of the undamped system, potential referenced to
/// the horizontal pole.
pub fn mechanical_energy(s: &State, p: &PlantParams) -> f64 {
    let ml = p.m * p.l;
    0.5 * p.total_mass * s.v * s.v
        + ml * s.v * s.omega * s.theta.cos()
        + 0.5 * (ml * p.l + p.j) * s.omega * s.omega
        + ml * p.g * s.theta.cos()
}
