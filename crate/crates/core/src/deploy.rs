//! Deployment path: DC motor model, velocity smoothing and a control-loop
//! emulator with period jitter.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::controllers::{ConditioningVector, Policy};
use crate::error::{Error, Result};
use crate::evaluation::{Source, Status, TrajectoryLog};
use crate::plant::{apply_force_noise, plant_force, rk4_step, PlantParams, SimLimits, State};

/// Correction factors used on the robot for each controller family.
pub const C_EMP_PROPORTIONAL: f64 = 1.2;
pub const C_EMP_DR: f64 = 2.0;
pub const C_EMP_GC_DR: f64 = 1.5;

pub const DEFAULT_V_BAT: f64 = 7.8;
pub const DEFAULT_EMA_ALPHA: f64 = 0.2;

/// `f = c_emp · (c_gear / r_wheel) · (Φ_PM / R_winding) · V_bat · u_duty`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MotorModel {
    pub c_emp: f64,
    pub c_gear: f64,
    /// Wheel radius [m].
    pub r_wheel: f64,
    /// Magnetic flux [Wb].
    pub phi_pm: f64,
    /// Winding resistance [Ω].
    pub r_winding: f64,
}

impl Default for MotorModel {
    fn default() -> Self {
        Self {
            c_emp: C_EMP_GC_DR,
            c_gear: 110.2,
            r_wheel: 38.25e-3,
            phi_pm: 2.7e-3,
            r_winding: 4.3,
        }
    }
}

impl MotorModel {
    pub fn with_c_emp(c_emp: f64) -> Result<Self> {
        let m = Self {
            c_emp,
            ..Self::default()
        };
        m.validate()?;
        Ok(m)
    }

    /// Wheel circumference [m], the encoder distance per revolution.
    pub fn l_wheel(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.r_wheel
    }

    pub fn validate(&self) -> Result<()> {
        for (k, v) in [
            ("c_emp", self.c_emp),
            ("c_gear", self.c_gear),
            ("r_wheel", self.r_wheel),
            ("phi_pm", self.phi_pm),
            ("r_winding", self.r_winding),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(k, "must be finite and > 0"));
            }
        }
        Ok(())
    }

    /// Force per unit duty at the given battery voltage [N].
    pub fn force_per_duty(&self, v_bat: f64) -> f64 {
        self.c_emp * (self.c_gear / self.r_wheel) * (self.phi_pm / self.r_winding) * v_bat
    }
}

fn check_v_bat(v_bat: f64) -> Result<()> {
    if v_bat.is_finite() && v_bat > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid("v_bat", "must be finite and > 0"))
    }
}

pub fn duty_to_force(duty: f64, v_bat: f64, mm: &MotorModel) -> Result<f64> {
    if !(duty.abs() <= 1.0) {
        return Err(Error::DutyOutOfRange(duty));
    }
    check_v_bat(v_bat)?;
    Ok(mm.force_per_duty(v_bat) * duty)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DutyCommand {
    pub duty: f64,
    /// The requested force needed more than full duty.
    pub saturated: bool,
}

/// Inverse of [`duty_to_force`], clamped to `[-1, 1]`.
pub fn force_to_duty(f: f64, v_bat: f64, mm: &MotorModel) -> Result<DutyCommand> {
    check_v_bat(v_bat)?;
    if f.is_nan() {
        return Err(Error::NonFinite("force"));
    }
    let raw = f / mm.force_per_duty(v_bat);
    Ok(DutyCommand {
        duty: raw.clamp(-1.0, 1.0),
        saturated: raw.abs() > 1.0,
    })
}

/// Exponential moving average, `est ← est + α (sample − est)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmaFilter {
    alpha: f64,
    est: Option<f64>,
}

impl EmaFilter {
    /// Starts empty; the first sample becomes the estimate.
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::invalid("ema_alpha", "must lie in (0, 1]"));
        }
        Ok(Self { alpha, est: None })
    }

    pub fn with_estimate(alpha: f64, est: f64) -> Result<Self> {
        let mut f = Self::new(alpha)?;
        f.est = Some(est);
        Ok(f)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn estimate(&self) -> Option<f64> {
        self.est
    }

    pub fn reset(&mut self) {
        self.est = None;
    }

    pub fn update(&mut self, sample: f64) -> f64 {
        let e = match self.est {
            None => sample,
            Some(e) => e + self.alpha * (sample - e),
        };
        self.est = Some(e);
        e
    }
}

/// Control-period model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct JitterSpec {
    pub enabled: bool,
    /// Shortest period [s].
    pub min_period: f64,
    /// Longest period [s].
    pub max_period: f64,
}

impl Default for JitterSpec {
    fn default() -> Self {
        Self {
            enabled: false,
            min_period: 0.010,
            max_period: 0.030,
        }
    }
}

impl JitterSpec {
    pub fn on() -> Self {
        Self {
            enabled: true,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.min_period.is_finite() && self.min_period > 0.0) {
            return Err(Error::invalid("jitter.min_period", "must be finite and > 0"));
        }
        if !(self.max_period.is_finite() && self.max_period >= self.min_period) {
            return Err(Error::invalid("jitter.max_period", "must be finite and >= min_period"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EmulatorConfig {
    /// Model used to convert controller force into duty.
    pub motor: MotorModel,
    /// Model that turns duty back into force on the plant; `None` reuses `motor`.
    pub plant_motor: Option<MotorModel>,
    pub v_bat: f64,
    pub ema_alpha: f64,
    pub jitter: JitterSpec,
    /// Simulated time [s].
    pub duration: f64,
    pub seed: u64,
}

impl Default for EmulatorConfig {
    fn default() -> Self {
        Self {
            motor: MotorModel::default(),
            plant_motor: None,
            v_bat: DEFAULT_V_BAT,
            ema_alpha: DEFAULT_EMA_ALPHA,
            jitter: JitterSpec::default(),
            duration: 5.0,
            seed: 0,
        }
    }
}

impl EmulatorConfig {
    pub fn validate(&self) -> Result<()> {
        self.motor.validate()?;
        if let Some(m) = &self.plant_motor {
            m.validate()?;
        }
        check_v_bat(self.v_bat)?;
        EmaFilter::new(self.ema_alpha)?;
        self.jitter.validate()?;
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return Err(Error::invalid("duration", "must be finite and > 0"));
        }
        Ok(())
    }
}

/// Runs the deployment chain once per tick: smooth `v` and `ω`, evaluate the
/// controller, saturate at `f_max`, convert to duty and back through the
/// plant-side motor model, then integrate for one (possibly jittered) period.
///
/// With jitter off the tick count is `round(duration / lim.dt)`. Rows hold the
/// true state at the start of each tick and the force applied during it.
pub fn emulate_loop(
    policy: &mut dyn Policy,
    plant: &PlantParams,
    cond: &ConditioningVector,
    initial: State,
    cfg: &EmulatorConfig,
    lim: &SimLimits,
) -> Result<TrajectoryLog> {
    cfg.validate()?;
    lim.validate()?;
    plant.validate()?;
    let plant_motor = cfg.plant_motor.unwrap_or(cfg.motor);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut ema_v = EmaFilter::new(cfg.ema_alpha)?;
    let mut ema_w = EmaFilter::new(cfg.ema_alpha)?;
    policy.reset();

    let fixed_ticks = (cfg.duration / lim.dt).round() as usize;
    let mut log = TrajectoryLog {
        source: Source::Sim,
        status: Status::Ok,
        t: Vec::new(),
        theta: Vec::new(),
        omega: Vec::new(),
        x: Some(Vec::new()),
        v: Some(Vec::new()),
        f: Some(Vec::new()),
        duty: Some(Vec::new()),
        v_bat: Some(Vec::new()),
    };
    let mut s = initial;
    let mut t = 0.0;
    let mut k = 0usize;
    loop {
        let done = if cfg.jitter.enabled {
            t >= cfg.duration
        } else {
            k >= fixed_ticks
        };
        if done {
            break;
        }
        let measured = State::new(s.x, ema_v.update(s.v), s.theta, ema_w.update(s.omega));
        let f_ctrl = apply_force_noise(policy.step(&measured, cond).force, 0.0, lim);
        let cmd = force_to_duty(f_ctrl, cfg.v_bat, &cfg.motor)?;
        let f = duty_to_force(cmd.duty, cfg.v_bat, &plant_motor)?;
        let dt = if cfg.jitter.enabled {
            rng.gen_range(cfg.jitter.min_period..=cfg.jitter.max_period)
        } else {
            lim.dt
        };

        log.t.push(if cfg.jitter.enabled { t } else { k as f64 * lim.dt });
        log.theta.push(s.theta);
        log.omega.push(s.omega);
        for (col, v) in [
            (&mut log.x, s.x),
            (&mut log.v, s.v),
            (&mut log.f, f),
            (&mut log.duty, cmd.duty),
        ] {
            col.as_mut().expect("column allocated").push(v);
        }
        log.v_bat.as_mut().expect("column allocated").push(cfg.v_bat);

        let step_lim = SimLimits { dt, ..*lim };
        match rk4_step(&s, plant_force(f), plant, &step_lim) {
            Ok(next) => s = next,
            Err(_) => {
                log.status = Status::Diverged;
                break;
            }
        }
        t += dt;
        k += 1;
    }
    Ok(log)
}
