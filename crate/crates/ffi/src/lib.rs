//! C ABI for the simgap controllers, plant integrator, motor model and
//! settling-time metric.
//!
//! Every fallible function returns a [`SimgapStatus`]. On failure a message is
//! stored per thread and can be read with [`simgap_last_error`]. Controllers
//! are opaque handles that must be released with [`simgap_controller_free`].

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use simgap::controllers::{proportional_force, AnyController, GainSet, RnnController, N_COND, N_STATE};
use simgap::deploy::{duty_to_force, force_to_duty, MotorModel};
use simgap::evaluation::{settling_time, Signal, Source, TrajectoryLog};
use simgap::plant::{plant_force, rk4_step, PlantParams, SimLimits, State};
use simgap::Error;

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimgapStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Format = 4,
    Numerical = 5,
    Panic = 6,
}

/// Physical plant parameters; see [`simgap_plant_nominal`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimgapPlant {
    /// Pole mass [kg].
    pub m: f64,
    /// Cart mass [kg].
    pub m_c: f64,
    /// Total mass [kg]; must equal `m + m_c`.
    pub total_mass: f64,
    /// Pivot to centre-of-mass distance [m].
    pub l: f64,
    /// Pole inertia about its centre of mass [kg m^2].
    pub j: f64,
    pub g: f64,
    pub d_c: f64,
    pub d_p: f64,
}

impl From<PlantParams> for SimgapPlant {
    fn from(p: PlantParams) -> Self {
        Self {
            m: p.m,
            m_c: p.m_c,
            total_mass: p.total_mass,
            l: p.l,
            j: p.j,
            g: p.g,
            d_c: p.d_c,
            d_p: p.d_p,
        }
    }
}

impl SimgapPlant {
    fn to_params(self) -> Result<PlantParams, Error> {
        let p = PlantParams {
            m: self.m,
            m_c: self.m_c,
            total_mass: self.total_mass,
            l: self.l,
            j: self.j,
            g: self.g,
            d_c: self.d_c,
            d_p: self.d_p,
        };
        p.validate()?;
        Ok(p)
    }
}

/// Opaque controller with its recurrent state.
pub struct SimgapController {
    ctrl: AnyController,
    h: Vec<f64>,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> SimgapStatus {
    match e {
        Error::Io { .. } => SimgapStatus::Io,
        Error::Json(_) | Error::Csv(_) | Error::Format { .. } => SimgapStatus::Format,
        Error::NonFinite(_) | Error::DegeneratePlant(_) | Error::TrainingAborted { .. } | Error::CheckFailed(_) => {
            SimgapStatus::Numerical
        }
        _ => SimgapStatus::InvalidArgument,
    }
}

/// Runs `f`, translating errors and panics into status codes.
fn guard<F>(f: F) -> SimgapStatus
where
    F: FnOnce() -> Result<(), (SimgapStatus, String)>,
{
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            SimgapStatus::Ok
        }
        Ok(Err((code, msg))) => {
            set_error(&msg);
            code
        }
        Err(_) => {
            set_error("internal panic");
            SimgapStatus::Panic
        }
    }
}

fn lib_err(e: Error) -> (SimgapStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (SimgapStatus, String) {
    (SimgapStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> (SimgapStatus, String) {
    (SimgapStatus::InvalidArgument, msg.into())
}

/// Message for the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn simgap_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

fn new_handle(ctrl: AnyController, out: *mut *mut SimgapController) {
    let h = match &ctrl {
        AnyController::Rnn(r) => vec![0.0; r.n_hidden()],
        AnyController::Proportional(_) => Vec::new(),
    };
    // SAFETY: the caller checked `out` for null.
    unsafe { *out = Box::into_raw(Box::new(SimgapController { ctrl, h })) };
}

/// Loads an RNN controller from a JSON weight file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn simgap_controller_load(path: *const c_char, out: *mut *mut SimgapController) -> SimgapStatus {
    guard(|| {
        if path.is_null() {
            return Err(null("path"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let p = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| invalid("path is not UTF-8"))?;
        let ctrl = RnnController::load(Path::new(p)).map_err(lib_err)?;
        new_handle(AnyController::Rnn(ctrl), out);
        Ok(())
    })
}

/// Proportional controller `f = -k · s` with gains `(k_x, k_v, k_θ, k_ω)`.
///
/// # Safety
/// `gains` must point to 4 doubles and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn simgap_controller_proportional(
    gains: *const f64,
    out: *mut *mut SimgapController,
) -> SimgapStatus {
    guard(|| {
        if gains.is_null() {
            return Err(null("gains"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let k: [f64; 4] = std::slice::from_raw_parts(gains, 4).try_into().expect("length 4");
        if k.iter().any(|v| !v.is_finite()) {
            return Err(invalid("gains must be finite"));
        }
        new_handle(AnyController::Proportional(GainSet::from_nominal(k)), out);
        Ok(())
    })
}

/// Releases a controller; null is ignored.
///
/// # Safety
/// `ctrl` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn simgap_controller_free(ctrl: *mut SimgapController) {
    if !ctrl.is_null() {
        drop(Box::from_raw(ctrl));
    }
}

/// Number of conditioning inputs the controller expects (0 or 5).
///
/// # Safety
/// `ctrl` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn simgap_controller_n_cond(ctrl: *const SimgapController) -> usize {
    match ctrl.as_ref().map(|c| &c.ctrl) {
        Some(AnyController::Rnn(r)) => r.n_cond(),
        _ => 0,
    }
}

/// Zeroes the recurrent state.
///
/// # Safety
/// `ctrl` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn simgap_controller_reset(ctrl: *mut SimgapController) -> SimgapStatus {
    guard(|| {
        let c = ctrl.as_mut().ok_or_else(|| null("ctrl"))?;
        c.h.iter_mut().for_each(|v| *v = 0.0);
        Ok(())
    })
}

/// One control tick. Writes the controller-frame force (before saturation)
/// and, if `sensitivity` is non-null, `∂f/∂(x, v, θ, ω)` at this tick.
/// `cond` holds `n_cond` normalized plant parameters and may be null when
/// `n_cond` is 0.
///
/// # Safety
/// `state` must point to 4 doubles, `cond` to `n_cond` doubles, `force` must be
/// writable and `sensitivity`, when non-null, must have room for 4 doubles.
#[no_mangle]
pub unsafe extern "C" fn simgap_controller_step(
    ctrl: *mut SimgapController,
    state: *const f64,
    cond: *const f64,
    n_cond: usize,
    force: *mut f64,
    sensitivity: *mut f64,
) -> SimgapStatus {
    guard(|| {
        let c = ctrl.as_mut().ok_or_else(|| null("ctrl"))?;
        if state.is_null() {
            return Err(null("state"));
        }
        if force.is_null() {
            return Err(null("force"));
        }
        if n_cond > N_COND {
            return Err(invalid(format!("n_cond {n_cond} exceeds {N_COND}")));
        }
        if cond.is_null() && n_cond > 0 {
            return Err(null("cond"));
        }
        let s: [f64; N_STATE] = std::slice::from_raw_parts(state, N_STATE).try_into().expect("length 4");
        let s = State::from_array(s);
        let cond = if n_cond == 0 {
            &[][..]
        } else {
            std::slice::from_raw_parts(cond, n_cond)
        };
        let (f, sens) = match &c.ctrl {
            AnyController::Proportional(g) => {
                let k = g.nominal();
                (proportional_force(&s, g), [-k[0], -k[1], -k[2], -k[3]])
            }
            AnyController::Rnn(r) => {
                let (f, h_new) = r.rnn_step(&c.h, &s, cond).map_err(lib_err)?;
                let sens = r.sensitivity_from_hidden(&h_new);
                c.h = h_new;
                (f, sens)
            }
        };
        *force = f;
        if !sensitivity.is_null() {
            std::slice::from_raw_parts_mut(sensitivity, 4).copy_from_slice(&sens);
        }
        Ok(())
    })
}

/// Writes the nominal plant.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn simgap_plant_nominal(out: *mut SimgapPlant) -> SimgapStatus {
    guard(|| {
        let o = out.as_mut().ok_or_else(|| null("out"))?;
        *o = PlantParams::nominal().into();
        Ok(())
    })
}

/// Maps a controller-frame force to the force acting on the cart.
#[no_mangle]
pub extern "C" fn simgap_plant_force(f_ctrl: f64) -> f64 {
    plant_force(f_ctrl)
}

/// One RK4 step of length `dt` with plant-frame force `force`, then the
/// `±x_max` position clamp. `out` may alias `state`.
///
/// # Safety
/// `plant` must be valid, `state` and `out` must each hold 4 doubles.
#[no_mangle]
pub unsafe extern "C" fn simgap_rk4_step(
    plant: *const SimgapPlant,
    state: *const f64,
    force: f64,
    dt: f64,
    x_max: f64,
    out: *mut f64,
) -> SimgapStatus {
    guard(|| {
        let p = plant
            .as_ref()
            .ok_or_else(|| null("plant"))?
            .to_params()
            .map_err(lib_err)?;
        if state.is_null() {
            return Err(null("state"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let lim = SimLimits {
            dt,
            x_max,
            ..SimLimits::default()
        };
        lim.validate().map_err(lib_err)?;
        let s: [f64; 4] = std::slice::from_raw_parts(state, 4).try_into().expect("length 4");
        let next = rk4_step(&State::from_array(s), force, &p, &lim).map_err(lib_err)?;
        std::slice::from_raw_parts_mut(out, 4).copy_from_slice(&next.to_array());
        Ok(())
    })
}

fn motor(c_emp: f64) -> Result<MotorModel, (SimgapStatus, String)> {
    MotorModel::with_c_emp(c_emp).map_err(lib_err)
}

/// Force [N] produced by signed duty `duty` in `[-1, 1]`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn simgap_duty_to_force(duty: f64, v_bat: f64, c_emp: f64, out: *mut f64) -> SimgapStatus {
    guard(|| {
        let o = out.as_mut().ok_or_else(|| null("out"))?;
        *o = duty_to_force(duty, v_bat, &motor(c_emp)?).map_err(lib_err)?;
        Ok(())
    })
}

/// Duty needed for force `force`, clamped to `[-1, 1]`; `saturated` (optional)
/// is set to 1 when clamping occurred.
///
/// # Safety
/// `duty` must be writable; `saturated` may be null.
#[no_mangle]
pub unsafe extern "C" fn simgap_force_to_duty(
    force: f64,
    v_bat: f64,
    c_emp: f64,
    duty: *mut f64,
    saturated: *mut c_int,
) -> SimgapStatus {
    guard(|| {
        let d = duty.as_mut().ok_or_else(|| null("duty"))?;
        let cmd = force_to_duty(force, v_bat, &motor(c_emp)?).map_err(lib_err)?;
        *d = cmd.duty;
        if let Some(s) = saturated.as_mut() {
            *s = c_int::from(cmd.saturated);
        }
        Ok(())
    })
}

/// Band settling time of `y(t)`. `settled` is set to 0 (and `out` to NaN) when
/// the signal never stays inside the band.
///
/// # Safety
/// `t` and `y` must hold `n` doubles; `out` and `settled` must be writable.
#[no_mangle]
pub unsafe extern "C" fn simgap_settling_time(
    t: *const f64,
    y: *const f64,
    n: usize,
    band_fraction: f64,
    out: *mut f64,
    settled: *mut c_int,
) -> SimgapStatus {
    guard(|| {
        if t.is_null() || y.is_null() {
            return Err(null("t or y"));
        }
        let o = out.as_mut().ok_or_else(|| null("out"))?;
        let st = settled.as_mut().ok_or_else(|| null("settled"))?;
        if n == 0 {
            return Err(invalid("n must be >= 1"));
        }
        let t = std::slice::from_raw_parts(t, n).to_vec();
        let y = std::slice::from_raw_parts(y, n).to_vec();
        let log = TrajectoryLog::new(Source::Sim, t, y.clone(), y).map_err(lib_err)?;
        let r = settling_time(&log, Signal::Theta, band_fraction).map_err(lib_err)?;
        *o = r.settling_time.unwrap_or(f64::NAN);
        *st = c_int::from(r.settling_time.is_some());
        Ok(())
    })
}
