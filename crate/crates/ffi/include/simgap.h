#ifndef SIMGAP_H
#define SIMGAP_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>
#include <stddef.h>

// Result codes.
typedef enum SimgapStatus {
  SIMGAP_STATUS_OK = 0,
  SIMGAP_STATUS_NULL_POINTER = 1,
  SIMGAP_STATUS_INVALID_ARGUMENT = 2,
  SIMGAP_STATUS_IO = 3,
  SIMGAP_STATUS_FORMAT = 4,
  SIMGAP_STATUS_NUMERICAL = 5,
  SIMGAP_STATUS_PANIC = 6,
} SimgapStatus;

// Opaque controller with its recurrent state.
typedef struct SimgapController SimgapController;

// Physical plant parameters; see [`simgap_plant_nominal`].
typedef struct SimgapPlant {
  // Pole mass [kg].
  double m;
  // Cart mass [kg].
  double m_c;
  // Total mass [kg]; must equal `m + m_c`.
  double total_mass;
  // Pivot to centre-of-mass distance [m].
  double l;
  // Pole inertia about its centre of mass [kg m^2].
  double j;
  double g;
  double d_c;
  double d_p;
} SimgapPlant;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread; empty after a success.
// The pointer stays valid until the next call on the same thread.
const char *simgap_last_error(void);

// Loads an RNN controller from a JSON weight file.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a writable pointer.
enum SimgapStatus simgap_controller_load(const char *path, struct SimgapController **out);

// Proportional controller `f = -k · s` with gains `(k_x, k_v, k_θ, k_ω)`.
//
// # Safety
// `gains` must point to 4 doubles and `out` must be writable.
enum SimgapStatus simgap_controller_proportional(const double *gains,
                                                 struct SimgapController **out);

// Releases a controller; null is ignored.
//
// # Safety
// `ctrl` must come from this library and not be used afterwards.
void simgap_controller_free(struct SimgapController *ctrl);

// Number of conditioning inputs the controller expects (0 or 5).
//
// # Safety
// `ctrl` must be a live handle.
size_t simgap_controller_n_cond(const struct SimgapController *ctrl);

// Zeroes the recurrent state.
//
// # Safety
// `ctrl` must be a live handle.
enum SimgapStatus simgap_controller_reset(struct SimgapController *ctrl);

// One control tick. Writes the controller-frame force (before saturation)
// and, if `sensitivity` is non-null, `∂f/∂(x, v, θ, ω)` at this tick.
// `cond` holds `n_cond` normalized plant parameters and may be null when
// `n_cond` is 0.
//
// # Safety
// `state` must point to 4 doubles, `cond` to `n_cond` doubles, `force` must be
// writable and `sensitivity`, when non-null, must have room for 4 doubles.
enum SimgapStatus simgap_controller_step(struct SimgapController *ctrl,
                                         const double *state,
                                         const double *cond,
                                         size_t n_cond,
                                         double *force,
                                         double *sensitivity);

// Writes the nominal plant.
//
// # Safety
// `out` must be writable.
enum SimgapStatus simgap_plant_nominal(struct SimgapPlant *out);

// Maps a controller-frame force to the force acting on the cart.
double simgap_plant_force(double f_ctrl);

// One RK4 step of length `dt` with plant-frame force `force`, then the
// `±x_max` position clamp. `out` may alias `state`.
//
// # Safety
// `plant` must be valid, `state` and `out` must each hold 4 doubles.
enum SimgapStatus simgap_rk4_step(const struct SimgapPlant *plant,
                                  const double *state,
                                  double force,
                                  double dt,
                                  double x_max,
                                  double *out);

// Force [N] produced by signed duty `duty` in `[-1, 1]`.
//
// # Safety
// `out` must be writable.
enum SimgapStatus simgap_duty_to_force(double duty, double v_bat, double c_emp, double *out);

// Duty needed for force `force`, clamped to `[-1, 1]`; `saturated` (optional)
// is set to 1 when clamping occurred.
//
// # Safety
// `duty` must be writable; `saturated` may be null.
enum SimgapStatus simgap_force_to_duty(double force,
                                       double v_bat,
                                       double c_emp,
                                       double *duty,
                                       int *saturated);

// Band settling time of `y(t)`. `settled` is set to 0 (and `out` to NaN) when
// the signal never stays inside the band.
//
// # Safety
// `t` and `y` must hold `n` doubles; `out` and `settled` must be writable.
enum SimgapStatus simgap_settling_time(const double *t,
                                       const double *y,
                                       size_t n,
                                       double band_fraction,
                                       double *out,
                                       int *settled);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* SIMGAP_H */
