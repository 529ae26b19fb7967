#ifndef CTESKF_H
#define CTESKF_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdbool.h>
#include <stdint.h>

// Injection codes used in [`CteskfConfig`].
enum CteskfInjection
#ifdef __cplusplus
  : uint32_t
#endif // __cplusplus
 {
  CTESKF_INJECTION_FIRST_ORDER = 0,
  CTESKF_INJECTION_RETRACTION = 1,
};
#ifndef __cplusplus
typedef uint32_t CteskfInjection;
#endif // __cplusplus

// Error parameterization codes used in [`CteskfConfig`].
enum CteskfParameterization
#ifdef __cplusplus
  : uint32_t
#endif // __cplusplus
 {
  CTESKF_PARAMETERIZATION_EKF = 0,
  CTESKF_PARAMETERIZATION_LEFT_INVARIANT = 1,
  CTESKF_PARAMETERIZATION_RIGHT_INVARIANT = 2,
};
#ifndef __cplusplus
typedef uint32_t CteskfParameterization;
#endif // __cplusplus

// Covariance propagation codes used in [`CteskfConfig`].
enum CteskfPropagation
#ifdef __cplusplus
  : uint32_t
#endif // __cplusplus
 {
  CTESKF_PROPAGATION_EULER = 0,
  CTESKF_PROPAGATION_TRANSPORTED = 1,
};
#ifndef __cplusplus
typedef uint32_t CteskfPropagation;
#endif // __cplusplus

// Result of every fallible call.
typedef enum CteskfStatus {
  CTESKF_STATUS_OK = 0,
  CTESKF_STATUS_NULL_POINTER = 1,
  CTESKF_STATUS_INVALID_ARGUMENT = 2,
  CTESKF_STATUS_INVALID_TIME_STEP = 3,
  CTESKF_STATUS_TIMESTAMP_MISMATCH = 4,
  CTESKF_STATUS_SINGULAR_INNOVATION = 5,
  // Non-finite values, a state off the Earth surface band or an
  // attitude correction of π or more. The filter should be discarded.
  CTESKF_STATUS_NUMERICAL_FAILURE = 6,
  // A bug inside the library; the handle must not be used again.
  CTESKF_STATUS_PANIC = 7,
} CteskfStatus;

// Update strategy codes used in [`CteskfConfig`].
enum CteskfStrategy
#ifdef __cplusplus
  : uint32_t
#endif // __cplusplus
 {
  // Update in the filter's own parameterization.
  CTESKF_STRATEGY_PLAIN = 0,
  // Map the covariance to the target, update, map back.
  CTESKF_STRATEGY_SWITCH = 1,
  // Update in the own parameterization, then transform the covariance.
  CTESKF_STRATEGY_TRANSFORM = 2,
};
#ifndef __cplusplus
typedef uint32_t CteskfStrategy;
#endif // __cplusplus

// Opaque filter handle.
typedef struct CteskfFilter CteskfFilter;

// Filter settings. Enumerated fields take the codes of the `Cteskf*` enums;
// start from [`cteskf_config_default`].
typedef struct CteskfConfig {
  uint32_t parameterization;
  uint32_t strategy;
  // Target of GNSS velocity updates under switch or transform.
  uint32_t gnss_target;
  // Target of odometer updates under switch or transform.
  uint32_t odo_target;
  uint32_t injection;
  uint32_t propagation;
  // Joseph-form covariance update.
  bool joseph;
  // Continuous noise densities: rad²/s, m²/s³, rad²/s³, m²/s⁵.
  double gyro_noise;
  double accel_noise;
  double gyro_bias_noise;
  double accel_bias_noise;
} CteskfConfig;

// Navigation state in the Earth-fixed frame.
typedef struct CteskfNavState {
  // s
  double time;
  // Body-to-Earth rotation, row-major.
  double attitude[9];
  // m/s
  double vel[3];
  // m
  double pos[3];
  // rad/s
  double gyro_bias[3];
  // m/s²
  double accel_bias[3];
} CteskfNavState;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version, a static NUL-terminated string.
const char *cteskf_version(void);

// Message of the last failed call on this thread, or an empty string after a
// successful one. Valid until the next call into the library on this thread.
const char *cteskf_last_error_message(void);

// Fills `out` with an EKF, plain updates, retraction injection and
// transported propagation; switch and transform targets are left-invariant
// for GNSS and right-invariant for the odometer. Noise densities are zero.
//
// # Safety
//
// `out` must be null or point to writable memory for one config.
enum CteskfStatus cteskf_config_default(struct CteskfConfig *out);

// Creates a filter at `initial` with covariance `covariance_ekf` (225
// doubles, row-major, in the EKF parameterization; converted to the
// configured one). On success `*out` holds a new handle.
//
// # Safety
//
// See the crate documentation.
enum CteskfStatus cteskf_filter_create(const struct CteskfConfig *config,
                                       const struct CteskfNavState *initial,
                                       const double *covariance_ekf,
                                       struct CteskfFilter **out);

// Releases a handle. Null is ignored.
//
// # Safety
//
// `filter` must be null or a live handle; it is invalid afterwards.
void cteskf_filter_destroy(struct CteskfFilter *filter);

// Propagates to `time` with the IMU sample ending there: gyro rate (rad/s)
// and specific force (m/s²), each 3 doubles in the body frame.
//
// # Safety
//
// See the crate documentation.
enum CteskfStatus cteskf_filter_propagate(struct CteskfFilter *filter,
                                          double time,
                                          const double *gyro,
                                          const double *accel);

// GNSS velocity update: Earth-fixed velocity (m/s) and per-axis standard
// deviations, 3 doubles each. `time` must match the filter time to within
// half of the last propagation step.
//
// # Safety
//
// See the crate documentation.
enum CteskfStatus cteskf_filter_update_gnss(struct CteskfFilter *filter,
                                            double time,
                                            const double *vel,
                                            const double *sigma);

// Odometer update: body-frame velocity (forward speed, then zero lateral and
// vertical pseudo-measurements) and per-axis standard deviations.
//
// # Safety
//
// See the crate documentation.
enum CteskfStatus cteskf_filter_update_odo(struct CteskfFilter *filter,
                                           double time,
                                           const double *vel_body,
                                           const double *sigma);

// Copies the current estimate into `out`.
//
// # Safety
//
// See the crate documentation.
enum CteskfStatus cteskf_filter_state(const struct CteskfFilter *filter,
                                      struct CteskfNavState *out);

// Copies the covariance, expressed in `parameterization` (a
// [`CteskfParameterization`] code) at the current estimate, into `out`
// (225 doubles, row-major).
//
// # Safety
//
// See the crate documentation.
enum CteskfStatus cteskf_filter_covariance(const struct CteskfFilter *filter,
                                           uint32_t parameterization,
                                           double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CTESKF_H */
