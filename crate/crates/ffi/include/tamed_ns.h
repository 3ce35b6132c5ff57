#ifndef TAMED_NS_H
#define TAMED_NS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes shared by all entry points.
 */
typedef enum TnsStatus {
  TNS_STATUS_OK = 0,
  TNS_STATUS_NULL_POINTER = 1,
  TNS_STATUS_CONFIG = 2,
  TNS_STATUS_DOMAIN = 3,
  TNS_STATUS_STRUCTURAL = 4,
  TNS_STATUS_BLOW_UP = 5,
  TNS_STATUS_NON_CONVERGENCE = 6,
  TNS_STATUS_BOUND_VIOLATED = 7,
  TNS_STATUS_STIFFNESS = 8,
  TNS_STATUS_RESOLUTION_CAP = 9,
  TNS_STATUS_FORMAT = 10,
  TNS_STATUS_IO = 11,
  TNS_STATUS_CHECK_FAILED = 12,
  TNS_STATUS_PANIC = 13,
} TnsStatus;

/**
 * Time-stepping scheme.
 */
typedef enum TnsMode {
  TNS_MODE_ETD1 = 0,
  TNS_MODE_ETD2 = 1,
  TNS_MODE_PICARD = 2,
} TnsMode;

/**
 * Outcome of a check.
 */
typedef enum TnsCheck {
  TNS_CHECK_PASS = 0,
  TNS_CHECK_FAIL = 1,
  TNS_CHECK_INFO = 2,
  TNS_CHECK_INCONCLUSIVE = 3,
} TnsCheck;

/**
 * A state on the periodic box together with its taming parameters.
 */
typedef struct TnsSolver TnsSolver;

/**
 * Observables of a finished run.
 */
typedef struct TnsTrajectory TnsTrajectory;

/**
 * One recorded row of a trajectory.
 */
typedef struct TnsSample {
  double time;
  double l2;
  double h1;
  /**
   * `||A u||_{L2}`.
   */
  double h2;
  double sup;
  double g_value;
  double cum_diss_h1;
  double cum_diss_h2;
} TnsSample;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *tns_version(void);

/**
 * Message of the last failed call on this thread, or NULL. The pointer is
 * valid until the next failing call on the same thread.
 */
const char *tns_last_error_message(void);

/**
 * Create a solver on the `2*pi`-periodic box with `n` grid points per axis
 * and a zero state. Pass `threshold = INFINITY` for the untamed equation.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle.
 */
enum TnsStatus tns_solver_new(size_t n,
                              double nu,
                              double kappa,
                              double threshold,
                              struct TnsSolver **out);

/**
 * Release a solver. NULL is ignored.
 *
 * # Safety
 * `s` must be NULL or a handle from [`tns_solver_new`] not yet freed.
 */
void tns_solver_free(struct TnsSolver *s);

/**
 * Number of spectral modes.
 *
 * # Safety
 * `s` and `out` must be valid pointers.
 */
enum TnsStatus tns_solver_mode_count(const struct TnsSolver *s, size_t *out);

/**
 * Current time of the solver state.
 *
 * # Safety
 * `s` and `out` must be valid pointers.
 */
enum TnsStatus tns_solver_time(const struct TnsSolver *s, double *out);

/**
 * Replace the state by a random field with spectral slope `slope`,
 * normalized to `||grad u|| = h1`. Resets the time to zero.
 *
 * # Safety
 * `s` must be a valid handle.
 */
enum TnsStatus tns_solver_set_random(struct TnsSolver *s, uint64_t seed, double slope, double h1);

/**
 * Replace the state by the Taylor-Green vortex. Resets the time to zero.
 *
 * # Safety
 * `s` must be a valid handle.
 */
enum TnsStatus tns_solver_set_taylor_green(struct TnsSolver *s, double amplitude);

/**
 * Copy the state coefficients into `buf`, which holds `len` doubles.
 *
 * # Safety
 * `buf` must point to `len` writable doubles.
 */
enum TnsStatus tns_solver_get_coefficients(const struct TnsSolver *s, double *buf, size_t len);

/**
 * Set the state from `len` interleaved doubles. Resets the time to zero.
 *
 * # Safety
 * `buf` must point to `len` readable doubles.
 */
enum TnsStatus tns_solver_set_coefficients(struct TnsSolver *s, const double *buf, size_t len);

/**
 * Norms of the current state: `out[0..4] = (L2, H1, H2, sup)`.
 *
 * # Safety
 * `out` must point to 4 writable doubles.
 */
enum TnsStatus tns_solver_norms(const struct TnsSolver *s, double *out);

/**
 * Advance the state by `horizon` with step `dt`, recording every
 * `cadence` steps. On success the solver holds the final state and
 * `*out_traj` a new trajectory handle; on failure the state is unchanged.
 *
 * # Safety
 * `s` must be a valid handle and `out_traj` a valid pointer.
 */
enum TnsStatus tns_solver_run(struct TnsSolver *s,
                              double dt,
                              double horizon,
                              enum TnsMode mode,
                              size_t cadence,
                              struct TnsTrajectory **out_traj);

/**
 * Release a trajectory. NULL is ignored.
 *
 * # Safety
 * `t` must be NULL or a handle from [`tns_solver_run`] not yet freed.
 */
void tns_trajectory_free(struct TnsTrajectory *t);

/**
 * Number of recorded rows.
 *
 * # Safety
 * `t` and `out` must be valid pointers.
 */
enum TnsStatus tns_trajectory_len(const struct TnsTrajectory *t, size_t *out);

/**
 * Recorded row `i`.
 *
 * # Safety
 * `t` and `out` must be valid pointers.
 */
enum TnsStatus tns_trajectory_get(const struct TnsTrajectory *t, size_t i, struct TnsSample *out);

/**
 * Write the trajectory as CSV.
 *
 * # Safety
 * `path` must be a NUL-terminated string.
 */
enum TnsStatus tns_trajectory_save_csv(const struct TnsTrajectory *t, const char *path);

/**
 * Run the energy-inequality check. `out_margin` may be NULL.
 *
 * # Safety
 * `t` and `out_check` must be valid pointers.
 */
enum TnsStatus tns_trajectory_check_energy(const struct TnsTrajectory *t,
                                           enum TnsCheck *out_check,
                                           double *out_margin);

/**
 * Run verification groups at resolution `n` and return the JSON report in
 * `*out_json` (release with [`tns_string_free`]). `groups` is a
 * comma-separated list, or NULL for all groups. Returns
 * `TNS_STATUS_CHECK_FAILED` when any check fails; the report is still
 * produced.
 *
 * # Safety
 * `groups` must be NULL or NUL-terminated; `out_json` must be valid.
 */
enum TnsStatus tns_run_suite(size_t n, uint64_t seed, const char *groups, char **out_json);

/**
 * Release a string returned by this library. NULL is ignored.
 *
 * # Safety
 * `p` must be NULL or a string from this library not yet freed.
 */
void tns_string_free(char *p);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TAMED_NS_H */
