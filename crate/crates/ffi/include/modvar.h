#ifndef MODVAR_H
#define MODVAR_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum ModvarStatus {
  MODVAR_STATUS_OK = 0,
  MODVAR_STATUS_NULL_POINTER = 1,
  MODVAR_STATUS_INVALID_PARAMETER = 2,
  MODVAR_STATUS_NON_FINITE = 3,
  MODVAR_STATUS_INCOMMENSURATE = 4,
  MODVAR_STATUS_GRID_TOO_SMALL = 5,
  MODVAR_STATUS_GRID_TOO_COARSE = 6,
  MODVAR_STATUS_ALIASING = 7,
  MODVAR_STATUS_ARITY = 8,
  MODVAR_STATUS_BRACKET_FAILURE = 9,
  MODVAR_STATUS_NO_CONVERGENCE = 10,
  MODVAR_STATUS_FORMAT = 11,
  MODVAR_STATUS_IO = 12,
  MODVAR_STATUS_JSON = 13,
  MODVAR_STATUS_UTF8 = 14,
  MODVAR_STATUS_PANIC = 15,
} ModvarStatus;

/**
 * Two-particle state handle.
 */
typedef struct ModvarState ModvarState;

typedef struct ModvarCriterion {
  double var_n_tot;
  double var_mod_rel;
  double lhs;
  double bound;
  double c;
  bool violated;
  bool marginal;
} ModvarCriterion;

typedef struct ModvarRobustness {
  double epsilon_closed_form;
  double epsilon_bisection;
  double discrepancy;
  double visibility_at_threshold;
  bool flagged;
} ModvarRobustness;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread; empty after success.
 * The pointer stays valid until the next call on the same thread.
 */
const char *modvar_last_error_message(void);

/**
 * Squeezing functions S1(N) and S2(N).
 */
enum ModvarStatus modvar_squeezing(size_t n, double *s1, double *s2);

/**
 * Fringe function F_N(x).
 */
enum ModvarStatus modvar_fringe(size_t n, double x, double *out);

/**
 * Criterion constant c by the shooting solve, to tolerance `tol`.
 */
enum ModvarStatus modvar_solve_c(double tol, double *out);

/**
 * First-order estimate 7/90 of c.
 */
double modvar_perturbative_c(void);

/**
 * MPE state with a Gaussian envelope of width `sigma`.
 */
enum ModvarStatus modvar_state_new_mpe(size_t n,
                                       double x0,
                                       int64_t n0,
                                       double lambda,
                                       double sigma,
                                       struct ModvarState **out);

/**
 * Classically correlated counterpart of the MPE state.
 */
enum ModvarStatus modvar_state_new_classical(size_t n,
                                             double x0,
                                             int64_t n0,
                                             double lambda,
                                             double sigma,
                                             struct ModvarState **out);

/**
 * Two-particle state from a JSON descriptor.
 *
 * # Safety
 * `json` must be a NUL-terminated string.
 */
enum ModvarStatus modvar_state_from_json(const char *json, struct ModvarState **out);

/**
 * `w_a·a + w_b·b` with weights renormalized. Both states must share λ.
 */
enum ModvarStatus modvar_state_mix(const struct ModvarState *a,
                                   double w_a,
                                   const struct ModvarState *b,
                                   double w_b,
                                   struct ModvarState **out);

/**
 * Releases a handle; null is ignored.
 *
 * # Safety
 * `state` must be null or a handle not yet freed.
 */
void modvar_state_free(struct ModvarState *state);

/**
 * Serialized state. Handles built from a descriptor return the descriptor;
 * others return the full component list. Free with [`modvar_string_free`].
 */
enum ModvarStatus modvar_state_to_json(const struct ModvarState *state, char **out);

/**
 * Releases a string returned by this library; null is ignored.
 *
 * # Safety
 * `s` must be null or a string from this library not yet freed.
 */
void modvar_string_free(char *s);

/**
 * Criterion on the integer-momentum axis. `grid_points = 0` picks 2^16.
 */
enum ModvarStatus modvar_evaluate_criterion(const struct ModvarState *state,
                                            size_t grid_points,
                                            struct ModvarCriterion *out);

/**
 * Admixture threshold for the N-component MPE state. `grid_points = 0` picks 2^14.
 */
enum ModvarStatus modvar_robustness(size_t n,
                                    double lambda,
                                    double sigma,
                                    size_t grid_points,
                                    struct ModvarRobustness *out);

/**
 * Fringe visibility of `(1−ε)·MPE + ε·classical`.
 */
enum ModvarStatus modvar_visibility(double epsilon, size_t n, double *out);

/**
 * Visibility of N packets emitted `stagger` apart, evaluated at `meeting_time`.
 */
enum ModvarStatus modvar_protocol_visibility(size_t n,
                                             double stagger,
                                             double lambda,
                                             double sigma,
                                             double mass,
                                             double meeting_time,
                                             double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MODVAR_H */
