#ifndef AQM_H
#define AQM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes.
 */
typedef enum AqmStatus {
  AQM_STATUS_OK = 0,
  AQM_STATUS_NULL_POINTER = 1,
  AQM_STATUS_INVALID_ARGUMENT = 2,
  AQM_STATUS_DIMENSION_MISMATCH = 3,
  AQM_STATUS_NOT_HERMITIAN = 4,
  AQM_STATUS_INVALID_STATE = 5,
  AQM_STATUS_INVALID_CONTEXT = 6,
  AQM_STATUS_INCOMPATIBLE = 7,
  AQM_STATUS_IMPOSSIBLE_EVENT = 8,
  AQM_STATUS_INVALID_GEOMETRY = 9,
  AQM_STATUS_MODEL_VIOLATION = 10,
  AQM_STATUS_NON_UNITARY_SPLITTER = 11,
  AQM_STATUS_BUFFER_TOO_SMALL = 12,
  AQM_STATUS_INTERNAL = 99,
} AqmStatus;

/**
 * Choice policy selector for [`aqm_interferometer_equivalence`].
 */
typedef enum AqmPolicy {
  AQM_POLICY_ALWAYS_ABSENT = 0,
  AQM_POLICY_ALWAYS_PRESENT = 1,
  AQM_POLICY_DELAYED_RANDOM = 2,
  AQM_POLICY_DELAYED_ALTERNATING = 3,
} AqmPolicy;

/**
 * Opaque context handle.
 */
typedef struct AqmContext AqmContext;

/**
 * Opaque density-matrix handle.
 */
typedef struct AqmState AqmState;

typedef struct AqmComplex {
  double re;
  double im;
} AqmComplex;

/**
 * Detector statistics per `M4` sub-ensemble. Event counts are zero for an
 * empty sub-ensemble.
 */
typedef struct AqmEquivalence {
  uint64_t absent_events;
  double absent_freq_da;
  double absent_freq_db;
  uint64_t present_events;
  double present_freq_da;
  double present_freq_db;
  double max_deviation;
  bool pass;
} AqmEquivalence;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *aqm_version(void);

/**
 * Copies the last error message of this thread into `buf` (NUL-terminated,
 * truncated to `len`). Returns the full message length without the NUL.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t aqm_last_error_message(char *buf, size_t len);

/**
 * Pure state from `dim` amplitudes (normalized internally).
 *
 * # Safety
 * `amplitudes` must point to `dim` values; `out` must be writable.
 */
enum AqmStatus aqm_state_from_pure(const struct AqmComplex *amplitudes,
                                   size_t dim,
                                   struct AqmState **out_state);

/**
 * State from a density matrix.
 *
 * # Safety
 * `rho` must point to `dim * dim` values; `out` must be writable.
 */
enum AqmStatus aqm_state_from_density(const struct AqmComplex *rho,
                                      size_t dim,
                                      struct AqmState **out_state);

/**
 * # Safety
 * `state` must be null or a handle not yet freed.
 */
void aqm_state_free(struct AqmState *state);

/**
 * # Safety
 * `state` must be a live handle; `out_dim` must be writable.
 */
enum AqmStatus aqm_state_dim(const struct AqmState *state, size_t *out_dim);

/**
 * `tr(ρX)` for a `dim × dim` matrix `x`.
 *
 * # Safety
 * `state` must be a live handle, `x` must point to `dim * dim` values.
 */
enum AqmStatus aqm_state_expectation(const struct AqmState *state,
                                     const struct AqmComplex *x,
                                     size_t dim,
                                     struct AqmComplex *out_value);

/**
 * Maximal context diagonalizing the Hermitian matrix `a`; degenerate
 * eigenspaces are split along the standard basis.
 *
 * # Safety
 * `id` must be a NUL-terminated UTF-8 string, `a` must point to
 * `dim * dim` values.
 */
enum AqmStatus aqm_context_from_observable(const char *id,
                                           const struct AqmComplex *a,
                                           size_t dim,
                                           struct AqmContext **out_context);

/**
 * Number of projectors in the context.
 *
 * # Safety
 * `context` must be a live handle; `out_len` must be writable.
 */
enum AqmStatus aqm_context_len(const struct AqmContext *context, size_t *out_len);

/**
 * # Safety
 * `context` must be null or a handle not yet freed.
 */
void aqm_context_free(struct AqmContext *context);

/**
 * Born probabilities of the context's branches; `len` must equal the
 * context length.
 *
 * # Safety
 * Handles must be live; `probs` must point to `len` writable values.
 */
enum AqmStatus aqm_born_distribution(const struct AqmState *state,
                                     const struct AqmContext *context,
                                     double *probs,
                                     size_t len);

/**
 * Measures the Hermitian matrix `a` with the context on stream
 * `(seed, trial)`. Writes the value, the branch index and a new handle to
 * the post-measurement state.
 *
 * # Safety
 * Handles must be live, `a` must point to `dim * dim` values and the
 * out-pointers must be writable.
 */
enum AqmStatus aqm_measure(const struct AqmState *state,
                           const struct AqmComplex *a,
                           size_t dim,
                           const struct AqmContext *context,
                           uint64_t seed,
                           uint64_t trial,
                           double *out_value,
                           size_t *out_branch,
                           struct AqmState **out_post);

/**
 * `EρE / tr(ρE)` for a projector `e`.
 *
 * # Safety
 * `state` must be live, `e` must point to `dim * dim` values.
 */
enum AqmStatus aqm_condition_on_event(const struct AqmState *state,
                                      const struct AqmComplex *e,
                                      size_t dim,
                                      struct AqmState **out_state);

/**
 * Wave-model detector probabilities of the interferometer with the
 * standard splitter and an extra phase on path A.
 *
 * # Safety
 * The out-pointers must be writable.
 */
enum AqmStatus aqm_wave_probabilities(bool m4_present,
                                      double path_a_phase,
                                      double *out_p_da,
                                      double *out_p_db);

/**
 * Runs `n` particle-model events and compares each `M4` sub-ensemble
 * with the wave model. `p` and `policy_seed` are used only by
 * [`AqmPolicy::DelayedRandom`].
 *
 * # Safety
 * `out_report` must be writable.
 */
enum AqmStatus aqm_interferometer_equivalence(enum AqmPolicy policy,
                                              double p,
                                              uint64_t policy_seed,
                                              uint64_t n,
                                              uint64_t seed,
                                              struct AqmEquivalence *out_report);

/**
 * Per-site momentum pattern of a two-slit device: the slit-a and slit-b
 * terms, the interference term and the total, each written to an array of
 * `sites` values. A null `source` selects the uniform source.
 *
 * # Safety
 * `slit_a`/`slit_b` must point to `len_a`/`len_b` indices, `source` must
 * be null or point to `sites` amplitudes, and each output array must hold
 * `sites` values.
 */
enum AqmStatus aqm_two_slit_pattern(size_t sites,
                                    const size_t *slit_a,
                                    size_t len_a,
                                    const size_t *slit_b,
                                    size_t len_b,
                                    const struct AqmComplex *source_amplitudes,
                                    double *out_direct_a,
                                    double *out_direct_b,
                                    double *out_interference,
                                    double *out_total);

/**
 * Stacked single-event screens: writes the histogram over `sites` momentum
 * sites and how many events went through each slit.
 *
 * # Safety
 * As for [`aqm_two_slit_pattern`]; `out_histogram` must hold `sites`
 * values.
 */
enum AqmStatus aqm_stacked_screens(size_t sites,
                                   const size_t *slit_a,
                                   size_t len_a,
                                   const size_t *slit_b,
                                   size_t len_b,
                                   const struct AqmComplex *source_amplitudes,
                                   uint64_t n_events,
                                   uint64_t seed,
                                   uint64_t *out_histogram,
                                   uint64_t *out_count_a,
                                   uint64_t *out_count_b);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* AQM_H */
