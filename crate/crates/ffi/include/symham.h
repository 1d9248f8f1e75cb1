#ifndef SYMHAM_H
#define SYMHAM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Integrator selector for [`symham_rollout`].
 */
typedef enum SymhamScheme {
  SYMHAM_SCHEME_LEAPFROG = 0,
  SYMHAM_SCHEME_RK2 = 1,
} SymhamScheme;

/**
 * Result codes shared by every exported function.
 */
typedef enum SymhamStatus {
  SYMHAM_STATUS_OK = 0,
  SYMHAM_STATUS_NULL_POINTER = 1,
  SYMHAM_STATUS_INVALID_UTF8 = 2,
  /**
   * Malformed input: bad JSON, wrong lengths or operator kinds.
   */
  SYMHAM_STATUS_INVALID = 3,
  /**
   * Evaluation or integration produced a non-finite value.
   */
  SYMHAM_STATUS_NUMERICAL = 4,
  /**
   * The output buffer is too small; the required size was reported.
   */
  SYMHAM_STATUS_BUFFER_TOO_SMALL = 5,
  SYMHAM_STATUS_PANIC = 6,
} SymhamStatus;

/**
 * Opaque handle to an expression tree.
 */
typedef struct SymhamTree SymhamTree;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the most recent failure on this thread. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *symham_last_error_message(void);

/**
 * Library version as a NUL-terminated string with static lifetime.
 */
const char *symham_version(void);

/**
 * Parses a tree from its JSON form (template, sequence, weights).
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a writable pointer. On
 * success `*out` owns a tree that must be released with
 * [`symham_tree_free`].
 */
enum SymhamStatus symham_tree_from_json(const char *json, struct SymhamTree **out);

/**
 * Releases a tree. Null is ignored.
 *
 * # Safety
 * `tree` must come from [`symham_tree_from_json`] and not be used again.
 */
void symham_tree_free(struct SymhamTree *tree);

/**
 * Momentum and position dimensions expected by the tree.
 *
 * # Safety
 * `tree` must be a live handle; `p_dim` and `q_dim` writable.
 */
enum SymhamStatus symham_tree_dims(const struct SymhamTree *tree, size_t *p_dim, size_t *q_dim);

/**
 * Evaluates `H(p, q)`.
 *
 * # Safety
 * `p` and `q` must point to `p_len` and `q_len` doubles; `out` writable.
 */
enum SymhamStatus symham_tree_evaluate(const struct SymhamTree *tree,
                                       const double *p,
                                       size_t p_len,
                                       const double *q,
                                       size_t q_len,
                                       double *out);

/**
 * Writes `∂H/∂p` into `dp` (length `p_len`) and `∂H/∂q` into `dq`
 * (length `q_len`).
 *
 * # Safety
 * All pointers must reference buffers of the stated lengths.
 */
enum SymhamStatus symham_tree_partials(const struct SymhamTree *tree,
                                       const double *p,
                                       size_t p_len,
                                       const double *q,
                                       size_t q_len,
                                       double *dp,
                                       double *dq);

/**
 * Renders the tree as text, folded (`folded != 0`) or raw. Writes at most
 * `capacity` bytes including the terminating NUL and stores the required
 * capacity in `needed`.
 *
 * # Safety
 * `buf` must have room for `capacity` bytes (it may be null when
 * `capacity` is 0); `needed` must be writable.
 */
enum SymhamStatus symham_tree_render(const struct SymhamTree *tree,
                                     int32_t folded,
                                     char *buf,
                                     size_t capacity,
                                     size_t *needed);

/**
 * Integrates the tree's Hamiltonian from `(p0, q0)` for `steps` steps of
 * size `dt`, each split into `substeps` substeps. Writes `steps + 1` rows of
 * `(p, q)` into `out`, which must hold `(steps + 1) · 2 · dim` doubles.
 *
 * # Safety
 * `p0` and `q0` must hold `dim` doubles each; `out` as stated above.
 */
enum SymhamStatus symham_rollout(const struct SymhamTree *tree,
                                 enum SymhamScheme scheme,
                                 const double *p0,
                                 const double *q0,
                                 size_t dim,
                                 double dt,
                                 size_t steps,
                                 size_t substeps,
                                 double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SYMHAM_H */
