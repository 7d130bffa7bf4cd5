#ifndef VECPIPE_H
#define VECPIPE_H

/* Generated by cbindgen from vecpipe-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible entry point.
 */
typedef enum VpStatus {
  VP_STATUS_OK = 0,
  /**
   * The source text is outside the supported C subset.
   */
  VP_STATUS_PARSE_ERROR = 1,
  /**
   * A null pointer or invalid value was passed in.
   */
  VP_STATUS_INVALID_ARGUMENT = 2,
  /**
   * Loop analysis failed (no canonical loop, unsupported step, ...).
   */
  VP_STATUS_ANALYSIS_ERROR = 3,
  /**
   * A source rewrite could not be applied.
   */
  VP_STATUS_TRANSFORM_ERROR = 4,
  /**
   * An external tool (C compiler) failed or is missing.
   */
  VP_STATUS_TOOL_ERROR = 5,
  /**
   * Input bytes were not valid UTF-8.
   */
  VP_STATUS_UTF8_ERROR = 6,
  /**
   * Internal panic; details via vp_last_error.
   */
  VP_STATUS_INTERNAL_ERROR = 7,
} VpStatus;

/**
 * Opaque parsed kernel function.
 */
typedef struct VpFunction VpFunction;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Last error message for this thread; valid until the next failing call.
 */
const char *vp_last_error(void);

/**
 * Library version as a static string.
 */
const char *vp_version(void);

/**
 * Parse one kernel function from C source text into an opaque handle.
 *
 * # Safety
 * `source` must be a NUL-terminated string; `out` must be a valid pointer.
 */
enum VpStatus vp_parse_function(const char *source, struct VpFunction **out);

/**
 * Release a handle returned by any `vp_*` constructor.
 *
 * # Safety
 * `f` must come from this library and not have been freed already.
 */
void vp_function_free(struct VpFunction *f);

/**
 * Release a string returned through a `char **` out-parameter.
 *
 * # Safety
 * `s` must come from this library and not have been freed already.
 */
void vp_string_free(char *s);

/**
 * Print a handle back to compilable C text.
 *
 * # Safety
 * `f` must be a live handle; `out` must be a valid pointer.
 */
enum VpStatus vp_print_function(const struct VpFunction *f, char **out);

/**
 * Structural equality under parse-time normalization.
 *
 * # Safety
 * Both handles must be live; `out` must be a valid pointer.
 */
enum VpStatus vp_ast_equal(const struct VpFunction *a, const struct VpFunction *b, bool *out);

/**
 * Compute the alignment plan for a scalar/vectorized loop pair: `v` is the
 * lcm of the two steps, `m = v / step1`, and `assumption` receives the
 * divisibility expression text (caller frees).
 *
 * # Safety
 * Handles must be live; out-pointers may be null to skip an output.
 */
enum VpStatus vp_compute_alignment(const struct VpFunction *src,
                                   const struct VpFunction *vec,
                                   uint32_t *m_out,
                                   uint32_t *v_out,
                                   char **assumption_out);

/**
 * Unroll the kernel's single loop `m` times at the C level.
 *
 * # Safety
 * `f` must be a live handle; `out` must be a valid pointer.
 */
enum VpStatus vp_unroll_scalar(const struct VpFunction *f, uint32_t m, struct VpFunction **out);

/**
 * Move array parameters of both functions to file-scope extern arrays,
 * identically on both sides.
 *
 * # Safety
 * Handles must be live; out-pointers must be valid.
 */
enum VpStatus vp_externalize_arrays(const struct VpFunction *src,
                                    const struct VpFunction *vec,
                                    struct VpFunction **src_out,
                                    struct VpFunction **vec_out);

/**
 * pass@k = 1 - C(n-c,k)/C(n,k), exact for n <= 100.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum VpStatus vp_pass_at_k(uint64_t n, uint64_t c, uint64_t k, double *out);

/**
 * Checksum-test a candidate (raw C text) against a scalar kernel (raw C
 * text). On success `verdict_json_out` receives the verdict record as JSON
 * (caller frees). Requires a C compiler on PATH.
 *
 * # Safety
 * String arguments must be NUL-terminated; `verdict_json_out` must be valid.
 */
enum VpStatus vp_run_checksum_test(const char *src_text,
                                   const char *candidate_text,
                                   uint32_t trip_count,
                                   uint32_t trials,
                                   uint64_t seed,
                                   char **verdict_json_out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* VECPIPE_H */
