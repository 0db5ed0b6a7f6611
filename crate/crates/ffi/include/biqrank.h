#ifndef BIQRANK_H
#define BIQRANK_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

/**
 * Written to `r_lower` when no lower bound applies.
 */
#define BIQ_NO_RANK ~0

/**
 * Result code of every call.
 */
typedef enum BiqStatus {
  BIQ_STATUS_OK = 0,
  BIQ_STATUS_NULL_POINTER = 1,
  BIQ_STATUS_INVALID_ARGUMENT = 2,
  BIQ_STATUS_PARSE_ERROR = 3,
  BIQ_STATUS_SIZE_LIMIT = 4,
  BIQ_STATUS_NOT_CERTIFIED = 5,
  BIQ_STATUS_NOT_C4_FREE = 6,
  BIQ_STATUS_SEARCH_FAILED = 7,
  BIQ_STATUS_NUMERICAL = 8,
  BIQ_STATUS_PANIC = 9,
} BiqStatus;

typedef enum BiqChoi {
  BIQ_CHOI_CLASSICAL = 0,
  BIQ_CHOI_PRINTED = 1,
} BiqChoi;

/**
 * Outcome of a certification.
 */
typedef enum BiqSosStatus {
  BIQ_SOS_STATUS_SOS = 0,
  BIQ_SOS_STATUS_NOT_SOS = 1,
  BIQ_SOS_STATUS_INCONCLUSIVE = 2,
} BiqSosStatus;

/**
 * Opaque SOS certificate.
 */
typedef struct BiqCertificate BiqCertificate;

/**
 * Opaque biquadratic form.
 */
typedef struct BiqForm BiqForm;

/**
 * Opaque bipartite graph.
 */
typedef struct BiqGraph BiqGraph;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *biq_version(void);

/**
 * Message of the last failed call on this thread, or NULL. Free with
 * [`biq_string_free`].
 */
char *biq_last_error_message(void);

/**
 * # Safety
 * `s` is NULL or a string returned by this library and not yet freed.
 */
void biq_string_free(char *s);

/**
 * Form from the JSON file format (1-based indices).
 *
 * # Safety
 * `json` is a NUL-terminated string; `out` is writable.
 */
enum BiqStatus biq_form_from_json(const char *json, struct BiqForm **out_form);

/**
 * Form from `count` tensor entries: `indices` holds `4 * count` values
 * `i, j, k, l` (0-based) and `values` the matching coefficients.
 *
 * # Safety
 * `indices` has `4 * count` and `values` has `count` readable elements.
 */
enum BiqStatus biq_form_new(size_t m,
                            size_t n,
                            const size_t *indices,
                            const double *values,
                            size_t count,
                            struct BiqForm **out_form);

/**
 * # Safety
 * `out_form` is writable.
 */
enum BiqStatus biq_form_choi(enum BiqChoi variant, struct BiqForm **out_form);

/**
 * The simple form `Σ_{(i,j) ∈ E} x_i² y_j²` of a graph.
 *
 * # Safety
 * `graph` is a live handle; `out_form` is writable.
 */
enum BiqStatus biq_form_from_graph(const struct BiqGraph *graph, struct BiqForm **out_form);

/**
 * `P(x, y)` with `x` of length `m` and `y` of length `n`.
 *
 * # Safety
 * `form` is a live handle; `x`, `y` have the given lengths; `value` is writable.
 */
enum BiqStatus biq_form_evaluate(const struct BiqForm *form,
                                 const double *x,
                                 size_t x_len,
                                 const double *y,
                                 size_t y_len,
                                 double *value);

/**
 * JSON file format of the form. Free the string with [`biq_string_free`].
 *
 * # Safety
 * `form` is a live handle; `out_json` is writable.
 */
enum BiqStatus biq_form_to_json(const struct BiqForm *form, char **out_json);

/**
 * # Safety
 * `form` is NULL or a handle not yet freed.
 */
void biq_form_free(struct BiqForm *form);

/**
 * Graph from the JSON file format (1-based indices).
 *
 * # Safety
 * `json` is a NUL-terminated string; `out_graph` is writable.
 */
enum BiqStatus biq_graph_from_json(const char *json, struct BiqGraph **out_graph);

/**
 * Graph from `count` 0-based edges stored as pairs `i, j` in `edges`.
 *
 * # Safety
 * `edges` has `2 * count` readable elements; `out_graph` is writable.
 */
enum BiqStatus biq_graph_new(size_t m,
                             size_t n,
                             const size_t *edges,
                             size_t count,
                             struct BiqGraph **out_graph);

/**
 * # Safety
 * `graph` is a live handle; the outputs are writable.
 */
enum BiqStatus biq_graph_info(const struct BiqGraph *graph,
                              size_t *out_m,
                              size_t *out_n,
                              size_t *out_edges,
                              bool *out_c4_free);

/**
 * JSON file format of the graph. Free the string with [`biq_string_free`].
 *
 * # Safety
 * `graph` is a live handle; `out_json` is writable.
 */
enum BiqStatus biq_graph_to_json(const struct BiqGraph *graph, char **out_json);

/**
 * # Safety
 * `graph` is NULL or a handle not yet freed.
 */
void biq_graph_free(struct BiqGraph *graph);

/**
 * Exact `z(m, n)`. `out_witness` may be NULL; otherwise it receives an
 * extremal graph to free with [`biq_graph_free`]. `limit` caps both sides.
 *
 * # Safety
 * `out_z` is writable; `out_witness` is NULL or writable.
 */
enum BiqStatus biq_zarankiewicz(size_t m,
                                size_t n,
                                size_t limit,
                                size_t jobs,
                                size_t *out_z,
                                struct BiqGraph **out_witness);

/**
 * SOS rank `|E|` of the simple form of a 4-cycle-free graph.
 *
 * # Safety
 * `graph` is a live handle; `out_rank` is writable.
 */
enum BiqStatus biq_simple_rank_exact(const struct BiqGraph *graph, size_t *out_rank);

/**
 * Certifies SOS with the default tolerances.
 *
 * # Safety
 * `form` is a live handle; `out_cert` is writable.
 */
enum BiqStatus biq_certify(const struct BiqForm *form,
                           uint64_t seed,
                           struct BiqCertificate **out_cert);

/**
 * # Safety
 * `cert` is a live handle; the outputs are writable.
 */
enum BiqStatus biq_certificate_result(const struct BiqCertificate *cert,
                                      enum BiqSosStatus *out_status,
                                      double *out_lambda_star);

/**
 * Certificate as JSON. Free the string with [`biq_string_free`].
 *
 * # Safety
 * `cert` is a live handle; `out_json` is writable.
 */
enum BiqStatus biq_certificate_to_json(const struct BiqCertificate *cert, char **out_json);

/**
 * # Safety
 * `cert` is NULL or a handle not yet freed.
 */
void biq_certificate_free(struct BiqCertificate *cert);

/**
 * Rank-capped search for the SOS rank over caps `r_min..=r_max`.
 * `out_r_lower` receives [`BIQ_NO_RANK`] when no lower bound applies.
 *
 * # Safety
 * `form` is a live handle; the outputs are writable.
 */
enum BiqStatus biq_sos_rank(const struct BiqForm *form,
                            size_t r_min,
                            size_t r_max,
                            uint64_t seed,
                            size_t *out_r_upper,
                            size_t *out_r_lower,
                            double *out_residual);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BIQRANK_H */
