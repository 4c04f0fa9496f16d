#ifndef LSJM_H
#define LSJM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum LsjmStatus {
  LSJM_STATUS_OK = 0,
  LSJM_STATUS_NULL_POINTER = 1,
  LSJM_STATUS_INVALID_UTF8 = 2,
  LSJM_STATUS_PARSE = 3,
  LSJM_STATUS_INVALID_INPUT = 4,
  LSJM_STATUS_NUMERICAL = 5,
  LSJM_STATUS_IO = 6,
  LSJM_STATUS_OUT_OF_RANGE = 7,
  LSJM_STATUS_BUFFER_TOO_SMALL = 8,
  LSJM_STATUS_PANIC = 9,
} LsjmStatus;

/**
 * A fitted single-view or joint model.
 */
typedef struct LsjmModel LsjmModel;

/**
 * A multiplex network: one node set, one or more views.
 */
typedef struct LsjmNetwork LsjmNetwork;

/**
 * Fit options; obtain defaults from [`lsjm_options_default`].
 */
typedef struct LsjmOptions {
  double prior_xi;
  double prior_psi2;
  double sigma2;
  size_t dim;
  double tol;
  size_t min_iters;
  size_t max_iters;
  size_t restarts;
  uint64_t seed;
} LsjmOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Default options: N(0, 2) intercept prior, unit latent variance, two
 * dimensions, ten restarts.
 */
struct LsjmOptions lsjm_options_default(void);

/**
 * Message for the last failed call on this thread, or null. Valid until
 * the next call into the library on this thread.
 */
const char *lsjm_last_error_message(void);

/**
 * Builds a network from `count` NUL-terminated edge-list texts, one per
 * view. All views must resolve to the same node set.
 *
 * # Safety
 * `texts` must point to `count` valid C strings; `out` must be writable.
 */
enum LsjmStatus lsjm_network_from_edge_lists(const char *const *texts,
                                             size_t count,
                                             struct LsjmNetwork **out);

/**
 * # Safety
 * `network` must come from this library or be null.
 */
void lsjm_network_free(struct LsjmNetwork *network);

/**
 * # Safety
 * `network` must be a live handle; `n` and `k` must be writable.
 */
enum LsjmStatus lsjm_network_shape(const struct LsjmNetwork *network, size_t *n, size_t *k);

/**
 * Fits the single-view model to view `view` of `network`.
 *
 * # Safety
 * Pointers must be valid; `out` receives a new model handle.
 */
enum LsjmStatus lsjm_fit_lsm(const struct LsjmNetwork *network,
                             size_t view,
                             const struct LsjmOptions *options,
                             struct LsjmModel **out);

/**
 * Fits the joint model to all views of `network`, with the same prior for
 * every view.
 *
 * # Safety
 * Pointers must be valid; `out` receives a new model handle.
 */
enum LsjmStatus lsjm_fit_lsjm(const struct LsjmNetwork *network,
                              const struct LsjmOptions *options,
                              struct LsjmModel **out);

/**
 * Loads a model written by [`lsjm_model_write`] or the `lsjm` tool.
 *
 * # Safety
 * `path` must be a C string; `out` must be writable.
 */
enum LsjmStatus lsjm_model_read(const char *path, struct LsjmModel **out);

/**
 * # Safety
 * `model` must come from this library or be null.
 */
void lsjm_model_free(struct LsjmModel *model);

/**
 * Number of nodes, views and latent dimensions of a model.
 *
 * # Safety
 * `model` must be live; outputs must be writable.
 */
enum LsjmStatus lsjm_model_shape(const struct LsjmModel *model, size_t *n, size_t *k, size_t *dim);

/**
 * Whether the selected restart met the stopping rule.
 *
 * # Safety
 * `model` must be live; `converged` must be writable.
 */
enum LsjmStatus lsjm_model_converged(const struct LsjmModel *model, bool *converged);

/**
 * Posterior mean and variance of the intercept of `view`.
 *
 * # Safety
 * `model` must be live; outputs must be writable.
 */
enum LsjmStatus lsjm_model_alpha(const struct LsjmModel *model,
                                 size_t view,
                                 double *mean,
                                 double *variance);

/**
 * Copies posterior mean positions, row-major `n × dim`, into `buffer`.
 * `view` equal to the number of views selects the fused positions of a
 * joint model.
 *
 * # Safety
 * `buffer` must hold `len` doubles.
 */
enum LsjmStatus lsjm_model_positions(const struct LsjmModel *model,
                                     size_t view,
                                     double *buffer,
                                     size_t len);

/**
 * Plug-in probability of a link from `i` to `j` in `view`, using that
 * view's positions and intercept.
 *
 * # Safety
 * `model` must be live; `probability` must be writable.
 */
enum LsjmStatus lsjm_model_link_probability(const struct LsjmModel *model,
                                            size_t view,
                                            size_t i,
                                            size_t j,
                                            double *probability);

/**
 * Writes the model as a TOML artifact.
 *
 * # Safety
 * `model` must be live; `path` must be a C string.
 */
enum LsjmStatus lsjm_model_write(const struct LsjmModel *model, const char *path);

/**
 * Library version as a static C string.
 */
const char *lsjm_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LSJM_H */
