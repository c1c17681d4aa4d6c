#ifndef NEURAL_LASSO_H
#define NEURAL_LASSO_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call.
typedef enum NlStatus {
  NL_STATUS_OK = 0,
  NL_STATUS_NULL_POINTER = 1,
  NL_STATUS_INVALID_ARGUMENT = 2,
  NL_STATUS_DIMENSION_MISMATCH = 3,
  NL_STATUS_NON_FINITE = 4,
  NL_STATUS_CONSTANT_COLUMN = 5,
  NL_STATUS_NO_CONVERGENCE = 6,
  NL_STATUS_SINGULAR_DESIGN = 7,
  NL_STATUS_SINGLE_CLASS = 8,
  NL_STATUS_IO = 9,
  // Malformed file contents, a missing target column or a non-binary
  // logistic response.
  NL_STATUS_PARSE = 10,
  NL_STATUS_INTERNAL = 99,
} NlStatus;

typedef enum NlTask {
  NL_TASK_LINEAR = 0,
  NL_TASK_LOGISTIC = 1,
} NlTask;

typedef enum NlMethod {
  NL_METHOD_STATISTICAL = 0,
  NL_METHOD_STANDARD = 1,
  NL_METHOD_RESTRICTED = 2,
  NL_METHOD_VOTING = 3,
} NlMethod;

// Opaque dataset handle.
typedef struct NlDataset NlDataset;

// Opaque fitted-model handle.
typedef struct NlModel NlModel;

// Fitting options; obtain defaults from [`nl_fit_options_default`].
typedef struct NlFitOptions {
  size_t k;
  size_t grid_count;
  double grid_ratio;
  double lr;
  size_t max_epochs;
  uint64_t seed;
} NlFitOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null if none. The
// pointer stays valid until the next failing call on the same thread.
const char *nl_last_error_message(void);

struct NlFitOptions nl_fit_options_default(void);

// Copies a row-major `n x p` matrix and `n` responses into a new dataset.
//
// # Safety
// `x` must point to `n * p` readable doubles, `y` to `n`, and `out` must be
// a valid location for one pointer.
enum NlStatus nl_dataset_new(const double *x,
                             const double *y,
                             size_t n,
                             size_t p,
                             struct NlDataset **out);

// Loads a CSV file with a header row; `target` names the response column.
//
// # Safety
// `path` and `target` must be nul-terminated strings; `out` must be a valid
// location for one pointer.
enum NlStatus nl_dataset_load_csv(const char *path,
                                  const char *target,
                                  enum NlTask task,
                                  struct NlDataset **out);

// # Safety
// `ds` must be null or a handle from this library that was not freed yet.
void nl_dataset_free(struct NlDataset *ds);

// Number of observations, 0 for a null handle.
//
// # Safety
// `ds` must be null or a live dataset handle.
size_t nl_dataset_rows(const struct NlDataset *ds);

// Number of predictors, 0 for a null handle.
//
// # Safety
// `ds` must be null or a live dataset handle.
size_t nl_dataset_cols(const struct NlDataset *ds);

// Fits `method` to `ds`. `options` may be null for the defaults.
//
// # Safety
// `ds` must be a live dataset handle, `options` null or valid, and `out` a
// valid location for one pointer.
enum NlStatus nl_fit(const struct NlDataset *ds,
                     enum NlTask task,
                     enum NlMethod method,
                     const struct NlFitOptions *options,
                     struct NlModel **out);

// # Safety
// `model` must be null or a handle from this library that was not freed yet.
void nl_model_free(struct NlModel *model);

// Number of coefficients, 0 for a null handle.
//
// # Safety
// `model` must be null or a live model handle.
size_t nl_model_cols(const struct NlModel *model);

// Number of nonzero coefficients, 0 for a null handle.
//
// # Safety
// `model` must be null or a live model handle.
size_t nl_model_support_size(const struct NlModel *model);

// Copies the original-scale coefficients into `out[0..len]`; `len` must
// equal the number of predictors.
//
// # Safety
// `model` must be a live model handle and `out` must point to `len`
// writable doubles.
enum NlStatus nl_model_coefficients(const struct NlModel *model, double *out, size_t len);

// Writes the original-scale intercept and the penalty of the fit.
//
// # Safety
// `model` must be a live model handle; `intercept` and `lambda` must be
// valid or null (null outputs are skipped).
enum NlStatus nl_model_summary(const struct NlModel *model, double *intercept, double *lambda);

// Predicts `n` rows of the row-major `n x p` matrix `x` into `out`:
// responses for linear models, probabilities for logistic ones.
//
// # Safety
// `model` must be a live model handle, `x` must point to `n * p` readable
// doubles and `out` to `n` writable doubles.
enum NlStatus nl_model_predict(const struct NlModel *model,
                               const double *x,
                               size_t n,
                               size_t p,
                               double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NEURAL_LASSO_H */
