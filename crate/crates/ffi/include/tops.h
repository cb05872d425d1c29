#ifndef TOPS_H
#define TOPS_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Result codes. Zero is success.
 */
typedef enum TopsStatus {
  TOPS_STATUS_OK = 0,
  TOPS_STATUS_NULL_ARGUMENT = 1,
  TOPS_STATUS_INVALID_UTF8 = 2,
  TOPS_STATUS_IO = 3,
  TOPS_STATUS_PARSE = 4,
  TOPS_STATUS_MODEL = 5,
  TOPS_STATUS_INVALID_INPUT = 6,
  TOPS_STATUS_NUMERIC = 7,
  TOPS_STATUS_INTERNAL = 8,
  TOPS_STATUS_PANIC = 9,
} TopsStatus;

/*
 A loaded model for one horizon.
 */
typedef struct TopsModel TopsModel;

/*
 A set of models sharing a schema, queried with JSON requests.
 */
typedef struct TopsService TopsService;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message for the last failed call on this thread, or null. The pointer
 stays valid until the next tops call on the same thread.
 */
const char *tops_last_error(void);

/*
 Loads a model file. On success `*out` owns a handle to release with
 [`tops_model_free`].

 # Safety
 `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum TopsStatus tops_model_load(const char *path, struct TopsModel **out);

/*
 # Safety
 `model` must come from [`tops_model_load`] and not be used afterwards.
 Null is ignored.
 */
void tops_model_free(struct TopsModel *model);

/*
 Encoded row width, or 0 for a null handle.

 # Safety
 `model` must be null or a live handle.
 */
size_t tops_model_width(const struct TopsModel *model);

/*
 Horizon in days, or NaN for a null handle.

 # Safety
 `model` must be null or a live handle.
 */
double tops_model_horizon(const struct TopsModel *model);

/*
 Survival probability for one encoded row of `len` values.

 # Safety
 `x` must point to `len` doubles and `out` to one writable double.
 */
enum TopsStatus tops_model_predict(const struct TopsModel *model,
                                   const double *x,
                                   size_t len,
                                   double *out);

/*
 Predicts `rows` row-major rows of `cols` values each into `out[rows]`.
 Nothing is written unless every row succeeds.

 # Safety
 `x` must point to `rows * cols` doubles and `out` to `rows` doubles.
 */
enum TopsStatus tops_model_predict_batch(const struct TopsModel *model,
                                         const double *x,
                                         size_t rows,
                                         size_t cols,
                                         double *out);

/*
 Id of the leaf that the row falls in.

 # Safety
 `x` must point to `len` doubles and `leaf` to one writable `size_t`.
 */
enum TopsStatus tops_model_leaf(const struct TopsModel *model,
                                const double *x,
                                size_t len,
                                size_t *leaf);

/*
 Loads `n` model files into one service. The models must share a schema
 and have distinct horizons.

 # Safety
 `paths` must point to `n` NUL-terminated strings and `out` be valid.
 */
enum TopsStatus tops_service_new(const char *const *paths, size_t n, struct TopsService **out);

/*
 # Safety
 `service` must come from [`tops_service_new`] and not be used
 afterwards. Null is ignored.
 */
void tops_service_free(struct TopsService *service);

/*
 Runs a prediction request given as JSON. On success `*out` holds the
 JSON response, to release with [`tops_string_free`]. Request errors
 leave the `{code, stage, message}` body in [`tops_last_error`].

 # Safety
 `request` must be NUL-terminated and `out` valid.
 */
enum TopsStatus tops_service_predict_json(const struct TopsService *service,
                                          const char *request,
                                          char **out);

/*
 What-if variant of [`tops_service_predict_json`]; the response is a JSON
 array with the base prediction first.

 # Safety
 `request` must be NUL-terminated and `out` valid.
 */
enum TopsStatus tops_service_whatif_json(const struct TopsService *service,
                                         const char *request,
                                         char **out);

/*
 Schema, fills, ranges and tree shapes as JSON.

 # Safety
 `out` must be valid.
 */
enum TopsStatus tops_service_model_info_json(const struct TopsService *service, char **out);

/*
 Releases a string returned by this library. Null is ignored.

 # Safety
 `s` must come from a tops call and not be used afterwards.
 */
void tops_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TOPS_H */
