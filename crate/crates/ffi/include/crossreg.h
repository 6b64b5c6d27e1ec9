#ifndef CROSSREG_H
#define CROSSREG_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes returned by every fallible function.
typedef enum CrStatus {
  CR_STATUS_OK = 0,
  CR_STATUS_NULL_POINTER = 1,
  CR_STATUS_INVALID_ARGUMENT = 2,
  CR_STATUS_PARSE = 3,
  CR_STATUS_IO = 4,
  CR_STATUS_REGISTRATION_FAILED = 5,
  CR_STATUS_PANIC = 6,
} CrStatus;

// Opaque registration configuration.
typedef struct CrConfig CrConfig;

// Opaque point cloud.
typedef struct CrPointCloud CrPointCloud;

// Opaque registration result.
typedef struct CrResult CrResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or NULL. The pointer is
// valid until the next failing call on the same thread.
const char *crossreg_last_error(void);

// Library version as a static NUL-terminated string.
const char *crossreg_version(void);

// Build a cloud from `n` packed `x, y, z` doubles triples.
//
// # Safety
// `xyz` must point to `3 * n` readable doubles; `out` must be writable.
enum CrStatus crossreg_cloud_new(const double *xyz, size_t n, struct CrPointCloud **out);

// Number of points, or 0 for NULL.
//
// # Safety
// `cloud` must be NULL or a live handle.
size_t crossreg_cloud_len(const struct CrPointCloud *cloud);

// # Safety
// `cloud` must be NULL or a handle not yet freed.
void crossreg_cloud_free(struct CrPointCloud *cloud);

// Default configuration handle.
struct CrConfig *crossreg_config_default(void);

// Parse a flat `key = value` configuration text over the defaults.
//
// # Safety
// `text` must be a NUL-terminated string; `out` must be writable.
enum CrStatus crossreg_config_parse(const char *text, struct CrConfig **out);

// # Safety
// `cfg` must be NULL or a handle not yet freed.
void crossreg_config_free(struct CrConfig *cfg);

// Register `source` onto `target`. A NULL `cfg` uses the defaults.
//
// # Safety
// `source` and `target` must be live cloud handles, `cfg` NULL or a live
// config handle, and `out` writable.
enum CrStatus crossreg_register(const struct CrPointCloud *source,
                                const struct CrPointCloud *target,
                                const struct CrConfig *cfg,
                                struct CrResult **out);

// Write the row-major rotation (9 values) followed by the translation (3)
// into `out12`.
//
// # Safety
// `result` must be a live handle and `out12` must point to 12 writable doubles.
enum CrStatus crossreg_result_transform(const struct CrResult *result, double *out12);

// Sparse inliers of the selected hypothesis, or 0 for NULL.
//
// # Safety
// `result` must be NULL or a live handle.
size_t crossreg_result_inlier_count(const struct CrResult *result);

// JSON report of the result without timings. Free with [`crossreg_string_free`].
//
// # Safety
// `result` must be a live handle and `out` writable.
enum CrStatus crossreg_result_json(const struct CrResult *result, char **out);

// # Safety
// `result` must be NULL or a handle not yet freed.
void crossreg_result_free(struct CrResult *result);

// Free a string returned by this library.
//
// # Safety
// `s` must be NULL or a string from this library not yet freed.
void crossreg_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CROSSREG_H */
