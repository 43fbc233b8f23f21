#ifndef HOMOLENS_H
#define HOMOLENS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

/**
 * Result code of every fallible call.
 */
typedef enum HlStatus {
  HL_STATUS_OK = 0,
  HL_STATUS_INVALID_INPUT = 1,
  HL_STATUS_PRECONDITION = 2,
  HL_STATUS_PARSE = 3,
  HL_STATUS_UNSUPPORTED = 4,
  HL_STATUS_NUMERICAL = 5,
  HL_STATUS_IO = 6,
  HL_STATUS_CONFIG = 7,
  HL_STATUS_NULL_POINTER = 8,
  HL_STATUS_BUFFER_TOO_SMALL = 9,
  HL_STATUS_PANIC = 10,
} HlStatus;

/**
 * Opaque estimator output.
 */
typedef struct HlEstimate HlEstimate;

/**
 * Opaque point cloud.
 */
typedef struct HlPointCloud HlPointCloud;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. Valid until
 * the next call into the library from the same thread.
 */
const char *hl_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *hl_version(void);

/**
 * Builds a cloud from `n * dim` row-major coordinates.
 *
 * # Safety
 * `coords` must point to `n * dim` readable doubles (or be null when `n`
 * is zero) and `out` must be writable.
 */
enum HlStatus hl_point_cloud_new(const double *coords,
                                 size_t n,
                                 size_t dim,
                                 struct HlPointCloud **out);

/**
 * # Safety
 * `cloud` must come from this library and not be used afterwards.
 */
void hl_point_cloud_free(struct HlPointCloud *cloud);

/**
 * # Safety
 * `cloud` must be a live handle or null.
 */
size_t hl_point_cloud_len(const struct HlPointCloud *cloud);

/**
 * # Safety
 * `cloud` must be a live handle or null.
 */
size_t hl_point_cloud_dim(const struct HlPointCloud *cloud);

/**
 * Copies the row-major coordinates into `buf`; `*out_len` receives
 * `len * dim` even when the buffer is too small.
 *
 * # Safety
 * `buf` must hold `cap` doubles; `out_len` must be writable.
 */
enum HlStatus hl_point_cloud_coords(const struct HlPointCloud *cloud,
                                    double *buf,
                                    size_t cap,
                                    size_t *out_len);

/**
 * Samples `n` points. `config` is TOML with `[manifold]` and `[noise]`
 * tables, as in the command-line config files.
 *
 * # Safety
 * `config` must be a NUL-terminated string and `out` writable.
 */
enum HlStatus hl_sample(const char *config, size_t n, uint64_t seed, struct HlPointCloud **out);

/**
 * Runs the estimator described by `spec`, a TOML table with the fields of
 * an `[estimator]` config section. `ambient_dim` defaults to the cloud's
 * dimension.
 *
 * # Safety
 * `cloud` must be live, `spec` NUL-terminated and `out` writable.
 */
enum HlStatus hl_estimate(const struct HlPointCloud *cloud,
                          const char *spec,
                          uint64_t seed,
                          struct HlEstimate **out);

/**
 * # Safety
 * `res` must come from this library and not be used afterwards.
 */
void hl_estimate_free(struct HlEstimate *res);

/**
 * True when too few points survived for the output to mean anything.
 *
 * # Safety
 * `res` must be a live handle or null.
 */
bool hl_estimate_unstable(const struct HlEstimate *res);

/**
 * Betti numbers b_0.. of the estimate. An unstable estimate yields zero
 * values.
 *
 * # Safety
 * `buf` must hold `cap` values; `out_len` must be writable.
 */
enum HlStatus hl_estimate_betti(const struct HlEstimate *res,
                                size_t *buf,
                                size_t cap,
                                size_t *out_len);

/**
 * Indices of the input points the estimator kept.
 *
 * # Safety
 * `buf` must hold `cap` values; `out_len` must be writable.
 */
enum HlStatus hl_estimate_kept(const struct HlEstimate *res,
                               size_t *buf,
                               size_t cap,
                               size_t *out_len);

/**
 * Betti numbers b_0..b_{top_dim-1} of the Čech complex of radius `eps`.
 *
 * # Safety
 * `cloud` must be live, `buf` must hold `cap` values and `out_len` must be
 * writable.
 */
enum HlStatus hl_cech_betti(const struct HlPointCloud *cloud,
                            double eps,
                            size_t top_dim,
                            size_t *buf,
                            size_t cap,
                            size_t *out_len);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* HOMOLENS_H */
