#ifndef EMD_FORECAST_H
#define EMD_FORECAST_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum EmdfStatus {
  EMDF_STATUS_OK = 0,
  EMDF_STATUS_NULL_POINTER = 1,
  EMDF_STATUS_INVALID_ARGUMENT = 2,
  // Unusable data: too short, monotone, zero actual in MAPE and so on.
  EMDF_STATUS_INPUT_ERROR = 3,
  // The computation itself failed.
  EMDF_STATUS_COMPUTE_ERROR = 4,
  // A Rust panic was caught at the boundary.
  EMDF_STATUS_PANIC = 5,
} EmdfStatus;

typedef enum EmdfMethod {
  EMDF_METHOD_EMD = 0,
  EMDF_METHOD_EEMD = 1,
  EMDF_METHOD_CEEMD = 2,
} EmdfMethod;

typedef enum EmdfBoundary {
  EMDF_BOUNDARY_LINEAR_EXTRAPOLATION = 0,
  EMDF_BOUNDARY_MIRROR_REFLECTION = 1,
  EMDF_BOUNDARY_CLAMP_ENDPOINTS = 2,
} EmdfBoundary;

// Opaque decomposition handle.
typedef struct EmdfDecomposition EmdfDecomposition;

// Decomposition settings; fill with [`emdf_options_default`] first.
typedef struct EmdfOptions {
  enum EmdfMethod method;
  enum EmdfBoundary boundary;
  // 0 selects floor(log2 N).
  size_t max_imfs;
  size_t max_sift_iterations;
  // Stop threshold relative to the input's standard deviation.
  double epsilon_relative;
  size_t num_ensembles;
  double noise_std_fraction;
  uint64_t seed;
} EmdfOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or an empty string.
// The pointer stays valid until the next call on the same thread.
const char *emdf_last_error(void);

// Library version as a static NUL-terminated string.
const char *emdf_version(void);

// # Safety
// `out` must point to writable memory for one `EmdfOptions`.
enum EmdfStatus emdf_options_default(struct EmdfOptions *out);

// Decomposes `values[0..len]`; on success `*out` owns a new handle.
//
// # Safety
// `values` must point to `len` readable doubles, `options` to a valid
// `EmdfOptions` and `out` to a writable handle pointer.
enum EmdfStatus emdf_decompose(const double *values,
                               size_t len,
                               const struct EmdfOptions *options,
                               struct EmdfDecomposition **out);

// # Safety
// `handle` must come from `emdf_decompose` and not be used afterwards.
void emdf_decomposition_free(struct EmdfDecomposition *handle);

// # Safety
// `handle` must be a live handle and `out` writable.
enum EmdfStatus emdf_decomposition_len(const struct EmdfDecomposition *handle, size_t *out);

// Number of IMFs, excluding the residual.
//
// # Safety
// `handle` must be a live handle and `out` writable.
enum EmdfStatus emdf_decomposition_imf_count(const struct EmdfDecomposition *handle, size_t *out);

// Copies component `index` into `out`; index `imf_count` is the residual.
//
// # Safety
// `handle` must be a live handle and `out` must hold `out_len` doubles.
enum EmdfStatus emdf_decomposition_component(const struct EmdfDecomposition *handle,
                                             size_t index,
                                             double *out,
                                             size_t out_len);

// Writes the sum of all components into `out`.
//
// # Safety
// `handle` must be a live handle and `out` must hold `out_len` doubles.
enum EmdfStatus emdf_decomposition_reconstruct(const struct EmdfDecomposition *handle,
                                               double *out,
                                               size_t out_len);

// Root-mean-square error.
//
// # Safety
// Both inputs must hold `len` doubles and `out` must be writable.
enum EmdfStatus emdf_rmse(const double *actual, const double *forecast, size_t len, double *out);

// Mean absolute percentage error in percent; fails on a zero actual.
//
// # Safety
// Both inputs must hold `len` doubles and `out` must be writable.
enum EmdfStatus emdf_mape(const double *actual, const double *forecast, size_t len, double *out);

// Reconstruction SNR in dB; an exact reconstruction gives +infinity.
//
// # Safety
// Both inputs must hold `len` doubles and `out` must be writable.
enum EmdfStatus emdf_snr_db(const double *signal,
                            const double *reconstruction,
                            size_t len,
                            double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* EMD_FORECAST_H */
