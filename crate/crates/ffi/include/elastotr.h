#ifndef ELASTOTR_H
#define ELASTOTR_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum EtStatus {
  ET_STATUS_OK = 0,
  ET_STATUS_NULL_ARGUMENT = 1,
  ET_STATUS_INVALID_ARGUMENT = 2,
  ET_STATUS_IO = 3,
  ET_STATUS_FORMAT = 4,
  ET_STATUS_CONFIG = 5,
  ET_STATUS_NUMERICAL = 6,
  ET_STATUS_GRID_MISMATCH = 7,
  // A pipeline stage or validation check failed; details in the manifest
  // or the last error message.
  ET_STATUS_FAILED = 8,
  ET_STATUS_PANIC = 9,
} EtStatus;

typedef enum EtVariant {
  ET_VARIANT_FULL = 0,
  ET_VARIANT_COMPONENT_U2 = 1,
  ET_VARIANT_DIVERGENCE = 2,
} EtVariant;

// Resolved run configuration.
typedef struct EtConfig EtConfig;

// Image on the solid sample grid.
typedef struct EtImage EtImage;

// Sampled solid-velocity movie.
typedef struct EtMovie EtMovie;

// Receiver traces, `values[time][receiver]`.
typedef struct EtTraces EtTraces;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failure on this thread; empty after a success. The
// pointer stays valid until the next call into this library on the thread.
const char *et_last_error_message(void);

// Library version, static storage.
const char *et_version(void);

// Loads and resolves a TOML run configuration.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a writable pointer.
enum EtStatus et_config_load(const char *path, struct EtConfig **out);

// Overrides the noise seed.
//
// # Safety
// `config` must be a live handle from [`et_config_load`].
enum EtStatus et_config_set_seed(struct EtConfig *config, uint64_t seed);

// Number of shots (source × SRA pairs) the configured scene fires.
//
// # Safety
// `config` must be a live handle and `out` writable.
enum EtStatus et_config_shot_count(const struct EtConfig *config, size_t *out);

// # Safety
// `config` must be null or a handle from [`et_config_load`] not yet freed.
void et_config_free(struct EtConfig *config);

// Forward stage into `out_dir/shot<k>/`; `shot < 0` runs every shot.
//
// # Safety
// `config` must be a live handle and `out_dir` a NUL-terminated string.
enum EtStatus et_forward(const struct EtConfig *config, const char *out_dir, int64_t shot);

// Back-propagates the traces in `traces_csv`, writing a TRIM movie.
//
// # Safety
// `config` must be a live handle; the paths NUL-terminated strings.
enum EtStatus et_reverse(const struct EtConfig *config,
                         const char *traces_csv,
                         const char *out_movie);

// Full pipeline into `out_dir` with `manifest.txt`. Returns
// `ET_STATUS_FAILED` if any stage failed; the manifest is written anyway.
//
// # Safety
// `config` must be a live handle and `out_dir` a NUL-terminated string.
enum EtStatus et_pipeline(const struct EtConfig *config, const char *out_dir, bool write_movies);

// Runs the validation checks. `passed`/`total` receive the counts.
//
// # Safety
// `passed` and `total` must be writable or null.
enum EtStatus et_validate(size_t *passed, size_t *total);

// # Safety
// `path` must be NUL-terminated and `out` writable.
enum EtStatus et_traces_read(const char *path, struct EtTraces **out);

// # Safety
// `traces` must be a live handle; the outputs writable.
enum EtStatus et_traces_shape(const struct EtTraces *traces,
                              size_t *n_samples,
                              size_t *n_receivers);

// Copies values time-major (`n_samples × n_receivers`) into `buf`.
//
// # Safety
// `buf` must hold `len` doubles.
enum EtStatus et_traces_values(const struct EtTraces *traces, double *buf, size_t len);

// # Safety
// `traces` must be null or a live handle.
void et_traces_free(struct EtTraces *traces);

// # Safety
// `path` must be NUL-terminated and `out` writable.
enum EtStatus et_movie_read(const char *path, struct EtMovie **out);

// # Safety
// `movie` must be a live handle; the outputs writable.
enum EtStatus et_movie_shape(const struct EtMovie *movie, size_t *nx, size_t *ny, size_t *n_frames);

// # Safety
// `movie` must be null or a live handle.
void et_movie_free(struct EtMovie *movie);

// Raw RTM image of a reversed/incident movie pair; with `percentage` set
// it is normalized by the peak incident energy.
//
// # Safety
// Both movies must be live handles and `out` writable.
enum EtStatus et_rtm(const struct EtMovie *reversed,
                     const struct EtMovie *incident,
                     enum EtVariant variant,
                     bool percentage,
                     struct EtImage **out);

// # Safety
// `path` must be NUL-terminated and `out` writable.
enum EtStatus et_image_read(const char *path, struct EtImage **out);

// # Safety
// `image` must be a live handle; the outputs writable.
enum EtStatus et_image_shape(const struct EtImage *image, size_t *nx, size_t *ny);

// Copies values row-major (`j * nx + i`, `j` along y) into `buf`.
//
// # Safety
// `buf` must hold `len` doubles.
enum EtStatus et_image_values(const struct EtImage *image, double *buf, size_t len);

// Location and value of the image maximum.
//
// # Safety
// `image` must be a live handle; the outputs writable.
enum EtStatus et_image_argmax(const struct EtImage *image, double *x, double *y, double *value);

// Number of peaks at or above `fraction × max`.
//
// # Safety
// `image` must be a live handle and `count` writable.
enum EtStatus et_image_peak_count(const struct EtImage *image, double fraction, size_t *count);

// Writes `<stem>.csv`, `.pgm` (+ sidecar) and `.peaks.txt` into `dir`.
//
// # Safety
// `image` must be a live handle; `dir` and `stem` NUL-terminated.
enum EtStatus et_image_write(const struct EtImage *image,
                             const char *dir,
                             const char *stem,
                             double fraction);

// # Safety
// `image` must be null or a live handle.
void et_image_free(struct EtImage *image);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ELASTOTR_H */
