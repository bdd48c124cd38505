#ifndef LTAE_H
#define LTAE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call.
typedef enum LtaeStatus {
  LTAE_STATUS_OK = 0,
  // A required pointer argument was null.
  LTAE_STATUS_NULL_POINTER = 1,
  // An argument was out of range, a string was not UTF-8, or an output
  // buffer was too small.
  LTAE_STATUS_INVALID_ARGUMENT = 2,
  LTAE_STATUS_IO = 3,
  // Malformed CSV or JSON, or an ill-formed recording.
  LTAE_STATUS_PARSE = 4,
  // Dimensions disagree or there are too few samples.
  LTAE_STATUS_SHAPE = 5,
  // Non-finite values, rank loss or degenerate geometry.
  LTAE_STATUS_NUMERIC = 6,
  LTAE_STATUS_DIVERGENCE = 7,
  // Corrupt checkpoint or incompatible format version.
  LTAE_STATUS_CHECKPOINT = 8,
  // An internal panic was caught at the boundary.
  LTAE_STATUS_PANIC = 9,
} LtaeStatus;

// A trained model with its normalization statistics.
typedef struct LtaeModel LtaeModel;

// A multichannel recording.
typedef struct LtaeRecording LtaeRecording;

// Separation statistics between two trajectories.
typedef struct LtaeSeparation {
  double centroid_distance;
  double spread_a;
  double spread_b;
  double pooled_spread;
  double separation_ratio;
} LtaeSeparation;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message describing the most recent failure on the calling thread, or NULL
// after a successful call. The pointer stays valid until the next `ltae_*`
// call on the same thread.
const char *ltae_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *ltae_version(void);

// Loads a CSV recording. `sample_rate_hz <= 0` takes the rate from the
// `<name>.meta.json` sidecar, falling back to 300 Hz.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum LtaeStatus ltae_recording_load(const char *path,
                                    double sample_rate_hz,
                                    struct LtaeRecording **out);

// Builds a recording from `n_frames × n_channels` row-major samples.
// `channel_names` may be NULL when `n_channels` is 24, selecting the
// default montage.
//
// # Safety
// `frames` must hold `n_frames * n_channels` doubles; `channel_names`, if
// non-NULL, must hold `n_channels` NUL-terminated strings.
enum LtaeStatus ltae_recording_from_frames(const double *frames,
                                           size_t n_frames,
                                           size_t n_channels,
                                           const char *const *channel_names,
                                           double sample_rate_hz,
                                           struct LtaeRecording **out);

// # Safety
// `rec` must be NULL or a handle from this library that was not freed yet.
void ltae_recording_free(struct LtaeRecording *rec);

// # Safety
// `rec` must be a live handle; the outputs must be writable.
enum LtaeStatus ltae_recording_dims(const struct LtaeRecording *rec,
                                    size_t *n_frames,
                                    size_t *n_channels);

// Loads a checkpoint file.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum LtaeStatus ltae_model_load(const char *path, struct LtaeModel **out);

// Trains a model on `rec`. `config_json` may be NULL for defaults; fields
// omitted from it keep their default values.
//
// # Safety
// `rec` must be a live handle; `config_json` NULL or NUL-terminated.
enum LtaeStatus ltae_model_train(const struct LtaeRecording *rec,
                                 const char *config_json,
                                 struct LtaeModel **out);

// # Safety
// `model` must be a live handle; `path` NUL-terminated.
enum LtaeStatus ltae_model_save(const struct LtaeModel *model, const char *path);

// # Safety
// `model` must be NULL or a handle from this library that was not freed yet.
void ltae_model_free(struct LtaeModel *model);

// # Safety
// `model` must be a live handle; the outputs must be writable.
enum LtaeStatus ltae_model_dims(const struct LtaeModel *model,
                                size_t *input_dim,
                                size_t *latent_dim);

// Whether training met the angular tolerance.
//
// # Safety
// `model` must be a live handle; `out` writable.
enum LtaeStatus ltae_model_converged(const struct LtaeModel *model, bool *out);

// Writes the 64-character hex content hash plus a NUL terminator; `buf_len`
// must be at least 65.
//
// # Safety
// `model` must be a live handle; `buf` must hold `buf_len` bytes.
enum LtaeStatus ltae_model_hash(const struct LtaeModel *model, char *buf, size_t buf_len);

// Normalizes `rec` with the model's statistics and writes the
// `n_frames × latent_dim` latent codes row-major into `out`.
//
// # Safety
// Handles must be live; `out` must hold `out_len` doubles.
enum LtaeStatus ltae_model_encode(const struct LtaeModel *model,
                                  const struct LtaeRecording *rec,
                                  double *out,
                                  size_t out_len);

// Centered per-axis running median of an `n × 3` trajectory. `window` is
// an odd sample count no larger than `10 * n`.
//
// # Safety
// `coords` and `out` must each hold `3 * n` doubles.
enum LtaeStatus ltae_median_filter(const double *coords, size_t n, size_t window, double *out);

// Finite-difference velocity, acceleration (`n × 3` each) and speed
// (`n`) of a trajectory sampled at `sample_rate_hz`. Any output may be NULL
// to skip it. Requires `n >= 3`.
//
// # Safety
// `coords` must hold `3 * n` doubles; non-NULL outputs must be sized as above.
enum LtaeStatus ltae_kinematics(const double *coords,
                                size_t n,
                                double sample_rate_hz,
                                double *velocity,
                                double *acceleration,
                                double *speed);

// Centroid distance over pooled spread between two trajectories.
//
// # Safety
// `a` and `b` must hold `3 * n_a` and `3 * n_b` doubles; `out` writable.
enum LtaeStatus ltae_separation(const double *a,
                                size_t n_a,
                                const double *b,
                                size_t n_b,
                                struct LtaeSeparation *out);

// Angles in degrees between every pair of columns of a row-major
// `rows × cols` matrix, in lexicographic pair order; `out` receives
// `cols * (cols - 1) / 2` values.
//
// # Safety
// `data` must hold `rows * cols` doubles and `out` the number above.
enum LtaeStatus ltae_pairwise_angles(const double *data, size_t rows, size_t cols, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LTAE_H */
