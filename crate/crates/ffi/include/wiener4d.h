#ifndef WIENER4D_H
#define WIENER4D_H

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

/**
 * Status codes. The first four match the CLI exit codes.
 */
typedef enum W4dStatus {
  W4D_STATUS_OK = 0,
  W4D_STATUS_USAGE = 2,
  W4D_STATUS_IO = 3,
  W4D_STATUS_FORMAT = 4,
  W4D_STATUS_NULL_POINTER = 5,
  W4D_STATUS_PANIC = 6,
} W4dStatus;

typedef enum W4dDtype {
  W4D_DTYPE_U8 = 0,
  W4D_DTYPE_F32 = 1,
} W4dDtype;

typedef enum W4dWindow {
  W4D_WINDOW_COSINE = 0,
  W4D_WINDOW_GAUSSIAN = 1,
  W4D_WINDOW_TRAINED = 2,
} W4dWindow;

typedef enum W4dDc {
  W4D_DC_MEAN = 0,
  W4D_DC_MEDIAN = 1,
  W4D_DC_GROUND_TRUTH = 2,
} W4dDc;

typedef enum W4dMode {
  W4D_MODE_CLASSIC = 0,
  W4D_MODE_REFINED = 1,
} W4dMode;

/**
 * Loaded `W4DW` weight bundle.
 */
typedef struct W4dBundle W4dBundle;

/**
 * Engine configuration. Starts at the library defaults with sigma 20.
 */
typedef struct W4dConfig W4dConfig;

/**
 * RGB sequence, `[frames][3][height][width]` f32 on the 8-bit scale.
 */
typedef struct W4dSequence W4dSequence;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or NULL. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *w4d_last_error(void);

/**
 * Copies `frames * 3 * height * width` floats from `data`.
 *
 * # Safety
 * `data` must point to that many readable floats; `out` must be writable.
 */
enum W4dStatus w4d_sequence_new(size_t frames,
                                size_t height,
                                size_t width,
                                const float *data,
                                struct W4dSequence **out);

/**
 * Reads a PNG directory (directories and extension-less paths) or a raw
 * `V4DS` file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum W4dStatus w4d_sequence_read(const char *p, struct W4dSequence **out);

/**
 * Writes with the same path rule as [`w4d_sequence_read`]. `dtype` only
 * applies to raw files.
 *
 * # Safety
 * `seq` must come from this library; `path` must be NUL-terminated.
 */
enum W4dStatus w4d_sequence_write(const struct W4dSequence *seq,
                                  const char *p,
                                  enum W4dDtype dtype);

/**
 * # Safety
 * `seq` must be NULL or come from this library and not be freed twice.
 */
void w4d_sequence_free(struct W4dSequence *seq);

/**
 * # Safety
 * `seq` must come from this library; each out pointer may be NULL.
 */
enum W4dStatus w4d_sequence_dims(const struct W4dSequence *seq,
                                 size_t *frames,
                                 size_t *height,
                                 size_t *width);

/**
 * Borrowed pointer to the samples; valid while `seq` lives. NULL if `seq`
 * is NULL.
 *
 * # Safety
 * `seq` must be NULL or come from this library.
 */
const float *w4d_sequence_data(const struct W4dSequence *seq);

struct W4dConfig *w4d_config_new(void);

/**
 * # Safety
 * `cfg` must be NULL or come from [`w4d_config_new`].
 */
void w4d_config_free(struct W4dConfig *cfg);

/**
 * # Safety
 * `cfg` must come from [`w4d_config_new`].
 */
enum W4dStatus w4d_config_set_block(struct W4dConfig *cfg, size_t block);

/**
 * # Safety
 * `cfg` must come from [`w4d_config_new`].
 */
enum W4dStatus w4d_config_set_stride_div(struct W4dConfig *cfg, size_t stride_div);

/**
 * Odd number of frames per block.
 *
 * # Safety
 * `cfg` must come from [`w4d_config_new`].
 */
enum W4dStatus w4d_config_set_taps(struct W4dConfig *cfg, size_t taps);

/**
 * Edge blocks use windows held flat toward the frame border.
 *
 * # Safety
 * `cfg` must come from [`w4d_config_new`].
 */
enum W4dStatus w4d_config_set_flat_borders(struct W4dConfig *cfg, bool flat);

/**
 * # Safety
 * `cfg` must come from [`w4d_config_new`].
 */
enum W4dStatus w4d_config_set_clamp_refined(struct W4dConfig *cfg, bool clamp);

/**
 * Non-positive values restore the per-size default.
 *
 * # Safety
 * `cfg` must come from [`w4d_config_new`].
 */
enum W4dStatus w4d_config_set_alpha(struct W4dConfig *cfg, double alpha);

/**
 * Known noise STD on the 8-bit scale.
 *
 * # Safety
 * `cfg` must come from [`w4d_config_new`].
 */
enum W4dStatus w4d_config_set_sigma(struct W4dConfig *cfg, double sigma);

/**
 * Estimate noise with the bundle's noise net. Turning it off restores sigma 20.
 *
 * # Safety
 * `cfg` must come from [`w4d_config_new`].
 */
enum W4dStatus w4d_config_set_blind(struct W4dConfig *cfg, bool blind);

/**
 * Zero uses the global pool.
 *
 * # Safety
 * `cfg` must come from [`w4d_config_new`].
 */
enum W4dStatus w4d_config_set_threads(struct W4dConfig *cfg, size_t threads);

/**
 * # Safety
 * `cfg` must come from [`w4d_config_new`].
 */
enum W4dStatus w4d_config_set_window(struct W4dConfig *cfg, enum W4dWindow window);

/**
 * # Safety
 * `cfg` must come from [`w4d_config_new`].
 */
enum W4dStatus w4d_config_set_dc(struct W4dConfig *cfg, enum W4dDc dc);

/**
 * # Safety
 * `cfg` must come from [`w4d_config_new`].
 */
enum W4dStatus w4d_config_set_mode(struct W4dConfig *cfg, enum W4dMode mode);

/**
 * Multi-scale block sizes with optional weights (`weights` may be NULL for
 * uniform). `count` 0 returns to single scale.
 *
 * # Safety
 * `sizes` (and `weights` if non-NULL) must hold `count` readable values.
 */
enum W4dStatus w4d_config_set_scales(struct W4dConfig *cfg,
                                     const size_t *sizes,
                                     const double *weights,
                                     size_t count);

/**
 * Directory of `t{t}_n{k}.flo` files; NULL disables motion compensation.
 *
 * # Safety
 * `dir` must be NULL or NUL-terminated.
 */
enum W4dStatus w4d_config_set_flows(struct W4dConfig *cfg, const char *dir);

/**
 * # Safety
 * `path` must be NUL-terminated; `out` must be writable.
 */
enum W4dStatus w4d_bundle_load(const char *p, struct W4dBundle **out);

/**
 * # Safety
 * `bundle` must be NULL or come from [`w4d_bundle_load`].
 */
void w4d_bundle_free(struct W4dBundle *bundle);

/**
 * Runs the 4-D filter. `bundle` and `clean` may be NULL when the
 * configuration does not need them.
 *
 * # Safety
 * Handles must come from this library; `out` must be writable.
 */
enum W4dStatus w4d_denoise(const struct W4dSequence *input,
                           const struct W4dConfig *cfg,
                           const struct W4dBundle *bundle,
                           const struct W4dSequence *clean,
                           struct W4dSequence **out);

/**
 * Luma-only 3-D reference filter; uses block, taps and sigma from `cfg`.
 *
 * # Safety
 * Handles must come from this library; `out` must be writable.
 */
enum W4dStatus w4d_denoise_baseline3d(const struct W4dSequence *input,
                                      const struct W4dConfig *cfg,
                                      struct W4dSequence **out);

/**
 * Seeded AWGN; `clip` clamps the result to `[0, 255]`.
 *
 * # Safety
 * `input` must come from this library; `out` must be writable.
 */
enum W4dStatus w4d_add_noise(const struct W4dSequence *input,
                             double sigma,
                             uint64_t seed,
                             bool clip,
                             struct W4dSequence **out);

/**
 * Mean per-frame PSNR in dB, capped at 99.
 *
 * # Safety
 * Handles must come from this library; `out` must be writable.
 */
enum W4dStatus w4d_psnr(const struct W4dSequence *reference,
                        const struct W4dSequence *test,
                        double *out);

/**
 * Mean per-frame SSIM.
 *
 * # Safety
 * Handles must come from this library; `out` must be writable.
 */
enum W4dStatus w4d_ssim(const struct W4dSequence *reference,
                        const struct W4dSequence *test,
                        double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* WIENER4D_H */
