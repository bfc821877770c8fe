#ifndef LIDAR_IID_H
#define LIDAR_IID_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum LiiStatus {
  LII_STATUS_OK = 0,
  LII_STATUS_NULL_POINTER = 1,
  /**
   * Bad argument value, malformed input data or shape mismatch.
   */
  LII_STATUS_INVALID = 2,
  /**
   * File could not be read or written.
   */
  LII_STATUS_IO = 3,
  /**
   * An iterative solver stopped short or produced non-finite values.
   */
  LII_STATUS_NUMERICAL = 4,
  /**
   * Output buffer length does not match the object's size.
   */
  LII_STATUS_BUFFER_SIZE = 5,
  LII_STATUS_PANIC = 6,
} LiiStatus;

/**
 * Albedo and shade produced by [`lii_decompose`].
 */
typedef struct LiiDecomposition LiiDecomposition;

/**
 * Linear-light RGB image.
 */
typedef struct LiiImage LiiImage;

/**
 * Intensity map with its observation mask.
 */
typedef struct LiiIntensity LiiIntensity;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null if none.
 * The pointer stays valid until the next failing call on the same thread.
 */
const char *lii_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *lii_version(void);

/**
 * Builds an image from `width * height * 3` linear values in `[0, 1]`
 * (values outside are clamped).
 *
 * # Safety
 * `rgb` must point to `width * height * 3` readable doubles; `out` must be writable.
 */
enum LiiStatus lii_image_new(uintptr_t width,
                             uintptr_t height,
                             const double *rgb,
                             struct LiiImage **out);

/**
 * Reads a display-encoded PNG and linearizes it with `gamma`.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum LiiStatus lii_image_load(const char *path, double gamma, struct LiiImage **out);

/**
 * Writes the image size to `width` and `height`.
 *
 * # Safety
 * `img` must be a live handle; `width` and `height` must be writable.
 */
enum LiiStatus lii_image_dims(const struct LiiImage *img, uintptr_t *width, uintptr_t *height);

/**
 * # Safety
 * `img` must be null or a handle from this library not yet freed.
 */
void lii_image_free(struct LiiImage *img);

/**
 * Builds intensity from `width * height` values and a byte mask
 * (non-zero = observed). Observed values must lie in `[0, 1]`.
 *
 * # Safety
 * `values` and `mask` must each point to `width * height` readable elements.
 */
enum LiiStatus lii_intensity_new(uintptr_t width,
                                 uintptr_t height,
                                 const double *values,
                                 const uint8_t *mask,
                                 struct LiiIntensity **out);

/**
 * # Safety
 * `lidar` must be null or a handle from this library not yet freed.
 */
void lii_intensity_free(struct LiiIntensity *lidar);

/**
 * Completes sparse intensity into `out` (`len` must equal the pixel count)
 * with default parameters.
 *
 * # Safety
 * Handles must be live; `out` must point to `len` writable doubles.
 */
enum LiiStatus lii_densify(const struct LiiImage *img,
                           const struct LiiIntensity *lidar,
                           double *out,
                           uintptr_t len);

/**
 * Decomposes `img` with the named method (`"ours"`, `"ours_no_lid"`,
 * `"ours_no_int"`, `"baseline_r"`, `"baseline_s"`, `"retinex"`,
 * `"color_retinex"`) and default parameters.
 *
 * # Safety
 * Handles must be live; `method` must be NUL-terminated; `out` must be writable.
 */
enum LiiStatus lii_decompose(const struct LiiImage *img,
                             const struct LiiIntensity *lidar,
                             const char *method,
                             struct LiiDecomposition **out);

/**
 * Copies the albedo (`len` = pixels * 3, RGB interleaved) into `out`.
 *
 * # Safety
 * `dec` must be live; `out` must point to `len` writable doubles.
 */
enum LiiStatus lii_decomposition_albedo(const struct LiiDecomposition *dec,
                                        double *out,
                                        uintptr_t len);

/**
 * Copies the shade (`len` = pixels) into `out`.
 *
 * # Safety
 * `dec` must be live; `out` must point to `len` writable doubles.
 */
enum LiiStatus lii_decomposition_shade(const struct LiiDecomposition *dec,
                                       double *out,
                                       uintptr_t len);

/**
 * Albedo as a new image handle, for scoring with [`lii_whdr`].
 *
 * # Safety
 * `dec` must be live; `out` must be writable.
 */
enum LiiStatus lii_decomposition_albedo_image(const struct LiiDecomposition *dec,
                                              struct LiiImage **out);

/**
 * # Safety
 * `dec` must be null or a handle from this library not yet freed.
 */
void lii_decomposition_free(struct LiiDecomposition *dec);

/**
 * Weighted disagreement rate of `albedo` against a JSON-lines pair file.
 *
 * # Safety
 * `albedo` must be live; `annotations` NUL-terminated; `out` writable.
 */
enum LiiStatus lii_whdr(const struct LiiImage *albedo,
                        const char *annotations,
                        double delta,
                        double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LIDAR_IID_H */
