#ifndef PFAN_H
#define PFAN_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum PfanStatus {
  PFAN_STATUS_OK = 0,
  PFAN_STATUS_NULL_POINTER = 1,
  PFAN_STATUS_INVALID_ARGUMENT = 2,
  PFAN_STATUS_IO = 3,
  PFAN_STATUS_IMAGE = 4,
  PFAN_STATUS_CONFIG = 5,
  PFAN_STATUS_SHAPE = 6,
  PFAN_STATUS_WEIGHTS = 7,
  PFAN_STATUS_DATA = 8,
  PFAN_STATUS_PANIC = 9,
} PfanStatus;

typedef enum PfanAttnKind {
  PFAN_ATTN_KIND_SEA = 0,
  PFAN_ATTN_KIND_FULL = 1,
} PfanAttnKind;

/**
 * Opaque generator handle.
 */
typedef struct PfanGenerator PfanGenerator;

/**
 * Smoke controls; positions are normalized with `y` pointing down.
 */
typedef struct PfanSmokeParams {
  double density;
  double intensity;
  double temperature;
  double source_x;
  double source_y;
  double light_x;
  double light_y;
  double light_intensity;
  uint64_t seed;
  uint32_t frame;
} PfanSmokeParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *pfan_version(void);

/**
 * Message of the last failed call on this thread, or null. The pointer is
 * valid until the next `pfan_*` call on the same thread.
 */
const char *pfan_last_error(void);

/**
 * Loads a generator checkpoint from a file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum PfanStatus pfan_generator_load(const char *path, struct PfanGenerator **out);

/**
 * Loads a generator checkpoint from memory.
 *
 * # Safety
 * `bytes` must point to `len` readable bytes; `out` must be writable.
 */
enum PfanStatus pfan_generator_from_bytes(const uint8_t *bytes,
                                          size_t len,
                                          struct PfanGenerator **out);

/**
 * Untrained generator with the default (or desk-scale) topology.
 *
 * # Safety
 * `out` must be writable.
 */
enum PfanStatus pfan_generator_new(bool desk, uint64_t seed, struct PfanGenerator **out);

/**
 * Releases a handle. Null is ignored.
 *
 * # Safety
 * `generator` must come from a `pfan_generator_*` constructor and not be
 * used afterwards.
 */
void pfan_generator_free(struct PfanGenerator *generator);

/**
 * # Safety
 * `generator` must be a live handle; `out` must be writable.
 */
enum PfanStatus pfan_generator_param_count(const struct PfanGenerator *generator, size_t *out);

/**
 * Desmokes one RGB image into `out_rgb` (same size as the input).
 *
 * # Safety
 * `generator` must be a live handle; buffers must hold `width * height * 3`
 * bytes.
 */
enum PfanStatus pfan_generator_desmoke(const struct PfanGenerator *generator,
                                       const uint8_t *rgb,
                                       size_t width,
                                       size_t height,
                                       uint8_t *out_rgb);

/**
 * PSNR in dB over all channels; `+inf` for identical images.
 *
 * # Safety
 * `a` and `b` must hold `width * height * 3` bytes; `out` must be writable.
 */
enum PfanStatus pfan_psnr_rgb8(const uint8_t *a,
                               const uint8_t *b,
                               size_t width,
                               size_t height,
                               double *out);

/**
 * Mean SSIM over the three channels.
 *
 * # Safety
 * As for [`pfan_psnr_rgb8`].
 */
enum PfanStatus pfan_ssim_rgb8(const uint8_t *a,
                               const uint8_t *b,
                               size_t width,
                               size_t height,
                               double *out);

/**
 * Mean per-pixel CIEDE2000.
 *
 * # Safety
 * As for [`pfan_psnr_rgb8`].
 */
enum PfanStatus pfan_ciede2000_rgb8(const uint8_t *a,
                                    const uint8_t *b,
                                    size_t width,
                                    size_t height,
                                    double *out);

/**
 * CIEDE2000 between two Lab colors.
 */
double pfan_ciede2000_lab(double l1, double a1, double b1, double l2, double a2, double b2);

/**
 * Renders a smoke layer into `out` (`width * height` floats in `[0, 1]`).
 *
 * # Safety
 * `params` must be readable; `out` must hold `width * height` floats.
 */
enum PfanStatus pfan_render_smoke(const struct PfanSmokeParams *params,
                                  size_t width,
                                  size_t height,
                                  float *out);

/**
 * Adds a smoke layer to a clean RGB image, clamping at white.
 *
 * # Safety
 * `clean` and `out_rgb` hold `width * height * 3` bytes; `smoke` holds
 * `width * height` floats.
 */
enum PfanStatus pfan_composite_rgb8(const uint8_t *clean,
                                    const float *smoke,
                                    size_t width,
                                    size_t height,
                                    uint8_t *out_rgb);

/**
 * Analytic operation count of one attention map; fails if it exceeds
 * `u64`.
 *
 * # Safety
 * `out` must be writable.
 */
enum PfanStatus pfan_flop_count(enum PfanAttnKind kind,
                                size_t c,
                                size_t c_qk,
                                size_t c_v,
                                size_t h,
                                size_t w,
                                uint64_t *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PFAN_H */
