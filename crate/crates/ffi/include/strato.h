#ifndef STRATO_H
#define STRATO_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define STRATO_VARIANT_FULL 0

#define STRATO_VARIANT_BOUSSINESQ 1

/**
 * Status codes returned by every fallible function.
 */
typedef enum StratoStatus {
  STRATO_STATUS_OK = 0,
  STRATO_STATUS_NULL_POINTER = 1,
  /**
   * Bad arguments, unstable stratification or unresolved scales.
   */
  STRATO_STATUS_INVALID_INPUT = 2,
  /**
   * Eigen-solve or other numerical failure.
   */
  STRATO_STATUS_NUMERICAL = 3,
  /**
   * Output buffer shorter than required.
   */
  STRATO_STATUS_BUFFER_TOO_SMALL = 4,
  STRATO_STATUS_PANIC = 5,
} StratoStatus;

/**
 * Computed vertical modes.
 */
typedef struct StratoModes StratoModes;

/**
 * Density profile with its buoyancy frequency.
 */
typedef struct StratoProfile StratoProfile;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *strato_version(void);

/**
 * Copies the last error message of this thread into `buf` (NUL-terminated,
 * truncated to `len`). Returns the full message length, 0 if none.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t strato_last_error(char *buf, size_t len);

/**
 * Constant-buoyancy profile on `grid_size` uniform points over `[-depth, 0]`.
 *
 * # Safety
 * `out` must be a valid pointer to a handle slot.
 */
enum StratoStatus strato_profile_constant_n(double n,
                                            double rho0,
                                            size_t grid_size,
                                            double depth,
                                            double g,
                                            int32_t variant,
                                            struct StratoProfile **out);

/**
 * Profile from `count` samples `(z, rho)` with `z` ascending from `-depth` to 0.
 *
 * # Safety
 * `z` and `rho` must point to `count` doubles; `out` to a handle slot.
 */
enum StratoStatus strato_profile_tabulated(const double *z,
                                           const double *rho,
                                           size_t count,
                                           size_t grid_size,
                                           double depth,
                                           double g,
                                           int32_t variant,
                                           struct StratoProfile **out);

/**
 * # Safety
 * `p` must be null or a handle not yet freed.
 */
void strato_profile_free(struct StratoProfile *p);

/**
 * First `modes` vertical modes of a profile.
 *
 * # Safety
 * `profile` must be a live handle; `out` a valid handle slot.
 */
enum StratoStatus strato_modes_compute(const struct StratoProfile *profile,
                                       size_t modes,
                                       struct StratoModes **out);

/**
 * # Safety
 * `m` must be null or a handle not yet freed.
 */
void strato_modes_free(struct StratoModes *m);

/**
 * Number of modes, 0 for a null handle.
 *
 * # Safety
 * `m` must be null or a live handle.
 */
size_t strato_modes_count(const struct StratoModes *m);

/**
 * Number of vertical grid points, 0 for a null handle.
 *
 * # Safety
 * `m` must be null or a live handle.
 */
size_t strato_modes_grid_len(const struct StratoModes *m);

/**
 * Writes the speeds `c_1..c_M` into `out`.
 *
 * # Safety
 * `m` must be a live handle; `out` must hold `len` doubles.
 */
enum StratoStatus strato_modes_speeds(const struct StratoModes *m, double *out, size_t len);

/**
 * Writes the vertical grid into `out`.
 *
 * # Safety
 * `m` must be a live handle; `out` must hold `len` doubles.
 */
enum StratoStatus strato_modes_grid(const struct StratoModes *m, double *out, size_t len);

/**
 * Writes the vertical-velocity shape of mode `n` (1-based).
 *
 * # Safety
 * `m` must be a live handle; `out` must hold `len` doubles.
 */
enum StratoStatus strato_modes_w_shape(const struct StratoModes *m,
                                       size_t n,
                                       double *out,
                                       size_t len);

/**
 * Writes the horizontal-velocity shape of mode `n` (0-based, 0 is the barotropic one).
 *
 * # Safety
 * `m` must be a live handle; `out` must hold `len` doubles.
 */
enum StratoStatus strato_modes_v_shape(const struct StratoModes *m,
                                       size_t n,
                                       double *out,
                                       size_t len);

/**
 * Largest entry of the Gram-minus-identity matrix of the vertical-velocity basis.
 *
 * # Safety
 * `m` must be a live handle; `out` a valid pointer.
 */
enum StratoStatus strato_modes_orthonormality(const struct StratoModes *m, double *out);

/**
 * Interfacial wave speed of the two-layer limit.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum StratoStatus strato_two_layer_speed(double rho_plus,
                                         double rho_minus,
                                         double z0,
                                         double g,
                                         double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* STRATO_H */
