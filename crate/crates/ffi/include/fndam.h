#ifndef FNDAM_H
#define FNDAM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum FndamStatus {
  FNDAM_STATUS_OK = 0,
  FNDAM_STATUS_NULL_POINTER = 1,
  FNDAM_STATUS_DOMAIN = 2,
  FNDAM_STATUS_ARGUMENT = 3,
  FNDAM_STATUS_INITIALIZATION = 4,
  FNDAM_STATUS_STEP_SIZE = 5,
  FNDAM_STATUS_SATURATION = 6,
  FNDAM_STATUS_PARSE = 7,
  FNDAM_STATUS_CONFIG = 8,
  FNDAM_STATUS_NOT_SEPARABLE = 9,
  FNDAM_STATUS_IO = 10,
  FNDAM_STATUS_UTF8 = 11,
  FNDAM_STATUS_PANIC = 12,
} FndamStatus;

typedef enum FndamSide {
  FNDAM_SIDE_SET = 0,
  FNDAM_SIDE_RESET = 1,
} FndamSide;

/**
 * Opaque DAM array.
 */
typedef struct FndamArray FndamArray;

/**
 * Opaque DAM cell.
 */
typedef struct FndamCell FndamCell;

/**
 * Device constants: `k1` (1/s), `k2` (V), capacitances (F).
 */
typedef struct FndamParams {
  double k1;
  double k2;
  double c_total;
  double c_couple;
} FndamParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failing call on this thread, or NULL. Valid until the next failing
 * call on the same thread; do not free.
 */
const char *fndam_last_error_message(void);

/**
 * Shipped device calibration.
 */
struct FndamParams fndam_default_params(void);

/**
 * Initial node voltage of the shipped calibration (V).
 */
double fndam_default_v0(void);

/**
 * `0.5 * c_in * v_in^2` (J).
 */
double fndam_write_energy(double c_in, double v_in);

/**
 * Synchronised cell with identical SET and RESET nodes starting at `v0`.
 *
 * # Safety
 * `params` must point to a valid `FndamParams`; `out` must be writable.
 */
enum FndamStatus fndam_cell_new(const struct FndamParams *params,
                                double v0,
                                struct FndamCell **out);

/**
 * Releases a cell; NULL is ignored.
 *
 * # Safety
 * `cell` must come from `fndam_cell_new` and not be used afterwards.
 */
void fndam_cell_free(struct FndamCell *cell);

/**
 * Current weight (mV).
 *
 * # Safety
 * `cell` must be a live handle; `out` must be writable.
 */
enum FndamStatus fndam_cell_weight(const struct FndamCell *cell, double *out);

/**
 * Time since synchronisation (s).
 *
 * # Safety
 * `cell` must be a live handle; `out` must be writable.
 */
enum FndamStatus fndam_cell_clock(const struct FndamCell *cell, double *out);

/**
 * Applies `n_pulses` pulses at `frequency` to one side; the other node keeps decaying.
 *
 * # Safety
 * `cell` must be a live handle.
 */
enum FndamStatus fndam_cell_pulse(struct FndamCell *cell,
                                  enum FndamSide side,
                                  double amplitude,
                                  double duration,
                                  uint64_t n_pulses,
                                  double frequency);

/**
 * Lets both nodes tunnel freely for `dt` seconds.
 *
 * # Safety
 * `cell` must be a live handle.
 */
enum FndamStatus fndam_cell_decay(struct FndamCell *cell, double dt);

/**
 * Amplitude that writes `target_mv` on `side` with one pulse of `duration` (V).
 *
 * # Safety
 * `cell` must be a live handle; `out` must be writable.
 */
enum FndamStatus fndam_cell_precompensated_amplitude(const struct FndamCell *cell,
                                                     enum FndamSide side,
                                                     double target_mv,
                                                     double duration,
                                                     double amp_max,
                                                     double *out);

/**
 * `n` cells around `params` with Gaussian relative mismatch `sigma` drawn from `seed`.
 *
 * # Safety
 * `params` must point to a valid `FndamParams`; `out` must be writable.
 */
enum FndamStatus fndam_array_new(size_t n,
                                 const struct FndamParams *params,
                                 double v0,
                                 double sigma,
                                 uint64_t seed,
                                 struct FndamArray **out);

/**
 * Releases an array; NULL is ignored.
 *
 * # Safety
 * `array` must come from this library and not be used afterwards.
 */
void fndam_array_free(struct FndamArray *array);

/**
 * Number of cells.
 *
 * # Safety
 * `array` must be a live handle; `out` must be writable.
 */
enum FndamStatus fndam_array_len(const struct FndamArray *array, size_t *out);

/**
 * Copies the weights (mV) into `buf`, which must hold `len` doubles with `len` equal to
 * the array length.
 *
 * # Safety
 * `array` must be a live handle; `buf` must be writable for `len` doubles.
 */
enum FndamStatus fndam_array_weights(const struct FndamArray *array, double *buf, size_t len);

/**
 * Pulses one cell for a window of `window` seconds; every other cell decays for the window.
 *
 * # Safety
 * `array` must be a live handle.
 */
enum FndamStatus fndam_array_pulse(struct FndamArray *array,
                                   size_t index,
                                   enum FndamSide side,
                                   double amplitude,
                                   double duration,
                                   uint64_t n_pulses,
                                   double frequency,
                                   double window);

/**
 * Lets every cell decay for `dt` seconds.
 *
 * # Safety
 * `array` must be a live handle.
 */
enum FndamStatus fndam_array_advance(struct FndamArray *array, double dt);

/**
 * Serialises the array to its JSON state document. Release with `fndam_string_free`.
 *
 * # Safety
 * `array` must be a live handle; `out` must be writable.
 */
enum FndamStatus fndam_array_save_state(const struct FndamArray *array, char **out);

/**
 * Restores an array from a JSON state document.
 *
 * # Safety
 * `document` must be a NUL-terminated string; `out` must be writable.
 */
enum FndamStatus fndam_array_load_state(const char *document, struct FndamArray **out);

/**
 * Releases a string returned by this library; NULL is ignored.
 *
 * # Safety
 * `s` must come from this library and not be used afterwards.
 */
void fndam_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FNDAM_H */
