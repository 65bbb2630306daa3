#ifndef CSSPHY_H
#define CSSPHY_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum CssphyStatus {
  CSSPHY_STATUS_OK = 0,
  CSSPHY_STATUS_NULL_POINTER = 1,
  CSSPHY_STATUS_INVALID_ARGUMENT = 2,
  CSSPHY_STATUS_BUFFER_TOO_SMALL = 3,
  CSSPHY_STATUS_NO_PREAMBLE = 4,
  CSSPHY_STATUS_SYNC_WORD_NOT_FOUND = 5,
  CSSPHY_STATUS_HEADER_INVALID = 6,
  CSSPHY_STATUS_CRC_MISMATCH = 7,
  CSSPHY_STATUS_INTERNAL = 8,
} CssphyStatus;

/**
 * A buffer of complex baseband samples with its sample rate.
 */
typedef struct CssphyIq CssphyIq;

/**
 * Validated PHY parameters.
 */
typedef struct CssphyParams CssphyParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread; empty after a success.
 * Valid until the next call into this library on the same thread.
 */
const char *cssphy_last_error_message(void);

/**
 * Static description of a status code.
 */
const char *cssphy_status_string(enum CssphyStatus status);

/**
 * Creates a parameter set. `bw` is 125000, 250000 or 500000 Hz.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle.
 */
enum CssphyStatus cssphy_params_new(uint32_t sf,
                                    uint32_t bw,
                                    uint32_t os,
                                    uint32_t n_pre,
                                    struct CssphyParams **out);

/**
 * # Safety
 * `params` must be null or a handle from [`cssphy_params_new`] not yet freed.
 */
void cssphy_params_free(struct CssphyParams *params);

/**
 * Samples per symbol, `os * 2^sf`; 0 for a null handle.
 *
 * # Safety
 * `params` must be null or a live handle.
 */
size_t cssphy_params_samples_per_symbol(const struct CssphyParams *params);

/**
 * Copies `n_samples` interleaved I/Q pairs into a new buffer.
 *
 * # Safety
 * `samples` must point to `2 * n_samples` floats; `out` must be writable.
 */
enum CssphyStatus cssphy_iq_new(const float *samples,
                                size_t n_samples,
                                double sample_rate,
                                struct CssphyIq **out);

/**
 * # Safety
 * `iq` must be null or a live handle.
 */
void cssphy_iq_free(struct CssphyIq *iq);

/**
 * Number of complex samples; 0 for a null handle.
 *
 * # Safety
 * `iq` must be null or a live handle.
 */
size_t cssphy_iq_len(const struct CssphyIq *iq);

/**
 * Sample rate in Hz; 0 for a null handle.
 *
 * # Safety
 * `iq` must be null or a live handle.
 */
double cssphy_iq_sample_rate(const struct CssphyIq *iq);

/**
 * Copies the samples as interleaved floats into `out`, which holds room
 * for `capacity` complex samples.
 *
 * # Safety
 * `iq` must be a live handle; `out` must point to `2 * capacity` floats.
 */
enum CssphyStatus cssphy_iq_copy(const struct CssphyIq *iq, float *out, size_t capacity);

/**
 * Modulates `n` symbol values back to back.
 *
 * # Safety
 * `params` must be live; `symbols` must point to `n` values; `out` writable.
 */
enum CssphyStatus cssphy_modulate_symbols(const struct CssphyParams *params,
                                          const uint32_t *symbols,
                                          size_t n,
                                          struct CssphyIq **out);

/**
 * Demodulates the symbol starting at sample `offset`.
 *
 * # Safety
 * `params` and `iq` must be live handles; `symbol` must be writable.
 */
enum CssphyStatus cssphy_demod_symbol(const struct CssphyParams *params,
                                      const struct CssphyIq *iq,
                                      size_t offset,
                                      uint32_t *symbol);

/**
 * Builds a frame with explicit header, CRC and code rate 4/8 (at most 255
 * payload bytes).
 *
 * # Safety
 * `params` must be live; `payload` must point to `len` bytes; `out` writable.
 */
enum CssphyStatus cssphy_build_frame(const struct CssphyParams *params,
                                     const uint8_t *payload,
                                     size_t len,
                                     struct CssphyIq **out);

/**
 * Detects, synchronizes and decodes one frame built by
 * [`cssphy_build_frame`]. On success the payload is copied to `payload` and
 * its length stored in `len`. With `CSSPHY_STATUS_BUFFER_TOO_SMALL`, `len`
 * receives the required size.
 *
 * # Safety
 * `params` and `iq` must be live; `payload` must have room for `capacity`
 * bytes; `len` must be writable.
 */
enum CssphyStatus cssphy_decode_frame(const struct CssphyParams *params,
                                      const struct CssphyIq *iq,
                                      uint8_t *payload,
                                      size_t capacity,
                                      size_t *len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CSSPHY_H */
