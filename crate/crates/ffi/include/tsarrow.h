#ifndef TSARROW_H
#define TSARROW_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum TsaStatus {
  TSA_STATUS_OK = 0,
  TSA_STATUS_NULL_POINTER = 1,
  TSA_STATUS_INVALID_ARGUMENT = 2,
  TSA_STATUS_INSUFFICIENT_LENGTH = 3,
  TSA_STATUS_RANK_DEFICIENT = 4,
  TSA_STATUS_NOT_CAUSAL = 5,
  TSA_STATUS_NUMERICAL = 6,
  TSA_STATUS_DEGENERATE = 7,
  TSA_STATUS_GENERATION_FAILED = 8,
  TSA_STATUS_PARSE = 9,
  TSA_STATUS_IO = 10,
  TSA_STATUS_PANIC = 99,
} TsaStatus;

typedef enum TsaVerdict {
  TSA_VERDICT_UNDECIDED = 0,
  TSA_VERDICT_FORWARD = 1,
  TSA_VERDICT_BACKWARD = 2,
} TsaVerdict;

/**
 * Result of [`tsa_detect`].
 */
typedef struct TsaReport TsaReport;

/**
 * A `T x K` series.
 */
typedef struct TsaSeries TsaSeries;

/**
 * Detection settings. Obtain defaults from [`tsa_detect_options_default`].
 */
typedef struct TsaDetectOptions {
  double sig1;
  double sig2;
  /**
   * 0: scores are p-values; 1: scores are negated HSIC statistics.
   */
  uint8_t neg_statistic;
  /**
   * Upper bound for AIC order selection; ignored when `fixed_order > 0`.
   */
  size_t p_max;
  size_t fixed_order;
  /**
   * Tests lags `1..=max_lag`.
   */
  size_t max_lag;
  uint8_t bonferroni;
  /**
   * 0 selects the gamma approximation, otherwise the number of circular shifts.
   */
  size_t n_resample;
  /**
   * 0: median heuristic over sqrt(dim); 1: plain median heuristic.
   */
  uint8_t plain_median;
  uint64_t seed;
} TsaDetectOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread, or NULL. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *tsa_last_error_message(void);

/**
 * Copies `rows * cols` row-major values into a new series.
 *
 * # Safety
 * `data` must point to `rows * cols` readable doubles; `out` must be writable.
 */
enum TsaStatus tsa_series_new(const double *data, size_t rows, size_t cols, struct TsaSeries **out);

/**
 * # Safety
 * `series` must be NULL or a handle from this library not yet freed.
 */
void tsa_series_free(struct TsaSeries *series);

/**
 * # Safety
 * `series` must be NULL or a live handle.
 */
size_t tsa_series_rows(const struct TsaSeries *series);

/**
 * # Safety
 * `series` must be NULL or a live handle.
 */
size_t tsa_series_cols(const struct TsaSeries *series);

/**
 * Copies the series row-major into `buf`, which must hold `rows * cols` doubles.
 *
 * # Safety
 * `series` must be a live handle and `buf` must have room for `len` doubles.
 */
enum TsaStatus tsa_series_copy(const struct TsaSeries *series, double *buf, size_t len);

/**
 * Simulates a `t x k` VAR(p) series whose components all use noise exponent `r`.
 *
 * # Safety
 * `out` must be writable.
 */
enum TsaStatus tsa_simulate(size_t k,
                            size_t p,
                            size_t t,
                            double r,
                            uint64_t seed,
                            struct TsaSeries **out);

struct TsaDetectOptions tsa_detect_options_default(void);

/**
 * Runs direction detection. `options` may be NULL for defaults.
 *
 * # Safety
 * `series` must be a live handle, `options` NULL or readable, `out` writable.
 */
enum TsaStatus tsa_detect(const struct TsaSeries *series,
                          const struct TsaDetectOptions *options,
                          struct TsaReport **out);

/**
 * # Safety
 * `report` must be NULL or a handle from this library not yet freed.
 */
void tsa_report_free(struct TsaReport *report);

/**
 * # Safety
 * `report` must be NULL or a live handle. NULL yields `TSA_VERDICT_UNDECIDED`.
 */
enum TsaVerdict tsa_report_verdict(const struct TsaReport *report);

/**
 * # Safety
 * `report` must be NULL or a live handle. NULL yields NaN.
 */
double tsa_report_fw_score(const struct TsaReport *report);

/**
 * # Safety
 * `report` must be NULL or a live handle. NULL yields NaN.
 */
double tsa_report_bw_score(const struct TsaReport *report);

/**
 * # Safety
 * `report` must be NULL or a live handle. NULL yields 0.
 */
size_t tsa_report_order(const struct TsaReport *report);

/**
 * Full report as a NUL-terminated JSON string; release with [`tsa_string_free`].
 *
 * # Safety
 * `report` must be a live handle and `out` writable.
 */
enum TsaStatus tsa_report_to_json(const struct TsaReport *report, char **out);

/**
 * # Safety
 * `s` must be NULL or a string returned by this library not yet freed.
 */
void tsa_string_free(char *s);

/**
 * HSIC statistic between two equally long series with median-heuristic
 * bandwidths, and optionally its gamma-approximation p-value.
 *
 * # Safety
 * `x` and `z` must be live handles; `statistic` writable; `p_value` NULL or writable.
 */
enum TsaStatus tsa_hsic(const struct TsaSeries *x,
                        const struct TsaSeries *z,
                        double *statistic,
                        double *p_value);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TSARROW_H */
