#ifndef DPBENCH_H
#define DPBENCH_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum DpbStatus {
  DPB_STATUS_OK = 0,
  DPB_STATUS_NULL_POINTER = 1,
  DPB_STATUS_INVALID_ARGUMENT = 2,
  DPB_STATUS_IO = 3,
  /**
   * Malformed CSV, metadata, plan or record input.
   */
  DPB_STATUS_PARSE = 4,
  DPB_STATUS_BUDGET_EXHAUSTED = 5,
  /**
   * Column missing or of the wrong kind for the query.
   */
  DPB_STATUS_INELIGIBLE = 6,
  /**
   * Divergence, unreachable calibration or undefined metric.
   */
  DPB_STATUS_NUMERIC = 7,
  DPB_STATUS_BUFFER_TOO_SMALL = 8,
  DPB_STATUS_PANIC = 9,
} DpbStatus;

typedef enum DpbQueryKind {
  DPB_QUERY_KIND_COUNT = 0,
  DPB_QUERY_KIND_SUM = 1,
  DPB_QUERY_KIND_AVG = 2,
  DPB_QUERY_KIND_HISTOGRAM = 3,
} DpbQueryKind;

typedef enum DpbMetric {
  DPB_METRIC_UTILITY = 0,
  DPB_METRIC_RUNTIME = 1,
  DPB_METRIC_RUNTIME_DELTA = 2,
  DPB_METRIC_MEMORY = 3,
} DpbMetric;

typedef enum DpbShape {
  DPB_SHAPE_GRID = 0,
  DPB_SHAPE_LINES = 1,
} DpbShape;

/**
 * Opaque dataset handle.
 */
typedef struct DpbDataset DpbDataset;

/**
 * Opaque privacy-budget ledger handle.
 */
typedef struct DpbLedger DpbLedger;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null after a
 * successful call. Valid until the next dpbench call on the same thread.
 */
const char *dpb_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *dpb_version(void);

/**
 * Loads a CSV file described by a JSON metadata file.
 *
 * # Safety
 * `csv_path` and `meta_path` must be NUL-terminated strings; `out` must be
 * writable. On success `*out` owns a handle to free with
 * [`dpb_dataset_free`].
 */
enum DpbStatus dpb_dataset_load(const char *csv_path,
                                const char *meta_path,
                                struct DpbDataset **out_dataset);

/**
 * Generates the synthetic mixed-type regression dataset: features
 * `x1..xd`, target `y`, continuous `age` and categorical `group`.
 *
 * # Safety
 * `weights` must point to `n_weights` readable doubles; `out_dataset`
 * must be writable.
 */
enum DpbStatus dpb_dataset_synth(size_t rows,
                                 const double *weights,
                                 size_t n_weights,
                                 double noise_std,
                                 uint64_t seed,
                                 struct DpbDataset **out_dataset);

/**
 * Number of rows, or 0 for a null handle.
 *
 * # Safety
 * `dataset` must be null or a live handle.
 */
size_t dpb_dataset_size(const struct DpbDataset *dataset);

/**
 * # Safety
 * `dataset` must be null or a handle not yet freed.
 */
void dpb_dataset_free(struct DpbDataset *dataset);

/**
 * Creates a sequential-composition ledger with total budget `(ε, δ)`.
 *
 * # Safety
 * `out_ledger` must be writable.
 */
enum DpbStatus dpb_ledger_new(double epsilon, double delta, struct DpbLedger **out_ledger);

/**
 * Budget still available.
 *
 * # Safety
 * `ledger` must be a live handle; the out pointers must be writable.
 */
enum DpbStatus dpb_ledger_remaining(const struct DpbLedger *ledger,
                                    double *out_epsilon,
                                    double *out_delta);

/**
 * # Safety
 * `ledger` must be null or a handle not yet freed.
 */
void dpb_ledger_free(struct DpbLedger *ledger);

/**
 * Exact count, sum or average.
 *
 * # Safety
 * `dataset` must be a live handle, `column` a NUL-terminated string and
 * `out_value` writable.
 */
enum DpbStatus dpb_query_exact(const struct DpbDataset *dataset,
                               enum DpbQueryKind kind,
                               const char *column,
                               double *out_value);

/**
 * Private count, sum or average with budget `epsilon`. The spend is
 * charged to `ledger`, or to a fresh ledger of exactly `epsilon` when
 * `ledger` is null.
 *
 * # Safety
 * As for [`dpb_query_exact`]; `ledger` must be null or a live handle.
 */
enum DpbStatus dpb_query_private(const struct DpbDataset *dataset,
                                 enum DpbQueryKind kind,
                                 const char *column,
                                 double epsilon,
                                 struct DpbLedger *ledger,
                                 uint64_t seed,
                                 double *out_value);

/**
 * Exact histogram of a categorical column. Bins are written in
 * lexicographic label order; `*out_len` is always set to the bin count,
 * even when `capacity` is too small.
 *
 * # Safety
 * `values` must have room for `capacity` doubles; other pointers as for
 * [`dpb_query_exact`].
 */
enum DpbStatus dpb_histogram_exact(const struct DpbDataset *dataset,
                                   const char *column,
                                   double *values,
                                   size_t capacity,
                                   size_t *out_len);

/**
 * Private histogram; see [`dpb_histogram_exact`] and [`dpb_query_private`].
 *
 * # Safety
 * As for [`dpb_histogram_exact`]; `ledger` must be null or a live handle.
 */
enum DpbStatus dpb_histogram_private(const struct DpbDataset *dataset,
                                     const char *column,
                                     double epsilon,
                                     struct DpbLedger *ledger,
                                     uint64_t seed,
                                     double *values,
                                     size_t capacity,
                                     size_t *out_len);

/**
 * RMSPE in percent over `n` paired results.
 *
 * # Safety
 * `np_values` and `dp_values` must each point to `n` readable doubles.
 */
enum DpbStatus dpb_rmspe(const double *np_values,
                         const double *dp_values,
                         size_t n,
                         double *out_value);

/**
 * `(dp_peak − np_peak) / np_peak · 100`.
 *
 * # Safety
 * `out_value` must be writable.
 */
enum DpbStatus dpb_overhead_percent(double dp_peak, double np_peak, double *out_value);

/**
 * ε spent by `steps` rounds of the Poisson-subsampled Gaussian mechanism
 * with noise multiplier `sigma` and rate `q`, at the given δ.
 *
 * # Safety
 * `out_epsilon` must be writable.
 */
enum DpbStatus dpb_rdp_epsilon(double sigma,
                               double q,
                               size_t steps,
                               double delta,
                               double *out_epsilon);

/**
 * Smallest noise multiplier meeting `(ε, δ)` for the given schedule.
 *
 * # Safety
 * `out_sigma` must be writable.
 */
enum DpbStatus dpb_calibrate_sigma(double epsilon,
                                   double delta,
                                   double q,
                                   size_t steps,
                                   double *out_sigma);

/**
 * Executes a JSON plan against `dataset` and writes JSON Lines records.
 * When `override_seed` is true, `seed` replaces the plan's master seed.
 *
 * # Safety
 * Paths must be NUL-terminated strings; `dataset` a live handle.
 */
enum DpbStatus dpb_run_plan(const char *plan_path,
                            const struct DpbDataset *dataset,
                            bool override_seed,
                            uint64_t seed,
                            const char *records_path);

/**
 * Aggregates a records file into a summaries file.
 *
 * # Safety
 * Paths must be NUL-terminated strings.
 */
enum DpbStatus dpb_aggregate(const char *records_path, size_t trim, const char *summaries_path);

/**
 * Writes plot-ready CSV for one metric.
 *
 * # Safety
 * Paths must be NUL-terminated strings.
 */
enum DpbStatus dpb_emit_report(const char *summaries_path,
                               enum DpbMetric metric,
                               enum DpbShape shape,
                               const char *out_path);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DPBENCH_H */
