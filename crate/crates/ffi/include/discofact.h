#ifndef DISCOFACT_H
#define DISCOFACT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum DfcStatus {
  DFC_STATUS_OK = 0,
  DFC_STATUS_NULL_POINTER = 1,
  DFC_STATUS_INVALID_UTF8 = 2,
  DFC_STATUS_INVALID_INPUT = 3,
  DFC_STATUS_BACKEND = 4,
  DFC_STATUS_BUFFER_TOO_SMALL = 5,
  DFC_STATUS_INTERNAL = 6,
} DfcStatus;

typedef enum DfcMetric {
  DFC_METRIC_ROC_AUC = 0,
  DFC_METRIC_KENDALL_TAU = 1,
} DfcMetric;

// A scorer together with its optional cache.
typedef struct DfcScorer DfcScorer;

// A validated discourse tree.
typedef struct DfcTree DfcTree;

typedef struct DfcEduFeatures {
  uint32_t ono;
  uint32_t depth;
  uint32_t promo;
  double ono_norm;
  double depth_norm;
  double promo_norm;
} DfcEduFeatures;

typedef struct DfcWelch {
  double t;
  double df;
  double p;
} DfcWelch;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or NULL. Valid until the
// next failing call on the same thread.
const char *dfc_last_error(void);

// Library version as a static NUL-terminated string.
const char *dfc_version(void);

// Parses a canonical tree JSON document. On success `*out` owns a new handle.
//
// # Safety
// `json` must be a NUL-terminated string and `out` a valid pointer.
enum DfcStatus dfc_tree_from_json(const char *json, struct DfcTree **out);

// # Safety
// `tree` must come from [`dfc_tree_from_json`] and not be used afterwards. NULL is ignored.
void dfc_tree_free(struct DfcTree *tree);

// Number of EDUs, or 0 for a NULL handle.
//
// # Safety
// `tree` must be NULL or a live handle.
size_t dfc_tree_edu_count(const struct DfcTree *tree);

// Tree depth D: one more than the deepest leaf level.
//
// # Safety
// `tree` must be a live handle and `out` a valid pointer.
enum DfcStatus dfc_tree_depth(const struct DfcTree *tree, uint32_t *out);

// Writes the features of every EDU, in EDU order, to `out[0..len]`.
// Fails with `BUFFER_TOO_SMALL` when `len` is below the EDU count.
//
// # Safety
// `tree` must be a live handle and `out` valid for `len` writes.
enum DfcStatus dfc_tree_features(const struct DfcTree *tree,
                                 struct DfcEduFeatures *out,
                                 size_t len);

// Average shortest path length over all nodes, or over leaves only.
//
// # Safety
// `tree` must be a live handle and `out` a valid pointer.
enum DfcStatus dfc_tree_aspl(const struct DfcTree *tree, bool leaves_only, double *out);

// Discourse re-weighting of `n` sentence scores into `out[0..n]`.
//
// # Safety
// The input arrays must hold `n` values and `out` must have room for `n`.
enum DfcStatus dfc_reweight(const double *scores,
                            const double *depth_norms,
                            const double *heights,
                            size_t n,
                            double alpha,
                            double epsilon,
                            double *out);

// Token F1 of two strings.
//
// # Safety
// Both strings must be NUL-terminated and `out` a valid pointer.
enum DfcStatus dfc_builtin_overlap(const char *premise, const char *hypothesis, double *out);

// ROC-AUC of `n` scores; `labels` holds 0 or 1 per item.
//
// # Safety
// Arrays must hold `n` values and `out` must be valid.
enum DfcStatus dfc_roc_auc(const uint8_t *labels, const double *scores, size_t n, double *out);

// Kendall's tau-b of two length-`n` series.
//
// # Safety
// Arrays must hold `n` values and `out` must be valid.
enum DfcStatus dfc_kendall_tau(const double *x, const double *y, size_t n, double *out);

// Welch's two-sided t-test.
//
// # Safety
// `a` must hold `na` values, `b` `nb` values, and `out` must be valid.
enum DfcStatus dfc_welch_t_test(const double *a,
                                size_t na,
                                const double *b,
                                size_t nb,
                                struct DfcWelch *out);

// One-sided paired bootstrap p-value for "A improves over B". `metric` is a
// [`DfcMetric`] value.
//
// # Safety
// `gold`, `a` and `b` must hold `n` values and `out` must be valid.
enum DfcStatus dfc_paired_bootstrap(uint32_t metric,
                                    const double *gold,
                                    const double *a,
                                    const double *b,
                                    size_t n,
                                    size_t resamples,
                                    uint64_t seed,
                                    double *out);

// Creates a scorer from `builtin`, `subprocess:<command>` or `http:<url>`.
// `cache_path` may be NULL for no cache.
//
// # Safety
// `spec` must be NUL-terminated, `cache_path` NULL or NUL-terminated, `out` valid.
enum DfcStatus dfc_scorer_new(const char *spec, const char *cache_path, struct DfcScorer **out);

// # Safety
// `scorer` must come from [`dfc_scorer_new`] and not be used afterwards. NULL is ignored.
void dfc_scorer_free(struct DfcScorer *scorer);

// Scores `n` premise/hypothesis pairs into `out[0..n]`, in order.
//
// # Safety
// `premises` and `hypotheses` must each hold `n` NUL-terminated strings and
// `out` must have room for `n` values.
enum DfcStatus dfc_scorer_score(const struct DfcScorer *scorer,
                                const char *const *premises,
                                const char *const *hypotheses,
                                size_t n,
                                double *out);

// Number of requests this scorer has sent to its backend.
//
// # Safety
// `scorer` must be NULL or a live handle.
uint64_t dfc_scorer_dispatched(const struct DfcScorer *scorer);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DISCOFACT_H */
