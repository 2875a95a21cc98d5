#ifndef CREDYN_H
#define CREDYN_H

/* Generated by cbindgen from crates/ffi. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

enum CredynStatus
#if defined(__cplusplus) || __STDC_VERSION__ >= 202311L
  : int32_t
#endif // defined(__cplusplus) || __STDC_VERSION__ >= 202311L
 {
  CREDYN_STATUS_OK = 0,
  CREDYN_STATUS_NULL_ARGUMENT = 1,
  CREDYN_STATUS_INVALID_ARGUMENT = 2,
  CREDYN_STATUS_IO = 3,
  CREDYN_STATUS_PARSE = 4,
  CREDYN_STATUS_SCHEMA = 5,
  CREDYN_STATUS_UNDEFINED_METRIC = 6,
  CREDYN_STATUS_CONFIG = 7,
  CREDYN_STATUS_INTERNAL = 8,
};
#ifndef __cplusplus
#if __STDC_VERSION__ >= 202311L
typedef enum CredynStatus CredynStatus;
#else
typedef int32_t CredynStatus;
#endif // __STDC_VERSION__ >= 202311L
#endif // __cplusplus

/**
 * Opaque scoring model.
 */
typedef struct CredynModel CredynModel;

/**
 * Outcome of a paired t-test. `relative_increment` is NaN when undefined.
 */
typedef struct CredynComparison {
  double delta_mean;
  double relative_increment;
  double t_statistic;
  double p_value;
  uint8_t significant;
} CredynComparison;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version, a static NUL-terminated string.
 */
const char *credyn_version(void);

/**
 * Message of the last failed call on this thread; empty after a success.
 * Valid until the next call on this thread.
 */
const char *credyn_last_error(void);

/**
 * Loads a model from a JSON file. Free it with [`credyn_model_free`].
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
CredynStatus credyn_model_load(const char *path, struct CredynModel **out);

/**
 * Parses a model from a JSON string.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
CredynStatus credyn_model_from_json(const char *json, struct CredynModel **out);

/**
 * Releases a model. Null is ignored.
 *
 * # Safety
 * `model` must come from this library and not be used afterwards.
 */
void credyn_model_free(struct CredynModel *model);

/**
 * # Safety
 * `model` must be a live handle and `out` a valid pointer.
 */
CredynStatus credyn_model_num_features(const struct CredynModel *model, uintptr_t *out);

/**
 * Name of feature `index`, owned by the model handle.
 *
 * # Safety
 * `model` must be a live handle and `out` a valid pointer.
 */
CredynStatus credyn_model_feature_name(const struct CredynModel *model,
                                       uintptr_t index,
                                       const char **out);

/**
 * Default probabilities for `n_rows` row-major rows. NaN marks a missing value.
 *
 * # Safety
 * `rows` must hold `n_rows * n_features` doubles and `out` `n_rows`.
 */
CredynStatus credyn_model_predict_proba(const struct CredynModel *model,
                                        const double *rows,
                                        uintptr_t n_rows,
                                        uintptr_t n_features,
                                        double *out);

/**
 * Raw margins (log-odds) for `n_rows` row-major rows.
 *
 * # Safety
 * `rows` must hold `n_rows * n_features` doubles and `out` `n_rows`.
 */
CredynStatus credyn_model_predict_margin(const struct CredynModel *model,
                                         const double *rows,
                                         uintptr_t n_rows,
                                         uintptr_t n_features,
                                         double *out);

/**
 * TreeSHAP values of one row; `base_value` plus their sum is the margin.
 *
 * # Safety
 * `row` and `values` must each hold `n_features` doubles; `base_value`
 * must be a valid pointer.
 */
CredynStatus credyn_model_shap(const struct CredynModel *model,
                               const double *row,
                               uintptr_t n_features,
                               double *values,
                               double *base_value);

/**
 * ROC AUC of `scores` against 0/1 `labels`.
 *
 * # Safety
 * `scores` and `labels` must hold `n` elements; `out` must be valid.
 */
CredynStatus credyn_auc(const double *scores, const uint8_t *labels, uintptr_t n, double *out);

/**
 * Kolmogorov-Smirnov statistic of `scores` between the two label classes.
 *
 * # Safety
 * `scores` and `labels` must hold `n` elements; `out` must be valid.
 */
CredynStatus credyn_ks(const double *scores, const uint8_t *labels, uintptr_t n, double *out);

/**
 * Two-sided paired t-test of `b` against `a` at the 0.05 level.
 *
 * # Safety
 * `a` and `b` must hold `n` doubles; `out` must be valid.
 */
CredynStatus credyn_paired_ttest(const double *a,
                                 const double *b,
                                 uintptr_t n,
                                 struct CredynComparison *out);

/**
 * Generates a synthetic population scaled by `scale` (1.0 = default size)
 * and writes `panel.csv`, `cohort.csv`, `eownet.csv` and `familynet.csv`
 * into `out_dir`.
 *
 * # Safety
 * `out_dir` must be a NUL-terminated string.
 */
CredynStatus credyn_generate(const char *out_dir, uint64_t seed, double scale);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CREDYN_H */
