#ifndef SPECSHARE_H
#define SPECSHARE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SsStatus {
  SS_STATUS_OK = 0,
  SS_STATUS_NULL_POINTER = 1,
  SS_STATUS_INVALID_UTF8 = 2,
  SS_STATUS_DOMAIN = 3,
  SS_STATUS_CONTRACT = 4,
  SS_STATUS_INFEASIBLE = 5,
  SS_STATUS_CAP_EXCEEDED = 6,
  SS_STATUS_NO_EQUILIBRIUM = 7,
  SS_STATUS_HYPOTHESIS = 8,
  SS_STATUS_CONFIG = 9,
  SS_STATUS_PARSE = 10,
  SS_STATUS_IO = 11,
  SS_STATUS_OUT_OF_RANGE = 12,
  SS_STATUS_PANIC = 13,
} SsStatus;

typedef enum SsFamily {
  SS_FAMILY_LINEAR = 0,
  /**
   * `a = 24, s = 0.5, e = 0.9`.
   */
  SS_FAMILY_COBB_DOUGLAS = 1,
} SsFamily;

typedef struct SsFindings SsFindings;

typedef struct SsModel SsModel;

typedef struct SsReport SsReport;

typedef struct SsScenario SsScenario;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or NULL. Valid until the
 * next `ss_*` call on the same thread.
 */
const char *ss_last_error_message(void);

/**
 * Shannon-rate model on `w_mhz` MHz with normalized PSD cap `power`;
 * `family` is an `SsFamily` value.
 */
enum SsStatus ss_model_new(double w_mhz, double power, uint32_t family, struct SsModel **model);

void ss_model_free(struct SsModel *model);

/**
 * `π(x, λ)`.
 */
enum SsStatus ss_model_pi(const struct SsModel *model, double x_mhz, double lambda, double *value);

/**
 * Per-operator utility when `n` operators all use the whole band.
 */
enum SsStatus ss_model_full_spectrum_utility(const struct SsModel *model,
                                             size_t n,
                                             double lambda,
                                             double *value);

/**
 * Equilibrium market size for investment cost `cost` and two-level traffic.
 */
enum SsStatus ss_max_entrants(const struct SsModel *model,
                              double cost,
                              double p_high,
                              size_t *n_star);

/**
 * Parses scenario-file text.
 */
enum SsStatus ss_scenario_parse(const char *source, struct SsScenario **scenario);

void ss_scenario_free(struct SsScenario *scenario);

enum SsStatus ss_scenario_operators(const struct SsScenario *scenario, size_t *n);

/**
 * Runs all replications of the scenario without deviations.
 */
enum SsStatus ss_simulate(const struct SsScenario *scenario, struct SsReport **report);

void ss_report_free(struct SsReport *report);

/**
 * Mean normalized revenue and its standard error for operator `index` (0-based).
 */
enum SsStatus ss_report_revenue(const struct SsReport *report,
                                size_t index,
                                double *mean,
                                double *std_err);

/**
 * Every one-shot deviation finding for the scenario's scheme.
 */
enum SsStatus ss_verify(const struct SsScenario *scenario, struct SsFindings **findings);

void ss_findings_free(struct SsFindings *findings);

enum SsStatus ss_findings_len(const struct SsFindings *findings, size_t *len);

enum SsStatus ss_findings_profitable(const struct SsFindings *findings, size_t *count);

/**
 * Finding `index`: its state label (owned by the handle), gain, loss and
 * verdict. Any out pointer may be NULL to skip that field.
 */
enum SsStatus ss_findings_get(const struct SsFindings *findings,
                              size_t index,
                              const char **state,
                              double *gain,
                              double *loss,
                              bool *profitable);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SPECSHARE_H */
