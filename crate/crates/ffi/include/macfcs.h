#ifndef MACFCS_H
#define MACFCS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Selects decode-forward in [`macfcs_optimize`].
 */
#define MACFCS_STRATEGY_DF 0

/**
 * Selects compress-forward in [`macfcs_optimize`].
 */
#define MACFCS_STRATEGY_CF 1

typedef enum MacfcsStatus {
  MACFCS_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  MACFCS_STATUS_NULL_ARG = 1,
  /**
   * A string argument was not valid UTF-8.
   */
  MACFCS_STATUS_UTF8 = 2,
  /**
   * A JSON document could not be parsed.
   */
  MACFCS_STATUS_PARSE = 3,
  /**
   * Input was well-formed but violated a model constraint.
   */
  MACFCS_STATUS_VALIDATION = 4,
  /**
   * An internal panic was caught at the boundary.
   */
  MACFCS_STATUS_PANIC = 5,
} MacfcsStatus;

/**
 * Three-node channel law.
 */
typedef struct MacfcsChannel MacfcsChannel;

/**
 * Feasibility report of one candidate.
 */
typedef struct MacfcsReport MacfcsReport;

/**
 * Correlated source pair.
 */
typedef struct MacfcsSource MacfcsSource;

/**
 * Entropy statistics of a source pair, in bits.
 */
typedef struct MacfcsSourceStats {
  double h_s1;
  double h_s2;
  double h_s1_given_s2;
  double h_s2_given_s1;
  double h_joint;
  double i_s1_s2;
} MacfcsSourceStats;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the last failure on this thread, or an empty string.
 * The pointer stays valid until the next call into this library on the
 * same thread.
 */
const char *macfcs_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *macfcs_version(void);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must be null or a pointer returned by this library and not yet freed.
 */
void macfcs_string_free(char *s);

/**
 * Parses a channel document into a new handle.
 *
 * # Safety
 * `json` must be a valid NUL-terminated string and `out` a valid pointer.
 */
enum MacfcsStatus macfcs_channel_from_json(const char *json, struct MacfcsChannel **out);

/**
 * # Safety
 * `ch` must be null or a handle from [`macfcs_channel_from_json`] not yet freed.
 */
void macfcs_channel_free(struct MacfcsChannel *ch);

/**
 * Sum capacity of the destination link over cooperative inputs, in bits.
 *
 * # Safety
 * `ch` must be a live channel handle and `out` a valid pointer.
 */
enum MacfcsStatus macfcs_mac_sum_capacity(const struct MacfcsChannel *ch, double *out);

/**
 * Parses a source document into a new handle.
 *
 * # Safety
 * `json` must be a valid NUL-terminated string and `out` a valid pointer.
 */
enum MacfcsStatus macfcs_source_from_json(const char *json, struct MacfcsSource **out);

/**
 * # Safety
 * `src` must be null or a handle from [`macfcs_source_from_json`] not yet freed.
 */
void macfcs_source_free(struct MacfcsSource *src);

/**
 * # Safety
 * `src` must be a live source handle and `out` a valid pointer.
 */
enum MacfcsStatus macfcs_source_stats(const struct MacfcsSource *src,
                                      struct MacfcsSourceStats *out);

/**
 * Evaluates the decode-forward conditions for a candidate document.
 *
 * # Safety
 * `ch` and `src` must be live handles, `candidate` a valid NUL-terminated
 * string and `out` a valid pointer.
 */
enum MacfcsStatus macfcs_check_df(const struct MacfcsChannel *ch,
                                  const struct MacfcsSource *src,
                                  const char *candidate,
                                  struct MacfcsReport **out);

/**
 * Evaluates the compress-forward conditions for a candidate document.
 *
 * # Safety
 * Same contract as [`macfcs_check_df`].
 */
enum MacfcsStatus macfcs_check_cf(const struct MacfcsChannel *ch,
                                  const struct MacfcsSource *src,
                                  const char *candidate,
                                  struct MacfcsReport **out);

/**
 * # Safety
 * `report` must be null or a handle from a `macfcs_check_*` call not yet freed.
 */
void macfcs_report_free(struct MacfcsReport *report);

/**
 * 1 if every constraint holds (and independence, for compress-forward), else 0.
 * Returns -1 for a null handle.
 *
 * # Safety
 * `report` must be null or a live report handle.
 */
int macfcs_report_feasible(const struct MacfcsReport *report);

/**
 * Smallest margin over non-vacuous constraints; +infinity when all are vacuous.
 *
 * # Safety
 * `report` must be a live report handle and `out` a valid pointer.
 */
enum MacfcsStatus macfcs_report_min_margin(const struct MacfcsReport *report, double *out);

/**
 * Margin of the constraint with the given label (e.g. "1a").
 *
 * # Safety
 * `report` must be a live report handle, `label` a valid NUL-terminated
 * string and `out` a valid pointer.
 */
enum MacfcsStatus macfcs_report_margin(const struct MacfcsReport *report,
                                       const char *label,
                                       double *out);

/**
 * Report as a JSON string; release with [`macfcs_string_free`].
 *
 * # Safety
 * `report` must be a live report handle and `out` a valid pointer.
 */
enum MacfcsStatus macfcs_report_to_json(const struct MacfcsReport *report, char **out);

/**
 * Searches auxiliary distributions. `config_json` may be null for defaults;
 * otherwise it is a search configuration object (`restarts`, `seed`,
 * `cards`, ...). Writes the result JSON to `out_json` and 1 or 0 to
 * `out_feasible`.
 *
 * # Safety
 * `ch` and `src` must be live handles, `config_json` null or a valid
 * NUL-terminated string, and both out pointers valid.
 */
enum MacfcsStatus macfcs_optimize(const struct MacfcsChannel *ch,
                                  const struct MacfcsSource *src,
                                  int strategy,
                                  const char *config_json,
                                  int *out_feasible,
                                  char **out_json);

/**
 * Decides a linear rate system by Fourier-Motzkin elimination. Writes 1 or 0
 * to `out_feasible` and the verdict JSON (with witness) to `out_json`.
 *
 * # Safety
 * `system_json` must be a valid NUL-terminated string and both out pointers valid.
 */
enum MacfcsStatus macfcs_system_feasible(const char *system_json,
                                         int *out_feasible,
                                         char **out_json);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MACFCS_H */
