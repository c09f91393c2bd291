#ifndef LLMDRIFT_H
#define LLMDRIFT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every entry point.
 */
typedef enum LdStatus {
  LD_STATUS_OK = 0,
  LD_STATUS_NULL_ARG = 1,
  LD_STATUS_INVALID_ARG = 2,
  LD_STATUS_IO = 3,
  LD_STATUS_PARSE = 4,
  LD_STATUS_INSUFFICIENT_DATA = 5,
  LD_STATUS_UNKNOWN_FEATURE = 6,
  LD_STATUS_INTERNAL = 99,
} LdStatus;

/**
 * Decision rule for comparisons, passed as its integer value.
 */
typedef enum LdDecision {
  LD_DECISION_PER_FEATURE = 0,
  LD_DECISION_BONFERRONI = 1,
  LD_DECISION_FISHER = 2,
} LdDecision;

/**
 * Report rendering format, passed as its integer value.
 */
typedef enum LdFormat {
  LD_FORMAT_TEXT = 0,
  LD_FORMAT_CSV = 1,
  LD_FORMAT_JSON = 2,
} LdFormat;

/**
 * Opaque corpus handle.
 */
typedef struct LdCorpus LdCorpus;

/**
 * Opaque comparison report handle.
 */
typedef struct LdReport LdReport;

/**
 * Outcome of a two-sample Kolmogorov-Smirnov test.
 */
typedef struct LdKsResult {
  double d_stat;
  double p_value;
  /**
   * −log2 of `p_value`.
   */
  double surprisal;
  bool reject;
  /**
   * The p-value was floored because it underflowed.
   */
  bool underflow;
} LdKsResult;

/**
 * Outcome of Fisher's combination of p-values.
 */
typedef struct LdFisherResult {
  double psi;
  uint32_t dof;
  double p_value;
  double surprisal;
  bool underflow;
} LdFisherResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or an empty string.
 * The pointer stays valid until the next call into the library on this
 * thread and must not be freed.
 */
const char *ld_last_error(void);

/**
 * Releases a string returned by the library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed already.
 */
void ld_string_free(char *s);

/**
 * Two-sample K-S test on raw values. NaN entries are rejected.
 *
 * # Safety
 * `xs`/`ys` must point to `n1`/`n2` readable doubles; `out` must be writable.
 */
enum LdStatus ld_ks_two_sample(const double *xs,
                               size_t n1,
                               const double *ys,
                               size_t n2,
                               double alpha,
                               struct LdKsResult *out);

/**
 * Fisher's method over `k` p-values in (0, 1].
 *
 * # Safety
 * `p_values` must point to `k` readable doubles; `out` must be writable.
 */
enum LdStatus ld_fisher_combine(const double *p_values, size_t k, struct LdFisherResult *out);

/**
 * Chi-square survival function for even degrees of freedom.
 *
 * # Safety
 * `out` must be writable.
 */
enum LdStatus ld_chi2_sf(double x, uint32_t dof, double *out);

/**
 * Loads a JSONL corpus. Items with empty text are an error unless
 * `allow_empty_text` is set.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum LdStatus ld_corpus_load(const char *path, bool allow_empty_text, struct LdCorpus **out);

/**
 * Number of items in a corpus.
 *
 * # Safety
 * `corpus` must be a live handle; `out` must be writable.
 */
enum LdStatus ld_corpus_len(const struct LdCorpus *corpus, size_t *out);

/**
 * Annotates the corpus in place with the comma-separated `features`, or
 * with every built-in feature when `features` is null. Uses the bundled
 * lexicons.
 *
 * # Safety
 * `corpus` must be a live handle; `features` null or NUL-terminated.
 */
enum LdStatus ld_corpus_annotate(struct LdCorpus *corpus, const char *features);

/**
 * Releases a corpus. Null is ignored.
 *
 * # Safety
 * `corpus` must come from `ld_corpus_load` and not have been freed.
 */
void ld_corpus_free(struct LdCorpus *corpus);

/**
 * Compares two annotated corpora over `features` (null for all built-in
 * features) under the given decision rule.
 *
 * # Safety
 * Handles must be live; `features` null or NUL-terminated; `out` writable.
 */
enum LdStatus ld_compare(const struct LdCorpus *a,
                         const struct LdCorpus *b,
                         double alpha,
                         const char *features,
                         int32_t decision,
                         struct LdReport **out);

/**
 * Compares two random halves of one annotated corpus; a healthy source
 * should come out unchanged.
 *
 * # Safety
 * `corpus` must be live; `features` null or NUL-terminated; `out` writable.
 */
enum LdStatus ld_split_check(const struct LdCorpus *corpus,
                             double alpha,
                             const char *features,
                             int32_t decision,
                             uint64_t seed,
                             struct LdReport **out);

/**
 * Writes true to `changed` when the report's decision rule rejected.
 *
 * # Safety
 * `report` must be live; `changed` writable.
 */
enum LdStatus ld_report_changed(const struct LdReport *report, bool *changed);

/**
 * Renders a report. The string must be released with `ld_string_free`.
 *
 * # Safety
 * `report` must be live; `out` writable.
 */
enum LdStatus ld_report_render(const struct LdReport *report, int32_t format, char **out);

/**
 * Releases a report. Null is ignored.
 *
 * # Safety
 * `report` must come from this library and not have been freed.
 */
void ld_report_free(struct LdReport *report);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LLMDRIFT_H */
