#ifndef ADIAFACTOR_H
#define ADIAFACTOR_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes; the numeric values match the command-line exit codes.
 */
typedef enum AfStatus {
  AfStatus_Ok = 0,
  AfStatus_Internal = 1,
  AfStatus_NoSplitConsistent = 2,
  AfStatus_EvolutionFailed = 3,
  AfStatus_InvalidInput = 4,
  AfStatus_NullArgument = 5,
} AfStatus;

typedef enum AfMode {
  AfMode_Transverse = 0,
  AfMode_PaperCompat = 1,
} AfMode;

typedef enum AfEncoding {
  AfEncoding_Substitution = 0,
  AfEncoding_PaperCompat = 1,
  AfEncoding_Columns = 2,
  AfEncoding_Product = 3,
} AfEncoding;

/**
 * Opaque run configuration.
 */
typedef struct AfConfig AfConfig;

/**
 * Opaque factoring report.
 */
typedef struct AfReport AfReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *af_last_error_message(void);

/**
 * New configuration with transverse mode, substitution encoding, automatic
 * schedule, J = 2π·10⁶ rad/s, 8192 shots and seed 0.
 */
struct AfConfig *af_config_new(uint64_t n);

/**
 * # Safety
 * `config` must be NULL or a pointer returned by [`af_config_new`] that has
 * not been freed.
 */
void af_config_free(struct AfConfig *config);

/**
 * # Safety
 * `config` must be a live configuration handle.
 */
enum AfStatus af_config_set_mode(struct AfConfig *config, enum AfMode mode);

/**
 * # Safety
 * `config` must be a live configuration handle.
 */
enum AfStatus af_config_set_encoding(struct AfConfig *config, enum AfEncoding encoding);

/**
 * Total time in microseconds and number of steps; 0 selects the automatic
 * value.
 *
 * # Safety
 * `config` must be a live configuration handle.
 */
enum AfStatus af_config_set_schedule(struct AfConfig *config, double time_us, uint64_t steps);

/**
 * # Safety
 * `config` must be a live configuration handle.
 */
enum AfStatus af_config_set_coupling(struct AfConfig *config, double coupling_j);

/**
 * # Safety
 * `config` must be a live configuration handle.
 */
enum AfStatus af_config_set_shots(struct AfConfig *config, uint64_t shots);

/**
 * # Safety
 * `config` must be a live configuration handle.
 */
enum AfStatus af_config_set_seed(struct AfConfig *config, uint64_t seed);

/**
 * Runs the pipeline. On success `*out` receives a report to be released
 * with [`af_report_free`]; otherwise `*out` is set to NULL.
 *
 * # Safety
 * `config` must be a live configuration handle and `out` a valid pointer.
 */
enum AfStatus af_factor(const struct AfConfig *config, struct AfReport **out);

/**
 * Writes the factors, `p <= q`.
 *
 * # Safety
 * `report` must be a live report handle; `p` and `q` valid pointers.
 */
enum AfStatus af_report_factors(const struct AfReport *report, uint64_t *p, uint64_t *q);

/**
 * Report as JSON; release with [`af_string_free`]. NULL on failure.
 *
 * # Safety
 * `report` must be a live report handle.
 */
char *af_report_json(const struct AfReport *report);

/**
 * # Safety
 * `s` must be NULL or a string returned by this library.
 */
void af_string_free(char *s);

/**
 * # Safety
 * `report` must be NULL or a report handle that has not been freed.
 */
void af_report_free(struct AfReport *report);

/**
 * Library version as a static NUL-terminated string.
 */
const char *af_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ADIAFACTOR_H */
