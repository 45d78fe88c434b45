#ifndef MQPC_H
#define MQPC_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum MqpcStatus {
  MQPC_STATUS_OK = 0,
  MQPC_STATUS_NULL_POINTER = 1,
  MQPC_STATUS_INVALID_UTF8 = 2,
  MQPC_STATUS_INVALID_ARGUMENT = 3,
  /**
   * The run stopped at a failed security check.
   */
  MQPC_STATUS_ABORTED = 4,
  /**
   * Reference values were not reproduced.
   */
  MQPC_STATUS_MISMATCH = 5,
  MQPC_STATUS_NO_CLOSED_FORM = 6,
  MQPC_STATUS_INTERNAL = 7,
  MQPC_STATUS_PANIC = 8,
} MqpcStatus;

/**
 * Opaque handle to one finished protocol run.
 */
typedef struct MqpcRun MqpcRun;

typedef struct MqpcAttackResult {
  uint64_t trials;
  uint64_t detections;
  double empirical_rate;
  /**
   * Meaningful only when `has_theoretical_rate` is true.
   */
  double theoretical_rate;
  bool has_theoretical_rate;
  double std_error;
} MqpcAttackResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread, or null. The
 * pointer stays valid until the next failing call on the same thread.
 */
const char *mqpc_last_error_message(void);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed already.
 */
void mqpc_string_free(char *s);

/**
 * Runs the protocol from a JSON configuration. An aborted run still yields
 * a handle; query it with [`mqpc_run_is_completed`].
 *
 * # Safety
 * `config_json` must be a nul-terminated string; `out` must be writable.
 */
enum MqpcStatus mqpc_run_new(const char *config_json, struct MqpcRun **out);

/**
 * # Safety
 * `run` must be null or a handle from [`mqpc_run_new`] not yet freed.
 */
void mqpc_run_free(struct MqpcRun *run);

/**
 * # Safety
 * `run` must be a live handle; `out` must be writable.
 */
enum MqpcStatus mqpc_run_is_completed(const struct MqpcRun *run, bool *out);

/**
 * Rendered ordering such as `P4>P1>P2>P3`. Returns `Aborted` for runs that
 * did not complete.
 *
 * # Safety
 * `run` must be a live handle; `out` must be writable.
 */
enum MqpcStatus mqpc_run_announcement(const struct MqpcRun *run, char **out);

/**
 * JSON-lines transcript, one event per line plus a summary record.
 *
 * # Safety
 * `run` must be a live handle; `out` must be writable.
 */
enum MqpcStatus mqpc_run_transcript_jsonl(const struct MqpcRun *run, char **out);

/**
 * Qudit efficiency as an exact fraction.
 *
 * # Safety
 * `run` must be a live handle; `numerator` and `denominator` writable.
 */
enum MqpcStatus mqpc_run_efficiency(const struct MqpcRun *run,
                                    uint64_t *numerator,
                                    uint64_t *denominator);

/**
 * Closed-form detection probability for `intercept_resend` or
 * `measure_resend` over `decoys` decoys.
 *
 * # Safety
 * `model` must be a nul-terminated string; `out` must be writable.
 */
enum MqpcStatus mqpc_detection_probability(const char *model, size_t d, size_t decoys, double *out);

/**
 * Monte Carlo detection experiment.
 *
 * # Safety
 * `model` must be a nul-terminated string; `out` must be writable.
 */
enum MqpcStatus mqpc_attack_experiment(const char *model,
                                       size_t d,
                                       size_t decoys,
                                       uint64_t trials,
                                       uint64_t seed,
                                       struct MqpcAttackResult *out);

/**
 * Runs the pinned four-user example and writes its report. Returns
 * `Mismatch` (with the report still written) if any value differs.
 *
 * # Safety
 * `out` must be writable.
 */
enum MqpcStatus mqpc_demo(char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MQPC_H */
