#ifndef QUEUEKIT_H
#define QUEUEKIT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum QkStatus {
  QK_STATUS_OK = 0,
  QK_STATUS_NULL_POINTER = 1,
  QK_STATUS_INVALID_ARGUMENT = 2,
  QK_STATUS_UNSTABLE = 3,
  QK_STATUS_NOT_ERGODIC = 4,
  QK_STATUS_NUMERICAL = 5,
  QK_STATUS_PARSE = 6,
  QK_STATUS_SCHEMA = 7,
  QK_STATUS_UNSUPPORTED = 8,
  QK_STATUS_IO = 9,
  QK_STATUS_PANIC = 10,
} QkStatus;

typedef enum QkQueueKind {
  QK_QUEUE_KIND_MM1 = 0,
  QK_QUEUE_KIND_MM_INF = 1,
  QK_QUEUE_KIND_MM_M = 2,
  QK_QUEUE_KIND_MM_MM = 3,
  QK_QUEUE_KIND_MG1 = 4,
} QkQueueKind;

typedef enum QkPolicy {
  QK_POLICY_EXHAUSTIVE = 0,
  QK_POLICY_GATED = 1,
} QkPolicy;

typedef enum QkMode {
  QK_MODE_ANALYZE = 0,
  QK_MODE_SIMULATE = 1,
  QK_MODE_VALIDATE = 2,
} QkMode;

/**
 * Opaque validated model file.
 */
typedef struct QkModel QkModel;

/**
 * Opaque cyclic polling system.
 */
typedef struct QkPolling QkPolling;

/**
 * Opaque single-station queue model.
 */
typedef struct QkQueue QkQueue;

/**
 * Stationary metrics; fields that do not apply to the model are NaN.
 */
typedef struct QkMetrics {
  double rho;
  double u;
  double l;
  double lq;
  double ls;
  double w;
  double wq;
  double ws;
  double pi0;
  double effective_arrival;
  double blocking;
  double delay_prob;
  double var_n;
} QkMetrics;

/**
 * Point estimate with its 95% half-width.
 */
typedef struct QkEstimate {
  double point;
  double half_width;
} QkEstimate;

typedef struct QkQueueEstimates {
  struct QkEstimate l;
  struct QkEstimate lq;
  struct QkEstimate w;
  struct QkEstimate wq;
  struct QkEstimate pi0;
  struct QkEstimate throughput;
} QkQueueEstimates;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null.
 *
 * The pointer stays valid until the next queuekit call on this thread.
 */
const char *qk_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *qk_version(void);

/**
 * Creates a queue model. `m` is used by the multi-server kinds, `es` and
 * `es2` (service-time moments) by M/G/1, `delta` by the rest.
 */
enum QkStatus qk_queue_new(enum QkQueueKind kind,
                           double beta,
                           double delta,
                           size_t m,
                           double es,
                           double es2,
                           struct QkQueue **out_queue);

/**
 * Stationary metrics. Fails with `QK_STATUS_UNSTABLE` when the load is at
 * or above capacity.
 */
enum QkStatus qk_queue_metrics(const struct QkQueue *queue, struct QkMetrics *out_metrics);

/**
 * `P(W <= t)` and `P(Wq <= t)` for M/M/1 and M/M/m.
 */
enum QkStatus qk_queue_waiting_cdf(const struct QkQueue *queue,
                                   double t,
                                   double *out_w,
                                   double *out_wq);

/**
 * Simulates `horizon` departures (warmup 20%, 32 batches) from `seed`.
 */
enum QkStatus qk_queue_simulate(const struct QkQueue *queue,
                                uint64_t seed,
                                uint64_t horizon,
                                struct QkQueueEstimates *out_estimates);

/**
 * Releases a queue; null is ignored.
 */
void qk_queue_free(struct QkQueue *queue);

/**
 * Erlang loss probability `B(m, rho)`.
 */
enum QkStatus qk_erlang_b(size_t m, double rho, double *out_value);

/**
 * Erlang delay probability `C(m, rho)`; requires `rho < m`.
 */
enum QkStatus qk_erlang_c(size_t m, double rho, double *out_value);

/**
 * Creates a cyclic polling system of `n` queues from per-queue arrival
 * rates and first/second moments of service and switchover times.
 */
enum QkStatus qk_polling_new(size_t n,
                             const double *lambda,
                             const double *b1,
                             const double *b2,
                             const double *s1,
                             const double *s2,
                             struct QkPolling **out_polling);

/**
 * Mean waits into `out_waits`, which must hold `len` = number of queues.
 */
enum QkStatus qk_polling_waits(const struct QkPolling *polling,
                               enum QkPolicy discipline,
                               double *out_waits,
                               size_t len);

/**
 * Pseudo-conservation residual of the analytic waits.
 */
enum QkStatus qk_polling_pcl_residual(const struct QkPolling *polling,
                                      enum QkPolicy discipline,
                                      double *out_residual);

void qk_polling_free(struct QkPolling *polling);

/**
 * Parses and validates a JSON model file held in `json`.
 */
enum QkStatus qk_model_parse(const char *json, struct QkModel **out_model);

/**
 * Runs a model file and returns the canonical JSON report in `out_report`
 * (free with [`qk_string_free`]) and the CLI exit code in `out_exit`.
 * `horizon == 0` and `tolerance <= 0` select the file or built-in defaults.
 */
enum QkStatus qk_model_run(const struct QkModel *model,
                           enum QkMode mode,
                           uint64_t seed,
                           uint64_t horizon,
                           double tolerance,
                           char **out_report,
                           int32_t *out_exit);

void qk_model_free(struct QkModel *model);

/**
 * Releases a string returned by this library; null is ignored.
 */
void qk_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QUEUEKIT_H */
