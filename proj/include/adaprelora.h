/* C interface to the adaprelora shared library: opaque handles plus status
 * codes. All matrix buffers are double precision, column-major. */

#ifndef ADAPRELORA_H
#define ADAPRELORA_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define APL_API __declspec(dllexport)
#else
#define APL_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum apl_status {
  APL_OK = 0,
  APL_ERROR_DIMENSION = 1,
  APL_ERROR_INVALID_VALUE = 2,
  APL_ERROR_SINGULAR = 3,
  APL_ERROR_CONFIG = 4,
  APL_ERROR_IO = 5,
  APL_ERROR_VERIFY_FAILED = 6,
  APL_ERROR_NULL_ARGUMENT = 7,
  APL_ERROR_UNKNOWN = 8
} apl_status;

typedef enum apl_optimizer_kind {
  APL_OPT_ADAPRELORA_SGD = 0,
  APL_OPT_ADAPRELORA_MOMENTUM = 1,
  APL_OPT_FACTOR_SGD = 2,
  APL_OPT_SCALED_GD = 3,
  APL_OPT_IDENTITY_PROJECTED = 4
} apl_optimizer_kind;

typedef enum apl_momentum_mode {
  APL_MOMENTUM_NONE = 0,
  APL_MOMENTUM_W_SPACE = 1,
  APL_MOMENTUM_FACTOR_SPACE = 2
} apl_momentum_mode;

typedef enum apl_gradient_source {
  APL_GRADIENT_EXACT = 0,
  APL_GRADIENT_SURROGATE = 1
} apl_gradient_source;

typedef enum apl_problem_kind {
  APL_PROBLEM_RECOVERY = 0,
  APL_PROBLEM_SENSING = 1
} apl_problem_kind;

typedef struct apl_optimizer_config {
  double learning_rate;
  double weight_decay;
  double decay_row;
  double decay_col;
  double momentum_decay;
  double eps;
  int momentum_mode;   /* apl_momentum_mode */
  int gradient_source; /* apl_gradient_source */
} apl_optimizer_config;

APL_API const char *apl_version(void);
APL_API const char *apl_status_message(apl_status status);
APL_API void apl_optimizer_config_defaults(apl_optimizer_config *config);

/* ---- optimizer sessions (one per layer; steps strictly sequential) ---- */

typedef struct apl_optimizer apl_optimizer;

APL_API apl_status apl_optimizer_create(apl_optimizer_kind kind, int64_t m, int64_t n, int64_t r,
                                        const apl_optimizer_config *config, uint64_t init_seed,
                                        apl_optimizer **out);
APL_API void apl_optimizer_destroy(apl_optimizer *optimizer);
APL_API apl_status apl_optimizer_step(apl_optimizer *optimizer,
                                      const double *grad /* m*n, column-major */);
APL_API apl_status apl_optimizer_get_factors(const apl_optimizer *optimizer,
                                             double *b /* m*r */, double *a /* r*n */);
APL_API apl_status apl_optimizer_state_scalars(const apl_optimizer *optimizer, int64_t *count);

/* ---- benchmark problems ---- */

typedef struct apl_problem apl_problem;

APL_API apl_status apl_problem_create(apl_problem_kind kind, int64_t m, int64_t n,
                                      int64_t planted_rank, double condition_number,
                                      uint64_t seed, apl_problem **out);
APL_API void apl_problem_destroy(apl_problem *problem);
APL_API apl_status apl_problem_eval(const apl_problem *problem, int64_t r,
                                    const double *b /* m*r */, const double *a /* r*n */,
                                    double *loss, double *grad /* m*n, may be NULL */);

/* ---- one-shot balance-optimal update kernel ---- */

APL_API apl_status apl_closed_form_update(int64_t m, int64_t n, int64_t r, double eps,
                                          const double *b, const double *a, const double *grad,
                                          const double *l_half /* m, NULL = identity */,
                                          const double *r_half /* n, NULL = identity */,
                                          double *delta_b /* m*r */, double *delta_a /* r*n */);

/* ---- drivers ---- */

typedef void (*apl_log_fn)(const char *line, void *user);

/* Runs the benchmark grid described by the config file and writes CSVs into
 * out_dir. `log` (optional) receives the summary table line by line. On
 * config errors the message (with line number) is copied into errbuf. */
APL_API apl_status apl_run_config(const char *config_path, const char *out_dir, int threads,
                                  apl_log_fn log, void *user, char *errbuf, size_t errbuf_len);

/* Runs the property verification suites (full != 0 means 200 seeds per
 * property, else 20) and reports one line per property through `log`.
 * Returns APL_OK only if every property passes. */
APL_API apl_status apl_verify(int full, apl_log_fn log, void *user);

#ifdef __cplusplus
}
#endif

#endif /* ADAPRELORA_H */
