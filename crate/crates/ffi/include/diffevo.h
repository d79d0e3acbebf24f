#ifndef DIFFEVO_H
#define DIFFEVO_H

#include <stddef.h>
#include <stdint.h>

typedef enum DiffevoArch {
  // 4-8-2, 58 parameters.
  DIFFEVO_ARCH_SMALL = 0,
  // 4-128-128-2, 17410 parameters.
  DIFFEVO_ARCH_DEEP = 1,
} DiffevoArch;

typedef enum DiffevoBenchmark {
  DIFFEVO_BENCHMARK_ROSENBROCK = 0,
  DIFFEVO_BENCHMARK_BEALE = 1,
  DIFFEVO_BENCHMARK_HIMMELBLAU = 2,
  DIFFEVO_BENCHMARK_ACKLEY = 3,
  DIFFEVO_BENCHMARK_RASTRIGIN = 4,
} DiffevoBenchmark;

typedef enum DiffevoScheduleKind {
  DIFFEVO_SCHEDULE_KIND_LINEAR = 0,
  DIFFEVO_SCHEDULE_KIND_COSINE = 1,
  DIFFEVO_SCHEDULE_KIND_DDPM = 2,
} DiffevoScheduleKind;

typedef enum DiffevoStatus {
  DIFFEVO_STATUS_OK = 0,
  DIFFEVO_STATUS_NULL_POINTER = 1,
  DIFFEVO_STATUS_INVALID_ARGUMENT = 2,
  DIFFEVO_STATUS_DOMAIN = 3,
  DIFFEVO_STATUS_DEGENERATE_WEIGHTS = 4,
  DIFFEVO_STATUS_EVALUATION = 5,
  DIFFEVO_STATUS_IO = 6,
  DIFFEVO_STATUS_PANIC = 7,
} DiffevoStatus;

// Opaque rescaled benchmark landscape.
typedef struct DiffevoLandscape DiffevoLandscape;

// Opaque finished evolution run.
typedef struct DiffevoRun DiffevoRun;

// Opaque α/σ schedule.
typedef struct DiffevoSchedule DiffevoSchedule;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *diffevo_version(void);

// Description of the last failure on this thread; empty after a success. The pointer stays
// valid until the next diffevo call on the same thread.
const char *diffevo_last_error(void);

enum DiffevoStatus diffevo_schedule_new(enum DiffevoScheduleKind kind,
                                        size_t steps,
                                        double sigma_scale,
                                        double clamp_eps,
                                        struct DiffevoSchedule **out_schedule);

void diffevo_schedule_free(struct DiffevoSchedule *schedule);

// α_t for `t` in `0..=T`.
enum DiffevoStatus diffevo_schedule_alpha(const struct DiffevoSchedule *schedule,
                                          size_t t,
                                          double *out_alpha);

// σ_t for `t` in `1..=T`.
enum DiffevoStatus diffevo_schedule_sigma(const struct DiffevoSchedule *schedule,
                                          size_t t,
                                          double *out_sigma);

// Step count T; 0 for a NULL handle.
size_t diffevo_schedule_steps(const struct DiffevoSchedule *schedule);

// Benchmark with its default objective and default rescaling options.
enum DiffevoStatus diffevo_landscape_new(enum DiffevoBenchmark benchmark,
                                         struct DiffevoLandscape **out_landscape);

void diffevo_landscape_free(struct DiffevoLandscape *landscape);

// Raw value and rescaled fitness at `(x, y)`; either out pointer may be NULL.
enum DiffevoStatus diffevo_landscape_eval(const struct DiffevoLandscape *landscape,
                                          double x,
                                          double y,
                                          double *out_raw,
                                          double *out_fitness);

// Target value f* and scale s of the rescaling.
enum DiffevoStatus diffevo_landscape_scale(const struct DiffevoLandscape *landscape,
                                           double *out_f_star,
                                           double *out_scale);

// Origin estimate of `x_t` (length `dim`) from `n` members (`n × dim`) with density weights
// `weights` (length `n`), written to `out_x0` (length `dim`).
enum DiffevoStatus diffevo_estimate_origin(const double *x_t,
                                           const double *members,
                                           const double *weights,
                                           size_t n,
                                           size_t dim,
                                           double alpha_t,
                                           double *out_x0);

// One cart-pole episode (500-step cap) of the MLP policy `params` (58 or 17410 values).
enum DiffevoStatus diffevo_cartpole_rollout(enum DiffevoArch arch,
                                            const double *params,
                                            size_t len,
                                            uint64_t episode_seed,
                                            uint32_t *out_reward);

// Diffusion Evolution on a benchmark landscape with density `F^power` (`power` = 1 is the
// identity map).
enum DiffevoStatus diffevo_run_benchmark(const struct DiffevoLandscape *landscape,
                                         const struct DiffevoSchedule *schedule,
                                         size_t population,
                                         uint64_t seed,
                                         double power,
                                         struct DiffevoRun **out_run);

void diffevo_run_free(struct DiffevoRun *run);

// Population size N, dimension D and fitness evaluations spent.
enum DiffevoStatus diffevo_run_shape(const struct DiffevoRun *run,
                                     size_t *out_n,
                                     size_t *out_dim,
                                     size_t *out_evaluations);

// Copies the final population (`N × D`, row-major) into `buffer` of length `len`.
enum DiffevoStatus diffevo_run_population(const struct DiffevoRun *run, double *buffer, size_t len);

// Mean fitness of the top-`k` elites and their grid entropy (80×80 cells on (-4, 4)²).
enum DiffevoStatus diffevo_run_elite_stats(const struct DiffevoRun *run,
                                           const struct DiffevoLandscape *landscape,
                                           size_t k,
                                           double *out_mean_fitness,
                                           double *out_entropy_bits);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DIFFEVO_H */
