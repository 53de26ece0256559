#ifndef HMFLOW_H
#define HMFLOW_H

/* Generated by cbindgen from crates/ffi; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum HmStatus {
  HM_STATUS_OK = 0,
  HM_STATUS_NULL_POINTER = 1,
  HM_STATUS_INVALID_ARGUMENT = 2,
  HM_STATUS_OUT_OF_RANGE = 3,
  HM_STATUS_NON_UNIQUE_GEODESIC = 4,
  HM_STATUS_OUTSIDE_TUBE = 5,
  HM_STATUS_INVALID_BODY = 6,
  HM_STATUS_SOLVER_FAILURE = 7,
  HM_STATUS_SCENARIO = 8,
  HM_STATUS_IO = 9,
  HM_STATUS_UNSUPPORTED = 10,
  HM_STATUS_PANIC = 11,
} HmStatus;

typedef struct HmBody HmBody;

typedef struct HmBodyBuilder HmBodyBuilder;

typedef struct HmManifold HmManifold;

typedef struct HmScenario HmScenario;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread; empty after a success.
 * The pointer stays valid until the next call on the same thread.
 */
const char *hm_last_error_message(void);

enum HmStatus hm_manifold_flat(size_t dim, struct HmManifold **out);

enum HmStatus hm_manifold_sphere2(struct HmManifold **out);

enum HmStatus hm_manifold_poincare(struct HmManifold **out);

void hm_manifold_free(struct HmManifold *m);

/**
 * Length of the coordinate arrays for points and tangents; 0 for null.
 */
size_t hm_manifold_ambient_dim(const struct HmManifold *m);

enum HmStatus hm_exp(const struct HmManifold *m, const double *p, const double *v, double *out);

enum HmStatus hm_log(const struct HmManifold *m, const double *p, const double *q, double *out);

enum HmStatus hm_dist(const struct HmManifold *m, const double *p, const double *q, double *out);

/**
 * `μ(w, t)` for the unit tangent `w` at `y`.
 */
enum HmStatus hm_mu(const struct HmManifold *m,
                    const double *y,
                    const double *w,
                    double t,
                    double *out);

enum HmStatus hm_body_builder_new(const struct HmManifold *m, struct HmBodyBuilder **out);

enum HmStatus hm_body_builder_add_ball(struct HmBodyBuilder *b,
                                       const double *center,
                                       double radius);

/**
 * Adds `{x : <normal, x> <= offset}` (flat targets only).
 */
enum HmStatus hm_body_builder_add_half_space(struct HmBodyBuilder *b,
                                             const double *normal,
                                             double offset);

/**
 * Validates the accumulated constraints with tube width `epsilon`. The
 * builder is left intact.
 */
enum HmStatus hm_body_builder_build(const struct HmBodyBuilder *b,
                                    double epsilon,
                                    struct HmBody **out);

void hm_body_builder_free(struct HmBodyBuilder *b);

void hm_body_free(struct HmBody *b);

enum HmStatus hm_body_contains(const struct HmBody *b, const double *p, bool *out);

enum HmStatus hm_body_distance(const struct HmBody *b, const double *p, double *out);

enum HmStatus hm_body_project(const struct HmBody *b, const double *p, double *out);

/**
 * Parses scenario text (UTF-8, NUL-terminated).
 */
enum HmStatus hm_scenario_parse(const char *text,
                                bool override_convexity_check,
                                struct HmScenario **out);

void hm_scenario_free(struct HmScenario *s);

/**
 * Runs a scenario. Reports are written to `out_dir` unless it is null.
 * `exit_code` receives the command-line exit status of the run (0 when all
 * checks pass).
 */
enum HmStatus hm_scenario_run(const struct HmScenario *s, const char *out_dir, int32_t *exit_code);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HMFLOW_H */
