/*
 * bulkdiff -- C interface to the bulk-diffusion toolkit.
 *
 * The core is C++; this header is the stable surface of the shared library.
 * All entry points return bd_status (0 on success) and never throw; the last
 * failure message for the calling thread is available via bd_last_error().
 * Strings returned through char** are heap-allocated; release them with
 * bd_string_free(). Point buffers returned through double** are released
 * with bd_free().
 */
#ifndef BULKDIFF_H
#define BULKDIFF_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum bd_status {
    BD_OK = 0,
    BD_ERR_INVALID = 2,      /* configuration or argument validation failed */
    BD_ERR_NUMERIC = 3,      /* solver or estimator failure */
    BD_ERR_CHECK_FAILED = 4, /* self-check battery reported failures */
    BD_ERR_UNKNOWN = 5
} bd_status;

const char* bd_version(void);
const char* bd_last_error(void);

/* -------- coefficient models -------- */

typedef struct bd_model bd_model;

/* kind: "identity" | "count-indicator" | "smooth-count" | "anisotropic-count" */
bd_status bd_model_create(const char* kind, double lambda, int threshold,
                          double smoothing, bd_model** out);
void bd_model_destroy(bd_model* model);

/* a(mu, x) for a flat point list (npts rows of d coordinates);
 * out_matrix receives d*d entries, row-major */
bd_status bd_model_eval(const bd_model* model, int d, int torus, double side,
                        const double* pts, size_t npts, const double* x,
                        double* out_matrix);

/* -------- sampling -------- */

/* Poisson sample on a box or torus; palm != 0 adds an atom at the origin.
 * *out_pts receives count*d doubles (caller frees with bd_free). */
bd_status bd_sample_poisson(int d, int torus, double side, double rho,
                            uint64_t seed, uint64_t stream, int palm,
                            double** out_pts, size_t* out_count);
void bd_free(void* p);

/* -------- cell problems -------- */

/* spec_json fields: kind ("nu" | "nu-star" | "resolvent"), dimension, m,
 * rho, direction (array), samples, seed, lambda, max_points, model {kind,
 * lambda, threshold, smoothing}, basis {spacing, radii, thresholds,
 * interactions}. The result is the solution serialized as JSON. */
bd_status bd_solve_cell(const char* spec_json, char** out_json);

/* Gaussian transition density with matrix abar (d*d row-major). */
bd_status bd_heat_kernel_density(const double* abar, int d, double t,
                                 const double* x, double* out_density);

/* -------- experiment commands -------- */

/* command: "abar" | "two-point" | "green-kubo" | "selftest".
 * config_path_or_json: path to a JSON config, or inline JSON (ignored by
 * selftest; may be NULL then). output_dir overrides the configured directory
 * when non-empty. workers <= 0, seed_override < 0 and NaN alpha_override mean
 * "keep the configured value". out_log (optional) receives the run log. */
bd_status bd_run(const char* command, const char* config_path_or_json,
                 const char* output_dir, int workers, int64_t seed_override,
                 double alpha_override, char** out_log);

void bd_string_free(char* s);

#ifdef __cplusplus
}
#endif

#endif /* BULKDIFF_H */
