#ifndef LADDER_C_H
#define LADDER_C_H

/*
 * C interface of the ladder spectral library.
 *
 * Every function returns a status code. On failure the message (and, for
 * configuration errors, the offending field) is available from
 * ladder_last_error() / ladder_last_error_field() on the calling thread.
 * Strings returned by a run stay valid until ladder_run_free().
 */

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define LADDER_API __declspec(dllexport)
#else
#define LADDER_API __attribute__((visibility("default")))
#endif

#define LADDER_OK 0
#define LADDER_ERR_ARGUMENT 1
#define LADDER_ERR_CONFIG 2
#define LADDER_ERR_NUMERICAL 3
#define LADDER_ERR_INTERNAL 4

typedef struct ladder_run ladder_run;

LADDER_API const char* ladder_version(void);
LADDER_API int ladder_schema_version(void);

LADDER_API const char* ladder_last_error(void);
LADDER_API const char* ladder_last_error_field(void);

/* Validates a JSON configuration and writes the fully resolved form into a
 * new run handle (available through ladder_run_report). Nothing is computed. */
LADDER_API int ladder_config_resolve(const char* config_json, ladder_run** out);

/* Validates and executes a configuration. */
LADDER_API int ladder_run_config(const char* config_json, ladder_run** out);

LADDER_API const char* ladder_run_csv(const ladder_run* run);
LADDER_API const char* ladder_run_report(const ladder_run* run);
/* 1 or 0 for convergence studies, -1 when the command has no verdict. */
LADDER_API int ladder_run_passed(const ladder_run* run);
LADDER_API size_t ladder_run_attachment_count(const ladder_run* run);
LADDER_API const char* ladder_run_attachment_name(const ladder_run* run, size_t index);
LADDER_API const char* ladder_run_attachment_data(const ladder_run* run, size_t index);
LADDER_API void ladder_run_free(ladder_run* run);

/* Closed-form graph quantities. `L` accepts "2", "1/2", "10pi/7";
 * `cls` accepts "sym" or "antisym". */
LADDER_API int ladder_graph_g(double omega, const char* L, const char* cls, double* out);
LADDER_API int ladder_graph_reflection_root(double omega, const char* L, const char* cls,
                                            double* out);
/* Defect eigenvalues (omega) of all gaps below omega_max. Writes at most
 * `capacity` values and the total count into *count. */
LADDER_API int ladder_graph_eigenvalues(const char* L, double mu, const char* cls,
                                        double omega_max, double* out, size_t capacity,
                                        size_t* count);

#ifdef __cplusplus
}
#endif

#endif
