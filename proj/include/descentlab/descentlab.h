/* descentlab C interface. All handles are opaque; every call returns a
 * dl_status and dl_last_error() describes the most recent failure on the
 * calling thread. Strings handed out by the library are freed with
 * dl_string_free. */
#ifndef DESCENTLAB_H
#define DESCENTLAB_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(__GNUC__)
#define DL_API __attribute__((visibility("default")))
#else
#define DL_API
#endif

typedef enum dl_status {
  DL_OK = 0,
  DL_ERR_INVALID_ARGUMENT = 1,
  DL_ERR_HYPOTHESIS = 2,
  DL_ERR_DIVERGENCE = 3,
  DL_ERR_NOT_CONVERGED = 4,
  DL_ERR_CONFIG = 5,
  DL_ERR_IO = 6,
  DL_ERR_VERDICT_FAILED = 7,
  DL_ERR_INTERNAL = 8
} dl_status;

DL_API const char* dl_version(void);
DL_API const char* dl_status_name(dl_status status);
/* Message of the last failing call on this thread ("" when none). */
DL_API const char* dl_last_error(void);
DL_API void dl_string_free(char* s);

/* --- problems ---------------------------------------------------------- */

typedef struct dl_problem dl_problem;

/* Catalogue fixture (or $DESCENTLAB_FIXTURES/<name>.json). */
DL_API dl_status dl_problem_fixture(const char* name, dl_problem** out);
/* Least squares from row-major features (n x d) and targets (n). */
DL_API dl_status dl_problem_least_squares(const double* features, const double* targets, size_t n, size_t d,
                                          dl_problem** out);
/* Attaches "l1" (param = lambda) or "ball" (param = radius) and solves for the composite minimizer. */
DL_API dl_status dl_problem_set_regularizer(dl_problem* problem, const char* kind, double param);
DL_API void dl_problem_free(dl_problem* problem);

DL_API dl_status dl_problem_size(const dl_problem* problem, size_t* n, size_t* d);
/* Named constant: L, L_max, L_avg, mu, mu_pl, sigma_star_f, delta_star_f, G, B,
 * inf_f, inf_F, sigma_star_F. Absent constants fail with DL_ERR_INVALID_ARGUMENT. */
DL_API dl_status dl_problem_constant(const dl_problem* problem, const char* name, double* out);
/* Minimizer of f, or of F = f + g when a regularizer is attached. */
DL_API dl_status dl_problem_minimizer(const dl_problem* problem, double* out, size_t len);
DL_API dl_status dl_problem_start(const dl_problem* problem, double* out, size_t len);
/* f(x), or F(x) with a regularizer. */
DL_API dl_status dl_problem_objective(const dl_problem* problem, const double* x, size_t len, double* out);

/* --- runs -------------------------------------------------------------- */

typedef struct dl_trace dl_trace;

typedef struct dl_trace_row {
  size_t t;
  double gamma_t;
  double f_gap;
  double dist_sq;
  double avg_gap; /* NaN without averaging */
} dl_trace_row;

/* Runs one trial. `run_json` holds the run fields of an experiment config
 * (algorithm, schedule, T, b, seed, x0, averaging, momentum_form, ball_B). */
DL_API dl_status dl_run(const dl_problem* problem, const char* run_json, size_t trial, dl_trace** out);
DL_API void dl_trace_free(dl_trace* trace);
DL_API size_t dl_trace_length(const dl_trace* trace);
DL_API dl_status dl_trace_row_at(const dl_trace* trace, size_t i, dl_trace_row* out);
DL_API dl_status dl_trace_last(const dl_trace* trace, double* out, size_t len);
DL_API dl_status dl_trace_csv(const dl_trace* trace, char** out);

/* --- theory ------------------------------------------------------------ */

/* Bound of `setting` at t for the problem started at its default x0. */
DL_API dl_status dl_bound_eval(const char* setting, const dl_problem* problem, const char* schedule_json,
                               size_t batch_size, size_t t, double* out);
DL_API dl_status dl_complexity(const char* setting, const dl_problem* problem, double epsilon, size_t batch_size,
                               size_t* t_min, double* gamma);
/* Complexity table text for the companion fixtures. */
DL_API dl_status dl_table_text(double epsilon, char** out);

/* --- harness ----------------------------------------------------------- */

DL_API dl_status dl_property_suite(const dl_problem* problem, size_t samples, uint64_t seed, char** report_json,
                                   int* green);

/* --- commands ---------------------------------------------------------- */

typedef struct dl_command_options {
  const char* out_dir; /* NULL: current directory */
  size_t jobs;         /* 0 treated as 1 */
  int has_seed_override;
  uint64_t seed_override;
} dl_command_options;

/* Each command stores its stdout text in *output (may be NULL on early
 * failures). A failed verdict returns DL_ERR_VERDICT_FAILED with output. */
DL_API dl_status dl_cmd_run(const char* config_path, const dl_command_options* options, char** output);
DL_API dl_status dl_cmd_verify(const char* config_path, const dl_command_options* options, char** output);
DL_API dl_status dl_cmd_table(const char* config_path, const dl_command_options* options, char** output);
DL_API dl_status dl_cmd_suite(const char* config_path, const dl_command_options* options, char** output);

#ifdef __cplusplus
}
#endif

#endif
