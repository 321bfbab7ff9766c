/* C interface to the LSTS curriculum-RL library.
 *
 * All entry points return an lsts_status; on any failure the thread-local
 * message from lsts_last_error() describes what went wrong. Objects are
 * opaque handles released with their matching *_free function. Strings
 * returned through char** out-parameters are heap copies owned by the caller
 * and released with lsts_string_free.
 */
#ifndef LSTS_LSTS_H
#define LSTS_LSTS_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define LSTS_API __declspec(dllexport)
#else
#define LSTS_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum lsts_status {
  LSTS_OK = 0,
  LSTS_ERR_SYNTAX = 1,      /* spec text failed to parse */
  LSTS_ERR_SEMANTIC = 2,    /* spec/graph is structurally unusable */
  LSTS_ERR_CONFIG = 3,      /* bad config file, field, or referenced path */
  LSTS_ERR_IO = 4,          /* filesystem read/write failure */
  LSTS_ERR_INVALID_ARG = 5, /* null handle or out-of-domain argument */
  LSTS_ERR_BUDGET = 6,      /* reserved: budget exhausted without convergence */
  LSTS_ERR_INTERNAL = 7     /* unexpected failure; see lsts_last_error() */
} lsts_status;

typedef struct lsts_spec lsts_spec;
typedef struct lsts_graph lsts_graph;
typedef struct lsts_config lsts_config;
typedef struct lsts_trials lsts_trials;

/* Message from the most recent failing call on this thread ("" when none). */
LSTS_API const char* lsts_last_error(void);

LSTS_API void lsts_string_free(char* s);

/* -------- specifications -------- */

LSTS_API lsts_status lsts_spec_parse(const char* text, lsts_spec** out);

/* Canonical text form; parsing it again yields a structurally equal spec. */
LSTS_API lsts_status lsts_spec_print(const lsts_spec* spec, char** out);

LSTS_API void lsts_spec_free(lsts_spec* spec);

/* -------- task graphs -------- */

LSTS_API lsts_status lsts_graph_compile(const lsts_spec* spec, lsts_graph** out);

/* Both return 0 when g is NULL. */
LSTS_API int lsts_graph_node_count(const lsts_graph* g);
LSTS_API int lsts_graph_edge_count(const lsts_graph* g);

/* Number of distinct q0-to-final edge paths. */
LSTS_API lsts_status lsts_graph_path_count(const lsts_graph* g, uint64_t* out);

LSTS_API lsts_status lsts_graph_to_dot(const lsts_graph* g, char** out);

/* Line-oriented dump: "EDGE <src> <dst> <guard>" rows then "FINAL <id>". */
LSTS_API lsts_status lsts_graph_to_plain(const lsts_graph* g, char** out);

LSTS_API void lsts_graph_free(lsts_graph* g);

/* -------- experiment configs -------- */

LSTS_API lsts_status lsts_config_load(const char* path, lsts_config** out);

/* Dotted keys, e.g. "algo", "budget", "seeds" ("1,2,3"), "params.x". */
LSTS_API lsts_status lsts_config_set(lsts_config* cfg, const char* key, const char* value);

LSTS_API void lsts_config_free(lsts_config* cfg);

/* -------- experiments -------- */

/* Runs one trial per configured seed and writes trials.csv, curves.csv, and
 * timings.csv into the config's output directory. */
LSTS_API lsts_status lsts_run_experiment(const lsts_config* cfg, lsts_trials** out);

LSTS_API int lsts_trials_count(const lsts_trials* t);
LSTS_API int lsts_trials_all_converged(const lsts_trials* t);

/* Per-trial lines plus a mean +/- SD roll-up. */
LSTS_API lsts_status lsts_trials_summary(const lsts_trials* t, char** out);

LSTS_API void lsts_trials_free(lsts_trials* t);

/* Reads <in_dir>/<algo>/{trials,curves}.csv for two algorithms and renders
 * the comparison report (summaries, time-to-threshold, Welch test). */
LSTS_API lsts_status lsts_compare_dirs(const char* in_dir, const char* algo_a,
                                       const char* algo_b, double threshold,
                                       char** out_report);

/* Two-sided unequal-variance t test; na, nb >= 2. */
LSTS_API lsts_status lsts_welch_t_test(const double* a, size_t na, const double* b, size_t nb,
                                       double* out_t, double* out_p);

#ifdef __cplusplus
}
#endif

#endif /* LSTS_LSTS_H */
